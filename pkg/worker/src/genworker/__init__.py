"""Generative-operator worker with a deterministic, dependency-light fake mode."""

from .service import CAPABILITIES, Service, WorkerConfig, resolve_mode

__version__ = "0.1.0"
