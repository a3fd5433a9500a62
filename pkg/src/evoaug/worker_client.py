"""Client side of the generative-worker wire protocol.

Newline-delimited JSON over a subprocess's stdio or a TCP stream.  Requests
carry a unique id; responses may arrive in any order, so a reader thread files
them by id and waiters block on a condition variable.  A semaphore bounds the
number of in-flight requests.
"""

from __future__ import annotations

import base64
import json
import shlex
import socket
import subprocess
import threading
import time
from dataclasses import dataclass

from .errors import ConfigError, ProtocolError, WorkerUnreachableError
from .raster import RasterImage, decode_png, encode_png


@dataclass(frozen=True)
class RemoteOperatorConfig:
    """How to reach a worker and how patiently to talk to it."""

    transport: str = "subprocess"  # "subprocess" or "tcp"
    command: tuple[str, ...] | None = None
    address: tuple[str, int] | None = None
    timeout: float = 30.0
    max_retries: int = 2
    backoff_base: float = 0.5  # seconds; doubles per retry
    nerf_rotations: tuple[float, ...] = (-15.0, 15.0)
    inflight_limit: int = 4

    def __post_init__(self):
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.transport not in ("subprocess", "tcp"):
            raise ValueError(f"unknown transport {self.transport!r}")
        if self.transport == "subprocess" and not self.command:
            raise ValueError("subprocess transport needs a command")
        if self.transport == "tcp" and self.address is None:
            raise ValueError("tcp transport needs an address")

    @classmethod
    def from_endpoint(cls, endpoint: str, **overrides) -> "RemoteOperatorConfig":
        """Parse "tcp:host:port" or a shell command line."""
        try:
            if endpoint.startswith("tcp:"):
                _, host, port = endpoint.split(":", 2)
                return cls(transport="tcp", address=(host, int(port)), **overrides)
            return cls(
                transport="subprocess", command=tuple(shlex.split(endpoint)), **overrides
            )
        except ValueError as exc:
            raise ConfigError(f"bad worker endpoint {endpoint!r}: {exc}") from exc


def image_to_b64(img: RasterImage) -> str:
    return base64.b64encode(encode_png(img)).decode("ascii")


def image_from_b64(payload: str) -> RasterImage:
    try:
        blob = base64.b64decode(payload, validate=True)
    except Exception as exc:
        raise ProtocolError(f"field 'image_png_b64' is not valid base64: {exc}") from exc
    return decode_png(blob)


class WorkerClient:
    """One connection to a worker; safe for concurrent callers."""

    def __init__(self, cfg: RemoteOperatorConfig):
        self.cfg = cfg
        self._proc: subprocess.Popen | None = None
        self._sock: socket.socket | None = None
        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._responses: dict[str, dict] = {}
        self._dead: Exception | None = None
        self._counter = 0
        self._sem = threading.BoundedSemaphore(cfg.inflight_limit)
        self._capabilities: tuple[list[str], str | None] | None = None
        try:
            if cfg.transport == "subprocess":
                self._proc = subprocess.Popen(
                    list(cfg.command),
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                )
                self._writer = self._proc.stdin
                reader = self._proc.stdout
            else:
                self._sock = socket.create_connection(cfg.address, timeout=cfg.timeout)
                self._sock.settimeout(None)
                self._writer = self._sock.makefile("wb")
                reader = self._sock.makefile("rb")
        except OSError as exc:
            raise WorkerUnreachableError(f"cannot reach worker: {exc}") from exc
        self._reader_thread = threading.Thread(
            target=self._read_loop, args=(reader,), daemon=True
        )
        self._reader_thread.start()

    def _read_loop(self, stream) -> None:
        try:
            for raw in stream:
                line = raw.decode("utf-8", errors="replace").strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError:
                    self._fail(ProtocolError("response line is not valid JSON"))
                    return
                if not isinstance(obj, dict) or not isinstance(obj.get("id"), str):
                    self._fail(ProtocolError("response is missing field 'id'"))
                    return
                if not isinstance(obj.get("ok"), bool):
                    self._fail(ProtocolError("response is missing field 'ok'"))
                    return
                with self._cond:
                    self._responses[obj["id"]] = obj
                    self._cond.notify_all()
        except (OSError, ValueError):
            pass
        self._fail(WorkerUnreachableError("worker closed the connection"))

    def _fail(self, exc: Exception) -> None:
        with self._cond:
            if self._dead is None:
                self._dead = exc
            self._cond.notify_all()

    def request(self, kind: str, **fields) -> dict:
        """Send one request and wait for its response; raises on transport death."""
        with self._sem:
            with self._lock:
                self._counter += 1
                rid = f"q{self._counter}"
            payload = {"id": rid, "kind": kind}
            payload.update({k: v for k, v in fields.items() if v is not None})
            line = (json.dumps(payload, separators=(",", ":")) + "\n").encode("utf-8")
            try:
                with self._lock:
                    self._writer.write(line)
                    self._writer.flush()
            except (OSError, ValueError) as exc:
                raise WorkerUnreachableError(f"cannot send request: {exc}") from exc
            deadline = time.monotonic() + self.cfg.timeout
            with self._cond:
                while rid not in self._responses:
                    if self._dead is not None:
                        raise self._dead
                    remaining = deadline - time.monotonic()
                    if remaining <= 0:
                        raise WorkerUnreachableError(
                            f"no response to {kind!r} within {self.cfg.timeout}s"
                        )
                    self._cond.wait(timeout=remaining)
                return self._responses.pop(rid)

    def capabilities(self, refresh: bool = False) -> tuple[list[str], str | None]:
        """Advertised capability tags and the worker's mode, memoized."""
        if self._capabilities is None or refresh:
            resp = self.request("capabilities")
            if not resp["ok"]:
                raise ProtocolError(f"capabilities refused: {resp.get('error')}")
            caps = resp.get("capabilities")
            if not isinstance(caps, list) or not all(isinstance(c, str) for c in caps):
                raise ProtocolError("response is missing field 'capabilities'")
            mode = resp.get("mode")
            self._capabilities = (caps, mode if isinstance(mode, str) else None)
        return self._capabilities

    def augment(
        self, operator: str, img: RasterImage, seed: int, params: dict | None = None
    ) -> RasterImage:
        resp = self.request(
            "augment",
            operator=operator,
            image_png_b64=image_to_b64(img),
            params=params or {},
            seed=seed,
        )
        if not resp["ok"]:
            raise ProtocolError(f"augment failed: {resp.get('error', 'no error given')}")
        payload = resp.get("image_png_b64")
        if not isinstance(payload, str):
            raise ProtocolError("response is missing field 'image_png_b64'")
        return image_from_b64(payload)

    def embed(self, img: RasterImage) -> list[float]:
        resp = self.request("embed", image_png_b64=image_to_b64(img))
        if not resp["ok"]:
            raise ProtocolError(f"embed failed: {resp.get('error', 'no error given')}")
        vec = resp.get("embedding")
        if not isinstance(vec, list) or not all(isinstance(v, (int, float)) for v in vec):
            raise ProtocolError("response is missing field 'embedding'")
        return [float(v) for v in vec]

    def close(self) -> None:
        try:
            if self._proc is not None:
                if self._proc.stdin:
                    self._proc.stdin.close()
                self._proc.wait(timeout=5)
            if self._sock is not None:
                self._sock.close()
        except (OSError, subprocess.TimeoutExpired):
            if self._proc is not None:
                self._proc.kill()

    def __enter__(self) -> "WorkerClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


def probe_worker(cfg: RemoteOperatorConfig) -> tuple[list[str], str | None]:
    """Handshake with a worker and return (capability tags, mode)."""
    with WorkerClient(cfg) as client:
        return client.capabilities()
