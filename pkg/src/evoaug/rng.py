"""Deterministic random-stream derivation.

Every random draw in the engine flows from one integer seed.  Child streams
are keyed by hashing a path of labels, so unrelated components never share or
perturb each other's draws: adding an operator, a dataset item, or an extra
copy leaves every other stream untouched.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*keys: int | float | str) -> int:
    """Stable 64-bit seed for a key path such as (run_seed, "fitness", tree_text)."""
    h = hashlib.blake2b(digest_size=8)
    for key in keys:
        h.update(str(key).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def derive_rng(*keys: int | float | str) -> np.random.Generator:
    """Generator seeded by :func:`derive_seed` over the same key path."""
    return np.random.default_rng(derive_seed(*keys))


def split_rng(rng: np.random.Generator, *keys: int | float | str) -> np.random.Generator:
    """Child generator keyed by one draw from ``rng`` plus extra labels."""
    return derive_rng(int(rng.integers(0, 2**63)), *keys)
