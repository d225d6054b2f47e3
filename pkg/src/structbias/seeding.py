"""Deterministic seed derivation.

All randomness in the toolkit flows from ``numpy.random.default_rng`` seeded
with integers derived here. Deriving sub-seeds by hashing (master seed +
string/int parts) gives independent, reproducible streams without any global
state, and keeps every artifact regenerable from a single recorded master
seed.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_seed", "rng_for"]

_SEED_MASK = (1 << 63) - 1


def derive_seed(master_seed: int, *parts: object) -> int:
    """Derive a 63-bit sub-seed from a master seed and a label path.

    The derivation is a SHA-256 hash over the decimal master seed and the
    ``repr`` of each part, so distinct label paths give independent seeds and
    the mapping is stable across platforms and Python versions (only ints and
    strings are used as parts).
    """
    h = hashlib.sha256()
    h.update(str(int(master_seed)).encode("ascii"))
    for part in parts:
        h.update(b"\x1f")
        h.update(repr(part).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little") & _SEED_MASK


def rng_for(master_seed: int, *parts: object) -> np.random.Generator:
    """A fresh Generator for the given derivation path."""
    return np.random.default_rng(derive_seed(master_seed, *parts))
