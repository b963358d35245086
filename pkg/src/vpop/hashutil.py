"""Deterministic 64-bit hashing, independent of PYTHONHASHSEED.

Fingerprint environments, split jitter and per-parameter init seeds all
need hashes that are stable across runs and platforms, which rules out the
builtin hash().  Integers go through a splitmix64-style mixer; strings and
nested tuples are folded in with type tags so ("a", 1) and ("a1",) differ.
"""
from __future__ import annotations

import hashlib

_MASK = (1 << 64) - 1
_SEED = 0x243F6A8885A308D3  # pi digits


def mix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def hash_ints(values) -> int:
    h = _SEED
    for v in values:
        h = mix64(h ^ (v & _MASK))
    return h


def _fold(value, acc: list[int]) -> None:
    if isinstance(value, bool):
        acc.extend((1, int(value)))
    elif isinstance(value, int):
        acc.extend((2, value))
    elif isinstance(value, str):
        digest = hashlib.blake2b(value.encode(), digest_size=8).digest()
        acc.extend((3, int.from_bytes(digest, "little")))
    elif isinstance(value, bytes):
        digest = hashlib.blake2b(value, digest_size=8).digest()
        acc.extend((4, int.from_bytes(digest, "little")))
    elif isinstance(value, (tuple, list)):
        acc.extend((5, len(value)))
        for item in value:
            _fold(item, acc)
    else:
        raise TypeError(f"unhashable part {type(value).__name__}")


def stable_hash64(*parts) -> int:
    """Order-sensitive 64-bit hash of ints, strings, bytes and tuples."""
    acc: list[int] = []
    for part in parts:
        _fold(part, acc)
    return hash_ints(acc)
