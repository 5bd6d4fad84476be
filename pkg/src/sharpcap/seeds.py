"""Deterministic seed derivation.

Every randomized stage (dataset generation, parameter init, batch
sampling, search) gets its own child seed derived from a single master
seed through a splitmix64 chain, so runs are reproducible and streams
for different stages or seed indices never alias.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One splitmix64 step: maps a 64-bit state to a well-mixed output."""
    x = (x + _GOLDEN) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def derive(master: int, *path: int) -> int:
    """Derive a child seed from ``master`` along an integer path.

    ``derive(s, i)`` for i = 0, 1, ... yields independent streams;
    nesting (``derive(s, i, j)``) subdivides a stream further.
    """
    x = master & _MASK
    for p in path:
        x = splitmix64(x ^ ((int(p) + 1) * _GOLDEN & _MASK))
    return x


def seed_list(master: int, count: int) -> list[int]:
    """Expand a master seed into ``count`` per-run seeds."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return [derive(master, i) for i in range(count)]
