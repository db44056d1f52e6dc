"""Deterministic derivation of per-purpose random streams.

Every source of randomness in a run is a child stream derived from the run
seed plus a purpose tag, so adding or removing one consumer never shifts the
draws seen by another.  String tags are folded through crc32 rather than
hash() so derivations are stable across processes and interpreter runs.
"""

from __future__ import annotations

import zlib

import numpy as np

_MASK = (1 << 63) - 1


def _entropy(root: int, parts: tuple[int | str, ...]) -> list[int]:
    out = [int(root) & _MASK]
    for part in parts:
        if isinstance(part, str):
            out.append(zlib.crc32(part.encode("utf-8")))
        else:
            out.append(int(part) & _MASK)
    return out


def spawn_seed(root: int, *parts: int | str) -> int:
    """Derive a child seed from a root seed and a purpose path."""
    ss = np.random.SeedSequence(_entropy(root, parts))
    return int(ss.generate_state(1, dtype=np.uint64)[0]) & _MASK


def spawn_rng(root: int, *parts: int | str) -> np.random.Generator:
    """Derive an independent generator from a root seed and a purpose path."""
    return np.random.default_rng(np.random.SeedSequence(_entropy(root, parts)))
