"""Seeded counter-based random streams.

Every stream is a Philox generator keyed by ``(seed, *path)``, so a step,
party or trial gets the same numbers no matter which order (or which
process) it runs in.
"""
from __future__ import annotations

import secrets
import zlib

import numpy as np


def _word(part: int | str) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if part < 0:
        raise ValueError("stream path components must be non-negative")
    return int(part)


def stream(seed: int, *path: int | str) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_word(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def fresh_seed() -> int:
    return secrets.randbits(63)
