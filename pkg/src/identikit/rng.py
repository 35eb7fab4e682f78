"""Counter-based random streams derived from a single master seed.

Every consumer asks for ``stream(seed, "purpose", index, ...)``; the keys are
hashed into a SeedSequence spawn key, so streams never share state and the
order in which they are requested does not matter.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & 0xFFFFFFFF
    return zlib.crc32(str(part).encode())


def stream(seed: int, *keys) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def threads() -> int:
    """Parallelism cap from IDENTIKIT_THREADS (default 1)."""
    import os

    try:
        n = int(os.environ.get("IDENTIKIT_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, n)


def ordered_map(fn, items):
    """Map ``fn`` over ``items`` with at most ``threads()`` workers, results in input order."""
    items = list(items)
    n = threads()
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
