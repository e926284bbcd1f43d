"""Thread pool helpers. Work is always split into fixed chunks so that results
never depend on the number of workers."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

THREADS_ENV = "TAILDEP_THREADS"


def resolve_threads(threads: Optional[int | str] = None) -> int:
    if threads in (None, "", "auto"):
        env = os.environ.get(THREADS_ENV)
        if env and env != "auto":
            return max(1, int(env))
        return os.cpu_count() or 1
    return max(1, int(threads))


def chunk_bounds(total: int, size: int) -> list[tuple[int, int]]:
    return [(a, min(a + size, total)) for a in range(0, total, size)]


def map_chunks(fn: Callable[[int, int], T], bounds: Sequence[tuple[int, int]],
               threads: Optional[int] = None) -> list[T]:
    """Apply ``fn(start, stop)`` to every chunk, returning results in chunk order."""
    workers = min(resolve_threads(threads), max(len(bounds), 1))
    if workers <= 1:
        return [fn(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda ab: fn(*ab), bounds))


def stream(seed: int, key: int) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, key)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(key)])))
