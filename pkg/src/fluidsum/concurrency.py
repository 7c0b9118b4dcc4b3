"""Keyed locking and optimistic retry helpers."""

from __future__ import annotations

import random
import threading
import time
from contextlib import contextmanager

from .errors import ConflictError, EngineError


class StripedLock:
    """A fixed pool of locks addressed by key hash.

    Two keys may share a stripe, which only costs parallelism, never
    correctness.  ``hold`` takes several stripes in index order so
    multi-key critical sections cannot deadlock.
    """

    def __init__(self, stripes: int = 64):
        self._locks = [threading.Lock() for _ in range(stripes)]

    def _index(self, key) -> int:
        return hash(key) % len(self._locks)

    @contextmanager
    def hold(self, *keys):
        idx = sorted({self._index(k) for k in keys})
        for i in idx:
            self._locks[i].acquire()
        try:
            yield
        finally:
            for i in reversed(idx):
                self._locks[i].release()


def retry(fn, *, attempts: int = 32, delay_ms=(0, 10), rng: random.Random | None = None):
    """Run ``fn`` until it stops raising :class:`ConflictError`.

    Between attempts sleeps a random delay drawn from ``delay_ms``.
    """
    rng = rng or random.Random()
    lo, hi = delay_ms
    for i in range(attempts):
        try:
            return fn()
        except ConflictError:
            if i == attempts - 1:
                break
            if hi > 0:
                time.sleep(rng.uniform(lo, hi) / 1000.0)
    raise EngineError(f"operation still conflicting after {attempts} attempts")
