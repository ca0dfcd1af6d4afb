"""Clocks the harness can run a realm on: the wall, or a hand-cranked
clock for deterministic runs."""

from __future__ import annotations

import threading
import time

EPOCH = 1_700_000_000.0


class WallClock:
    """Real time."""

    def now(self) -> float:
        return time.time()

    def __call__(self) -> float:
        return self.now()


class ManualClock:
    """Time under test control; only moves when told to."""

    def __init__(self, start: float = EPOCH):
        self._t = float(start)
        self._lock = threading.Lock()

    def now(self) -> float:
        with self._lock:
            return self._t

    def __call__(self) -> float:
        return self.now()

    def advance(self, seconds: float) -> float:
        if seconds < 0:
            raise ValueError("clocks only run forward")
        with self._lock:
            self._t += seconds
            return self._t

    def set(self, t: float) -> None:
        with self._lock:
            if t < self._t:
                raise ValueError("clocks only run forward")
            self._t = float(t)
