"""Injectable time sources so timeout behavior is testable without wall-clock waits."""

from __future__ import annotations

import threading
import time


class WallClock:
    """Monotonic wall time."""

    def now(self) -> float:
        return time.monotonic()


class SimClock:
    """Manually advanced time; now() only moves when a test calls advance()."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)
        self._cond = threading.Condition()

    def now(self) -> float:
        with self._cond:
            return self._now

    def advance(self, dt: float) -> float:
        if dt < 0:
            raise ValueError("clock cannot run backwards")
        with self._cond:
            self._now += dt
            self._cond.notify_all()
            return self._now
