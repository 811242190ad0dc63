"""Monotonic and virtual time sources for descent drivers.

Real runs timestamp iteration ends from the process monotonic clock.
Virtual runs replace elapsed time with a logical model: each evaluation
round (one scatter across a partition) advances the clock by a fixed
per-evaluation duration, which makes scheduling tests deterministic.
"""

from __future__ import annotations

import time


class RealClock:
    """Monotonic wall clock, in milliseconds, relative to its creation."""

    def __init__(self) -> None:
        self._t0 = time.perf_counter()

    def now_ms(self) -> float:
        return (time.perf_counter() - self._t0) * 1000.0

    def advance_rounds(self, rounds: int) -> None:
        """No-op: real time advances on its own."""


class VirtualClock:
    """Logical clock advanced by evaluation rounds.

    One round models the parallel evaluation of one block of points across
    a partition; it costs `eval_ms` regardless of how many workers share
    the round.
    """

    def __init__(self, eval_ms: float, start_ms: float = 0.0) -> None:
        if eval_ms <= 0.0:
            raise ValueError("eval_ms must be positive")
        self.eval_ms = float(eval_ms)
        self._now = float(start_ms)

    def now_ms(self) -> float:
        return self._now

    def advance_rounds(self, rounds: int) -> None:
        self._now += rounds * self.eval_ms
