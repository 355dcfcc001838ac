"""Single-threaded discrete-event scheduler."""

from __future__ import annotations

import heapq
import itertools
from typing import Any, Callable

from .core import SimTime


class SchedulingError(RuntimeError):
    pass


class Kernel:
    """Virtual clock plus an event queue ordered by ``(fire_at, seq)``.

    Events at the same virtual time run in insertion order.  The kernel draws
    no random numbers itself.
    """

    def __init__(self, start: SimTime = 0):
        self._now = start
        self._queue: list[tuple[int, int, Callable[..., Any], tuple]] = []
        self._seq = itertools.count()
        self.dispatched = 0

    def now(self) -> SimTime:
        return self._now

    def __len__(self) -> int:
        return len(self._queue)

    def schedule(self, at: SimTime, action: Callable[..., Any], *args: Any) -> None:
        if at < self._now:
            raise SchedulingError(f"cannot schedule at {at}, clock is already {self._now}")
        heapq.heappush(self._queue, (at, next(self._seq), action, args))

    def schedule_in(self, delay: int, action: Callable[..., Any], *args: Any) -> None:
        self.schedule(self._now + delay, action, *args)

    def step(self) -> bool:
        if not self._queue:
            return False
        at, _, action, args = heapq.heappop(self._queue)
        self._now = at
        self.dispatched += 1
        action(*args)
        return True

    def run_until(self, t_end: SimTime) -> None:
        """Dispatch every event with ``fire_at <= t_end``, then advance the clock to ``t_end``."""
        queue = self._queue
        pop = heapq.heappop
        while queue and queue[0][0] <= t_end:
            at, _, action, args = pop(queue)
            self._now = at
            self.dispatched += 1
            action(*args)
        if t_end > self._now:
            self._now = t_end

    def run(self) -> None:
        """Dispatch events until the queue is empty."""
        while self.step():
            pass
