"""Deterministic discrete-event scheduler with named random streams."""

import heapq
import logging
import zlib
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np


logger = logging.getLogger('zcash_mixsim')


class SchedulerError(Exception):
    """Base class for scheduler errors."""


class SchedulingInPast(SchedulerError):
    """An event was scheduled before the current tick."""


Event = Callable[[], Any]


class Scheduler:
    """
    Single-threaded event loop over integer ticks (1 tick ~ 1 ms).

    Events at the same tick fire in insertion order. Randomness is drawn from
    per-purpose numpy streams derived from one seed, so identical seeds give
    identical runs and one purpose's draws never shift another's.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._now = 0
        self._queue: List[Tuple[int, int, Event]] = []
        self._sequence = 0
        self._streams: Dict[str, np.random.Generator] = {}
        self.fired = 0

    @property
    def now(self) -> int:
        return self._now

    def rng(self, purpose: str) -> np.random.Generator:
        """
        Get the random stream for a purpose, creating it on first use.

        Args:
            purpose: Stable name such as 'workload' or 'delays'

        Returns:
            Generator seeded from (seed, purpose)
        """
        if purpose not in self._streams:
            key = zlib.crc32(purpose.encode('utf-8'))
            sequence = np.random.SeedSequence(self.seed, spawn_key=(key,))
            self._streams[purpose] = np.random.Generator(np.random.PCG64(sequence))
        return self._streams[purpose]

    def schedule(self, event: Event, at: int) -> None:
        """
        Enqueue an event.

        Args:
            event: Zero-argument callable
            at: Tick at which it fires

        Raises:
            SchedulingInPast: If at is before the current tick
        """
        at = int(at)
        if at < self._now:
            raise SchedulingInPast(f"cannot schedule at t={at}, current time is t={self._now}")
        heapq.heappush(self._queue, (at, self._sequence, event))
        self._sequence += 1

    def schedule_after(self, event: Event, delay: int) -> None:
        self.schedule(event, self._now + int(delay))

    def pending(self) -> int:
        return len(self._queue)

    def step(self) -> bool:
        """Fire the next event. Returns False when the queue is empty."""
        if not self._queue:
            return False
        at, _, event = heapq.heappop(self._queue)
        self._now = at
        self.fired += 1
        event()
        return True

    def run(self, until: Optional[int] = None) -> int:
        """
        Fire events in (time, insertion) order.

        Args:
            until: Stop before events later than this tick; None drains the queue

        Returns:
            The current tick after the run
        """
        while self._queue:
            if until is not None and self._queue[0][0] > until:
                self._now = max(self._now, until)
                break
            self.step()
        logger.debug(f"[Scheduler] Stopped at t={self._now} after {self.fired} events")
        return self._now
