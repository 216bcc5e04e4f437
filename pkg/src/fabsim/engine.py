"""Deterministic discrete-event engine.

Simulated time is an integer nanosecond counter.  Events fire in
(time, insertion sequence) order, which makes ties reproducible and the
whole run bit-for-bit deterministic for a fixed seed.
"""

import heapq
import random


class SchedulingError(Exception):
    """Raised when an event is scheduled in the past."""


class Event:
    """A scheduled callback.

    Ordering is by (fire_at, seq); seq is a per-loop monotone counter so
    simultaneous events fire in insertion order.
    """

    __slots__ = ("fire_at", "seq", "target", "action")

    def __init__(self, fire_at, seq, target, action):
        self.fire_at = fire_at
        self.seq = seq
        self.target = target
        self.action = action

    def __lt__(self, other):
        return (self.fire_at, self.seq) < (other.fire_at, other.seq)


class EventLoop:
    """Single-threaded event loop with integer-ns simulated time."""

    def __init__(self, trace=False):
        self.now = 0
        self._queue = []
        self._seq = 0
        self.trace = [] if trace else None

    def schedule(self, fire_at, action, target=""):
        """Enqueue `action` to run at absolute time `fire_at` (ns)."""
        if fire_at < self.now:
            raise SchedulingError(
                f"event for {target!r} scheduled at t={fire_at} ns, "
                f"but now()={self.now} ns"
            )
        ev = Event(fire_at, self._seq, target, action)
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return ev

    def schedule_in(self, delay, action, target=""):
        return self.schedule(self.now + delay, action, target)

    def run_until(self, t_end):
        """Fire all events with fire_at <= t_end; returns final now()."""
        q = self._queue
        while q and q[0].fire_at <= t_end:
            ev = heapq.heappop(q)
            self.now = ev.fire_at
            if self.trace is not None:
                self.trace.append((ev.fire_at, ev.seq, ev.target))
            ev.action()
        if self.now < t_end:
            self.now = t_end
        return self.now

    def run(self):
        """Fire events until the queue is empty; returns final now()."""
        q = self._queue
        while q:
            ev = heapq.heappop(q)
            self.now = ev.fire_at
            if self.trace is not None:
                self.trace.append((ev.fire_at, ev.seq, ev.target))
            ev.action()
        return self.now

    def pending(self):
        return len(self._queue)


def make_rng(seed, stream=0):
    """Seeded RNG; identical (seed, stream) gives identical draws on any
    platform (CPython's Mersenne Twister is platform-independent)."""
    return random.Random((seed << 16) ^ stream)
