"""Deterministic discrete-event engine with an integer-nanosecond clock.

Events pop in ``(timestamp, sequence)`` order; ``sequence`` is assigned at
scheduling time, so ties resolve in insertion order.  Randomness comes from
:class:`RngStream`, which derives independent numpy generators from a root
seed and a path of labels.
"""

from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, TextIO

import numpy as np

NS_PER_S = 1_000_000_000


def seconds_to_ns(seconds: float) -> int:
    return int(round(seconds * NS_PER_S))


def ns_to_seconds(ns: int) -> float:
    return ns / NS_PER_S


class SchedulingError(RuntimeError):
    """An event was scheduled before the current simulation time."""


@dataclass(eq=False)
class SimEvent:
    timestamp: int
    sequence: int
    target: str
    kind: str
    handler: Callable[..., Any] | None = field(default=None, repr=False)
    payload: Any = field(default=None, repr=False)
    cancelled: bool = False

    def cancel(self) -> None:
        self.cancelled = True


class Engine:
    """Single-threaded event scheduler.

    Handlers are called as ``handler(event)``.  With ``record=True`` every
    processed event is appended to :attr:`trace` as ``(timestamp, target, kind)``.
    """

    def __init__(self, record: bool = False):
        self.now = 0
        self._queue: list[tuple[int, int, SimEvent]] = []
        self._seq = 0
        self.record = record
        self.trace: list[tuple[int, str, str]] = []
        self.processed = 0
        self._digest = hashlib.sha256()

    def schedule(self, timestamp: int, target: str, kind: str,
                 handler: Callable[[SimEvent], Any] | None = None,
                 payload: Any = None) -> SimEvent:
        timestamp = int(timestamp)
        if timestamp < self.now:
            raise SchedulingError(
                f"cannot schedule {target}/{kind} at {timestamp} ns; clock is at {self.now} ns"
            )
        ev = SimEvent(timestamp, self._seq, target, kind, handler, payload)
        self._seq += 1
        heapq.heappush(self._queue, (timestamp, ev.sequence, ev))
        return ev

    def schedule_in(self, delay_ns: int, target: str, kind: str,
                    handler: Callable[[SimEvent], Any] | None = None,
                    payload: Any = None) -> SimEvent:
        return self.schedule(self.now + int(delay_ns), target, kind, handler, payload)

    def peek(self) -> int | None:
        while self._queue and self._queue[0][2].cancelled:
            heapq.heappop(self._queue)
        return self._queue[0][0] if self._queue else None

    def run_until(self, t_end: int) -> int:
        """Process every event with timestamp <= ``t_end``; return how many ran."""
        t_end = int(t_end)
        if t_end < self.now:
            raise SchedulingError(f"run_until({t_end}) is before current time {self.now}")
        count = 0
        queue = self._queue
        while queue and queue[0][0] <= t_end:
            ts, _, ev = heapq.heappop(queue)
            if ev.cancelled:
                continue
            self.now = ts
            self._digest.update(f"{ts}|{ev.target}|{ev.kind}\n".encode())
            if self.record:
                self.trace.append((ts, ev.target, ev.kind))
            if ev.handler is not None:
                ev.handler(ev)
            count += 1
        self.now = t_end
        self.processed += count
        return count

    def digest(self) -> str:
        """SHA-256 over every processed (timestamp, target, kind)."""
        return self._digest.hexdigest()

    def dump_trace(self, stream: TextIO) -> None:
        for ts, target, kind in self.trace:
            stream.write(f"{ts}\t{target}\t{kind}\n")


def _label_key(label: str) -> int:
    return int.from_bytes(hashlib.blake2b(label.encode(), digest_size=4).digest(), "little")


class RngStream:
    """Named random stream: identical (seed, path) gives an identical sequence."""

    def __init__(self, seed: int, path: Iterable[str] | str = ()):
        if isinstance(path, str):
            path = [p for p in path.split("/") if p]
        self.seed = int(seed) & (2**64 - 1)
        self.path = tuple(str(p) for p in path)

    def child(self, *labels: Any) -> "RngStream":
        return RngStream(self.seed, self.path + tuple(str(l) for l in labels))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=tuple(_label_key(l) for l in self.path))
        return np.random.Generator(np.random.PCG64(seq))

    def __repr__(self) -> str:
        return f"RngStream({self.seed}, {'/'.join(self.path)!r})"
