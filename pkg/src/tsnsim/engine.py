"""Deterministic discrete-event kernel.

Events are ordered by ``(time, rank, sequence)``.  The rank puts gate,
guardband and hold changes ahead of line completions, receptions and
enqueues, and all of those ahead of transmission decisions, so a decision
at time ``t`` always sees the complete state at ``t``.
"""

from __future__ import annotations

import heapq
import random
from enum import IntEnum


class Rank(IntEnum):
    STATE = 0  # GateChange, GuardbandStart/End, HoldStart, Release
    TX_END = 1
    RX = 2  # RxComplete
    ENQUEUE = 3  # FrameGeneration, ForwardReady, Enqueue
    DECISION = 4  # TxStart / re-evaluation
    SAMPLE = 5  # trace sampling only


class SimulationError(RuntimeError):
    """Internal invariant breach (e.g. scheduling into the past)."""


class Simulator:
    """Single-threaded event loop with a stable total order."""

    def __init__(self, seed: int = 0, event_log=None):
        self.now = 0
        self.seed = seed
        # Mersenne Twister; documented and stable across CPython versions
        self.rng = random.Random(seed)
        self._queue: list = []
        self._seq = 0
        self.dispatched = 0
        self._log = event_log

    def schedule(self, time: int, rank: int, kind: str, callback, *args) -> None:
        if time < self.now:
            raise SimulationError(
                f"event {kind} at {time} ns scheduled in the past (now={self.now})"
            )
        self._seq += 1
        heapq.heappush(self._queue, (time, rank, self._seq, kind, callback, args))

    def __len__(self):
        return len(self._queue)

    def peek_time(self):
        return self._queue[0][0] if self._queue else None

    def run(self, until: int) -> None:
        """Dispatch every event with ``time <= until`` (inclusive bound)."""
        queue = self._queue
        pop = heapq.heappop
        log = self._log
        while queue and queue[0][0] <= until:
            time, rank, seq, kind, callback, args = pop(queue)
            self.now = time
            self.dispatched += 1
            if log is not None:
                target = getattr(args[0], "name", args[0]) if args else ""
                log.write(f"{time} {rank} {seq} {kind} {target}\n")
            callback(*args)
        if queue:
            self.now = until
