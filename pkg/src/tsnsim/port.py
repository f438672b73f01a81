"""Transmission selection for one egress port.

Every state change at time ``t`` (gate boundary, line free, enqueue) only
requests a decision at ``t``; the decision runs after all same-instant
changes (see :class:`~tsnsim.engine.Rank`).  A decision

1. brings every credit to ``t`` and re-derives its regime,
2. asks for a preemption cut if a trigger holds and a preemptable unit is
   on the line,
3. otherwise, on an idle line, starts the highest-priority eligible class,
4. and, if nothing is eligible only because of negative credit, requests
   another decision at the exact zero-crossing instant.
"""

from __future__ import annotations

from collections import deque

from .cbs import CreditState
from .engine import Rank
from .fp import MergeState, MIN_PREEMPTABLE_FRAME_BYTES, Transmission
from .gcl import FpMode
from .metrics import TraceRecord
from .model import TrafficKind, byte_time


class EgressPort:
    def __init__(self, sim, name, rate, classes, gating, *, cbs=None, fp_mode=FpMode.NONE,
                 propagation=0, receiver=None, tx_log=None, trace=None, sample_interval=None):
        self.sim = sim
        self.name = name
        self.rate = rate
        self.bt = byte_time(rate)
        self.propagation = propagation
        self.receiver = receiver
        self.classes = sorted(classes, key=lambda c: -c.priority)
        if len({c.priority for c in self.classes}) != len(self.classes):
            raise ValueError(f"port {name}: class priorities must be unique")
        self.names = [c.name for c in self.classes]
        self.queues = {n: deque() for n in self.names}
        self.gating = gating
        self.gate = gating.gate
        self.blocked = gating.blocked
        self.fp_mode = FpMode(fp_mode)
        fp = self.fp_mode is not FpMode.NONE
        self.preemptable = {c.name: fp and not c.express for c in self.classes}
        self.express = [c.name for c in self.classes if fp and c.express]
        self.tt_names = [c.name for c in self.classes if c.kind is TrafficKind.TT]
        cbs = cbs or {}
        self.credits = {n: CreditState(cfg, sim.now) for n, cfg in cbs.items()}
        self._credit_items = list(self.credits.items())
        self.merge = MergeState()
        self._decisions = set()
        self.tx_log = tx_log
        self.trace = trace
        self._last_record = {}
        self.sample_interval = sample_interval
        self.missed_windows = 0
        self.max_backlog = 0
        self.transmissions = 0
        self.preemptions = 0

    # -- lifecycle -----------------------------------------------------
    def start(self) -> None:
        t = self.sim.now
        self._sync_credits(t)
        if not self.gating.trivial:
            self.sim.schedule(self.gating.next_boundary(t), Rank.STATE, "GateChange",
                              self._boundary)
        if self.trace is not None:
            self._record(t)
            if self.sample_interval:
                self.sim.schedule(t + self.sample_interval, Rank.SAMPLE, "Sample", self._sample)

    def enqueue(self, frame) -> None:
        q = self.queues[frame.flow.traffic_class]
        q.append(frame)
        if len(q) > self.max_backlog:
            self.max_backlog = len(q)
        self._request(self.sim.now)

    # -- event handlers ------------------------------------------------
    def _boundary(self) -> None:
        t = self.sim.now
        self.sim.schedule(self.gating.next_boundary(t), Rank.STATE, "GateChange", self._boundary)
        for n in self.tt_names:
            q = self.queues[n]
            if q and not self.gate[n](t) and self.gate[n](t - 1):
                self.missed_windows += len(q)
        self._request(t)

    def _request(self, t: int) -> None:
        if t not in self._decisions:
            self._decisions.add(t)
            self.sim.schedule(t, Rank.DECISION, "TxStart", self._decide, t)

    def _tx_end(self, tx, token) -> None:
        if tx.token != token or self.merge.in_flight is not tx:
            return
        self.merge.in_flight = None
        if self.tx_log is not None:
            self.tx_log.append((self.name, tx.frame.flow.id, tx.frame.seq, tx.index,
                                tx.start, tx.end, tx.sent, tx.final))
        self._request(self.sim.now)

    def _rx(self, tx, token) -> None:
        if tx.token != token:
            return
        if self.receiver is not None:
            self.receiver(tx.fragment(), self.sim.now)

    def _sample(self) -> None:
        t = self.sim.now
        self._record(t, force=True)
        self.sim.schedule(t + self.sample_interval, Rank.SAMPLE, "Sample", self._sample)

    # -- decision ------------------------------------------------------
    def _backlog(self, name) -> bool:
        pend = self.merge.pending_resume
        return bool(self.queues[name]) or (pend is not None and pend.cls == name)

    def _sync_credits(self, t: int) -> None:
        tx = self.merge.in_flight
        on_line = tx.cls if tx is not None else None
        for name, cs in self._credit_items:
            cs.update(t, transmitting=name == on_line, gate_open=self.gate[name](t),
                      guarded=self.blocked[name](t), backlog=self._backlog(name))

    def _preempt_trigger(self, tx, t) -> bool:
        for e in self.express:
            if self.queues[e] and self.gate[e](t):
                return True
        if self.fp_mode is FpMode.WITHOUT_HR:
            return not self.gate[tx.cls](t)
        return self.gating.hold_active(tx.cls, t)

    def select_next(self, t: int):
        """Name of the class to transmit at ``t`` or None."""
        pend = self.merge.pending_resume
        for name in self.names:
            resuming = pend is not None and pend.cls == name
            if not resuming and not self.queues[name]:
                continue
            if not self.gate[name](t) or self.blocked[name](t):
                continue
            if pend is not None and not resuming and self.preemptable[name]:
                continue  # the preemptable MAC must finish its frame first
            cs = self.credits.get(name)
            if cs is not None and cs.value_at(t) < 0:
                continue
            return name
        return None

    def _decide(self, t: int) -> None:
        self._decisions.discard(t)
        self._sync_credits(t)
        tx = self.merge.in_flight
        if tx is not None:
            if tx.preemptable and not tx.cut_checked and self._preempt_trigger(tx, t):
                tx.cut_checked = True
                if self.merge.preempt(t) is not None:
                    self.preemptions += 1
                    self._schedule_unit(tx)
        else:
            name = self.select_next(t)
            if name is None:
                self._schedule_wake(t)
            else:
                self._start(name, t)
        if self.trace is not None:
            self._record(t)

    def _start(self, name, t) -> None:
        pend = self.merge.pending_resume
        if pend is not None and pend.cls == name:
            tx = self.merge.resume(t, self.bt, self.preemptable[name])
        else:
            frame = self.queues[name].popleft()
            tx = Transmission(frame, name, 0, 0, t, self.bt,
                              self.preemptable[name]
                              and frame.mac_bytes >= MIN_PREEMPTABLE_FRAME_BYTES)
        self.merge.in_flight = tx
        self.transmissions += 1
        self._schedule_unit(tx)
        cs = self.credits.get(name)
        if cs is not None:
            cs.update(t, transmitting=True, backlog=self._backlog(name))

    def _schedule_unit(self, tx) -> None:
        sim = self.sim
        sim.schedule(tx.end, Rank.TX_END, "TxEnd", self._tx_end, tx, tx.token)
        sim.schedule(tx.data_end + self.propagation, Rank.RX, "RxComplete", self._rx, tx, tx.token)

    def _schedule_wake(self, t) -> None:
        wake = None
        for name, cs in self._credit_items:
            if cs.slope > 0 and cs.credit < 0 and cs.backlog and cs.gate_open and not cs.guarded:
                at = cs.zero_crossing(t)
                if at is not None and (wake is None or at < wake):
                    wake = at
        if wake is not None and wake > t:
            self._request(wake)

    # -- tracing -------------------------------------------------------
    def _record(self, t, force=False) -> None:
        tt_gate = any(self.gate[n](t) for n in self.tt_names)
        for name, cs in self._credit_items:
            q = self.queues[name]
            pend = self.merge.pending_resume
            frames = len(q)
            nbytes = sum(f.mac_bytes for f in q)
            if pend is not None and pend.cls == name:
                frames += 1
                nbytes += pend.data
            credit = cs.value_at(t)
            rec = TraceRecord(t, self.name, name, credit, cs.slope, cs.cap, cs.regime.value,
                              tt_gate, self.gate[name](t), self.gating.gb[name](t),
                              self.gating.hold_active(name, t), frames, nbytes)
            last = self._last_record.get(name)
            if not force and last is not None:
                expected = last.credit + last.slope * (t - last.time)
                if last.capped and expected > 0:
                    expected = 0
                same = (expected == credit and last.slope == rec.slope
                        and last.capped == rec.capped and last.regime == rec.regime
                        and last.tt_gate == tt_gate and last.avb_gate == rec.avb_gate
                        and last.gb_active == rec.gb_active
                        and last.hold_active == rec.hold_active
                        and last.backlog_frames == frames)
                if same:
                    continue
            if last is not None and last.time == t:
                self.trace[-1 - self._trace_back(name)] = rec
            else:
                self.trace.append(rec)
            self._last_record[name] = rec

    def _trace_back(self, name) -> int:
        # distance from the end of the trace to this class's last record
        for i, rec in enumerate(reversed(self.trace)):
            if rec.port == self.name and rec.cls == name:
                return i
        raise LookupError(name)
