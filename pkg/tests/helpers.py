"""Single-port harness shared by the port, preemption and oracle tests."""

from __future__ import annotations

import warnings

from tsnsim.cbs import CbsClassConfig, CreditMode, idle_slope_for_port
from tsnsim.engine import Rank, Simulator
from tsnsim.gcl import FpMode, GclSchedule, PortGating, closed_time_and_gb
from tsnsim.model import Flow, Frame, PreemptionClass, TrafficClass, TrafficKind
from tsnsim.network import class_policies
from tsnsim.port import EgressPort

MS = 1_000_000

DEFAULT_CLASSES = (
    TrafficClass("TT", 7, TrafficKind.TT, PreemptionClass.EXPRESS),
    TrafficClass("A", 6, TrafficKind.AVB, PreemptionClass.PREEMPTABLE, 50_000_000),
    TrafficClass("BE", 0, TrafficKind.BE, PreemptionClass.PREEMPTABLE),
)


class PortRun:
    def __init__(self, port, sim, received, trace, tx_log):
        self.port = port
        self.sim = sim
        self.received = received  # (time, fragment)
        self.trace = trace
        self.tx_log = tx_log

    def starts(self, cls=None):
        """(flow id, seq, fragment index, start) of every unit, in order."""
        return [(r[1], r[2], r[3], r[4]) for r in self.tx_log
                if cls is None or r[1].startswith(cls)]


def run_port(arrivals, *, fp="none", mode="nonfrozen", rate=100_000_000, windows=(),
             hyperperiod=MS, classes=DEFAULT_CLASSES, idle_slopes=None, until=None,
             guardband=True, trace=False, sample_interval=None, hold_advance=None):
    """Simulate one egress port.

    ``arrivals`` is a list of ``(time, class name, payload bytes)``; frames are
    enqueued at those instants.  Flow ids are ``<class>-<n>``.
    """
    fp = FpMode(fp)
    names = frozenset(c.name for c in classes)
    tt = [c.name for c in classes if c.kind is TrafficKind.TT]
    if windows:
        sched = GclSchedule.from_windows(hyperperiod, list(windows), names, express=tt)
    else:
        sched = GclSchedule.always_open(names, hyperperiod)
    policies, preemptable, express = class_policies(classes, fp, rate, guardband)
    if hold_advance is not None:
        import dataclasses
        policies = {k: dataclasses.replace(p, hold_advance=hold_advance) if p.mode is FpMode.WITH_HR else p
                    for k, p in policies.items()}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        gating = PortGating(sched, policies, preemptable,
                            express=express if fp is FpMode.WITH_HR else ())
        cbs = {}
        for c in classes:
            if not c.cbs_enabled:
                continue
            if idle_slopes and c.name in idle_slopes:
                idle = idle_slopes[c.name]
            else:
                closed, gb = closed_time_and_gb(sched, policies[c.name], c.name,
                                                preemptable=preemptable[c.name])
                idle = idle_slope_for_port(c.oper_idle_slope, hyperperiod, closed, gb, "gate-and-guardband")
            cbs[c.name] = CbsClassConfig(c.name, c.oper_idle_slope, idle, rate, CreditMode(mode))
    sim = Simulator()
    received = []
    tx_log = []
    trace_list = [] if trace else None
    port = EgressPort(sim, "P", rate, classes, gating, cbs=cbs, fp_mode=fp, propagation=0,
                      receiver=lambda frag, t: received.append((t, frag)), tx_log=tx_log,
                      trace=trace_list, sample_interval=sample_interval)
    port.start()
    counters = {}
    for t, cls, payload in arrivals:
        n = counters.get(cls, 0)
        counters[cls] = n + 1
        flow = Flow(f"{cls}-{n}", cls, ("X", "Y"), payload, hyperperiod)
        sim.schedule(t, Rank.ENQUEUE, "Enqueue", port.enqueue, Frame(flow, 0, t))
    if until is None:
        until = max((t for t, _, _ in arrivals), default=0) + 10 * MS
    sim.run(until)
    return PortRun(port, sim, received, trace_list, tx_log)
