"""Multi-hop network simulation: sources, switches, egress ports, sinks."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .cbs import CbsClassConfig, idle_slope_for_port
from .engine import Rank, Simulator
from .fp import reassemble
from .gcl import NO_FP_GB_LINE_BYTES, FpMode, GuardbandPolicy, PortGating, closed_time_and_gb
from .metrics import FlowStats
from .model import ConfigError, Frame, TrafficKind
from .port import EgressPort


@dataclass
class PortConfig:
    key: str
    rate: int
    propagation: int
    gating: PortGating
    cbs: dict


def class_policies(classes, fp_mode, rate, guardband=True):
    """Guardband policy per non-TT class; preemptable classes under FP get
    the short guardband, everything else the full-frame one."""
    express = tuple(c.name for c in classes if c.express)
    policies = {}
    preemptable = {}
    for c in classes:
        pre = fp_mode is not FpMode.NONE and not c.express
        preemptable[c.name] = pre
        if c.kind is TrafficKind.TT:
            continue
        if pre:
            policies[c.name] = GuardbandPolicy.default(fp_mode, rate, guardband=guardband,
                                                       express=express)
        else:
            policies[c.name] = GuardbandPolicy(fp_mode, NO_FP_GB_LINE_BYTES, rate, None, express)
    return policies, preemptable, express


def build_port_config(scenario, key, config) -> PortConfig:
    a, b = key.split("->")
    link = scenario.topology.link(a, b)
    rate = link.rate
    sched = scenario.schedule_for(key)
    classes = scenario.classes
    policies, preemptable, express = class_policies(classes, config.fp_mode, rate,
                                                    config.guardband)
    gating = PortGating(sched, policies, preemptable,
                        express=express if config.fp_mode is FpMode.WITH_HR else ())
    cbs = {}
    for c in classes:
        if not c.cbs_enabled:
            continue
        closed, gb = closed_time_and_gb(sched, policies[c.name], c.name,
                                        preemptable=preemptable[c.name])
        try:
            idle = idle_slope_for_port(c.oper_idle_slope, sched.hyperperiod, closed, gb,
                                       config.scaling)
            cbs[c.name] = CbsClassConfig(c.name, c.oper_idle_slope, idle, rate,
                                         config.credit_mode)
        except ConfigError as exc:
            raise ConfigError(f"port {key}, class {c.name}: {exc}") from None
    return PortConfig(key, rate, link.propagation, gating, cbs)


def build_ports_config(scenario, config) -> dict:
    return {key: build_port_config(scenario, key, config) for key in scenario.port_keys()}


class Network:
    """One simulation run of a scenario under a run configuration."""

    def __init__(self, scenario, config, *, trace=False, trace_ports=None,
                 sample_interval=10_000, event_log=None, tx_log=False):
        self.scenario = scenario
        self.config = config
        self.sim = Simulator(config.seed, event_log)
        self.trace = [] if trace else None
        self.tx_log = [] if tx_log else None
        self.ports: dict[str, EgressPort] = {}
        self._partial: dict = {}
        classes = {c.name: c for c in scenario.classes}
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            port_configs = build_ports_config(scenario, config)
        # clipping/merging notes repeat per class and per call; keep them once
        self.warnings = list(dict.fromkeys(str(w.message) for w in caught))
        for key, pc in port_configs.items():
            traced = trace and (trace_ports is None or key in trace_ports)
            a, b = key.split("->")
            self.ports[key] = EgressPort(
                self.sim, key, pc.rate, scenario.classes, pc.gating, cbs=pc.cbs,
                fp_mode=config.fp_mode, propagation=pc.propagation,
                receiver=self._make_receiver(b), tx_log=self.tx_log,
                trace=self.trace if traced else None,
                sample_interval=sample_interval if traced else None,
            )
        self.stats = {}
        self.offsets = {}
        self._next_port = {}
        for f in scenario.flows:
            c = classes[f.traffic_class]
            self.stats[f.id] = FlowStats(f.id, c.name, c.kind.value)
            # offsets drawn in flow order so they depend only on the seed
            self.offsets[f.id] = f.offset if f.offset is not None else self.sim.rng.randrange(f.period)
            for a, b, c2 in zip(f.route, f.route[1:], f.route[2:]):
                self._next_port[(f.id, b)] = self.ports[f"{b}->{c2}"]
            self._next_port[(f.id, f.route[0])] = self.ports[f"{f.route[0]}->{f.route[1]}"]
        self.switch_delay = scenario.topology.switch_delay
        self.delivered = 0

    def _make_receiver(self, node):
        def receive(fragment, t):
            frame = fragment.frame
            if fragment.index == 0 and fragment.is_final:
                self._frame_received(frame, node, t)
                return
            parts = self._partial.setdefault((id(frame), node), [])
            parts.append(fragment)
            if fragment.is_final:
                del self._partial[(id(frame), node)]
                self._frame_received(reassemble(parts), node, t)
        return receive

    def _frame_received(self, frame, node, t) -> None:
        frame.hops.append(t)
        flow = frame.flow
        if node == flow.destination:
            self.stats[flow.id].record_delivery(frame.seq, frame.created, t)
            self.delivered += 1
            return
        port = self._next_port.get((flow.id, node))
        if port is None:
            raise RuntimeError(f"no route entry for flow {flow.id} at {node}")
        self.sim.schedule(t + self.switch_delay, Rank.ENQUEUE, "ForwardReady",
                          port.enqueue, frame)

    def _generate(self, flow, seq) -> None:
        t = self.sim.now
        frame = Frame(flow, seq, t)
        self._next_port[(flow.id, flow.source)].enqueue(frame)
        self.sim.schedule(t + flow.period, Rank.ENQUEUE, "FrameGeneration",
                          self._generate, flow, seq + 1)

    def run(self, until=None):
        until = self.config.duration if until is None else until
        for port in self.ports.values():
            port.start()
        for f in self.scenario.flows:
            self.sim.schedule(self.offsets[f.id], Rank.ENQUEUE, "FrameGeneration",
                              self._generate, f, 0)
        self.sim.run(until)
        return self

    def summary(self) -> dict:
        from .metrics import class_maxima

        return {
            "scenario": self.scenario.name,
            "credit_mode": self.config.credit_mode.value,
            "fp": self.config.fp_mode.value,
            "guardband": self.config.guardband,
            "scaling": self.config.scaling,
            "seed": self.config.seed,
            "duration_ns": self.config.duration,
            "events": self.sim.dispatched,
            "frames_delivered": self.delivered,
            "classes": class_maxima(self.stats.values()),
            "tt_window_misses": sum(p.missed_windows for p in self.ports.values()),
            "schedule_warnings": len(self.warnings),
            "preemptions": sum(p.preemptions for p in self.ports.values()),
            "max_backlog_frames": max((p.max_backlog for p in self.ports.values()), default=0),
            "idle_slopes_bps": {
                k: {n: cs.config.idle_slope for n, cs in p.credits.items()}
                for k, p in self.ports.items() if p.credits
            },
        }
