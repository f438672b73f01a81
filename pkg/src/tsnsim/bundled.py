"""Authoring of the bundled example scenarios.

The shipped YAML files under ``tsnsim/scenarios`` are generated by this
module (``python -m tsnsim.bundled``) from a fixed authoring seed, so they
can be regenerated bit-for-bit.  Flow parameters are approximations of the
published test cases, which live in external tables:

* ``medium-mesh-{30,40,50,60}``: 6 switches, 12 end stations, 100 Mbps,
  15 TT flows plus 30-60 AVB flows (each set is a prefix of the 60-flow set).
* ``orion``: 15 switches, 31 end stations at 1 Gbps, 20 TT + 60 AVB flows.
* ``pathology-123``: a 123-byte AVB frame stream that, without a guardband
  and without Hold/Release, pushes TT frames out of their window.
* ``credit-demo``: one port, one TT window, two AVB frames.

TT windows are planned flow by flow: on each hop the window opens at the
frame's nominal arrival (or the first free slot after it) and lasts the
frame's line time plus a slack that absorbs the worst start delay of a
preemption residue.  AVB flows are drawn by rejection sampling so that each
port's AVB load stays below a fraction of the reserved rate; the run-time
start offsets of AVB flows come from the run seed.
"""

from __future__ import annotations

import random
from collections import defaultdict
from pathlib import Path

from .model import Topology, Link, byte_time, line_size, propagation_delay, wire_size
from .scenario import dump_scenario, from_dict

TT_SLACK_BYTES = 160
SCENARIO_DIR = Path(__file__).with_name("scenarios")


def _ns(value: int) -> str:
    return f"{value}ns"


def _rate(bps: int) -> str:
    return f"{bps // 1_000_000}Mbps"


class _Planner:
    """Greedy cyclic TT window allocation on every directed port."""

    def __init__(self, topology, hyperperiod, slack_bytes, switch_delay):
        self.topology = topology
        self.hp = hyperperiod
        self.slack = slack_bytes
        self.switch_delay = switch_delay
        self.busy: dict[str, list] = defaultdict(list)

    def _free(self, key, start, end) -> bool:
        return all(end <= s or start >= e for s, e in self.busy[key])

    def _place(self, key, ready, length, period):
        # windows open exactly at the nominal arrival: a TT frame never waits
        # in the (FIFO) TT queue, so it can never take another flow's window
        reps = self.hp // period
        if ready + length > period:
            return None
        spans = [(ready + k * period, ready + k * period + length) for k in range(reps)]
        if not all(self._free(key, s, e) for s, e in spans):
            return None
        self.busy[key].extend(spans)
        return ready

    def plan(self, route, payload, period, offset):
        """Windows for one flow, or None if it does not fit."""
        mac = wire_size(payload)
        saved = {k: list(v) for k, v in self.busy.items()}
        ready = offset
        placed = []
        for a, b in zip(route, route[1:]):
            link = self.topology.link(a, b)
            bt = byte_time(link.rate)
            length = (line_size(payload) + self.slack) * bt
            key = f"{a}->{b}"
            start = self._place(key, ready, length, period)
            if start is None:
                self.busy = defaultdict(list, saved)
                return None
            placed.append(key)
            ready = start + (8 + mac) * bt + link.propagation + self.switch_delay
        return placed

    def windows(self):
        out = {}
        for key, spans in self.busy.items():
            merged = []
            for s, e in sorted(spans):
                if merged and s <= merged[-1][1]:
                    merged[-1][1] = max(merged[-1][1], e)
                else:
                    merged.append([s, e])
            out[key] = merged
        return out


def _loads_ok(loads, flow_ports, mac_bits_per_s, caps) -> bool:
    return all(loads[k] + mac_bits_per_s <= caps[k] for k in flow_ports)


def _build(name, description, switches, stations, links, rate, *, n_tt, n_avb,
           hyperperiod, tt_period, avb_period, oper_idle_slope, load_fraction,
           tt_payload, avb_payload, seed, cable_m=10, tt_spread=0.25):
    rng = random.Random(seed)
    topology = Topology(tuple(switches), tuple(stations),
                        tuple(Link(a, b, rate, cable_m) for a, b in links))
    attach = {es: next(iter(topology.neighbors(es))) for es in stations}
    planner = _Planner(topology, hyperperiod, TT_SLACK_BYTES, topology.switch_delay)

    def pair():
        while True:
            s, d = rng.sample(stations, 2)
            if attach[s] != attach[d]:
                return s, d

    flows = []
    while len([f for f in flows if f["class"] == "TT"]) < n_tt:
        s, d = pair()
        route = topology.shortest_path(s, d)
        payload = rng.randint(*tt_payload)
        offset = rng.randrange(0, int(tt_period * tt_spread))
        offset -= offset % byte_time(rate)
        if planner.plan(route, payload, tt_period, offset) is None:
            continue
        flows.append({"id": f"tt{len(flows) + 1}", "class": "TT", "route": list(route),
                      "payload": payload, "period": _ns(tt_period), "offset": _ns(offset)})
    windows = planner.windows()

    # a port's AVB capacity: the reserved rate (which the idle-slope scaling
    # delivers despite gate closures) times load_fraction as a stability margin
    cap = oper_idle_slope * load_fraction
    caps = {k: cap for a, b in links for k in (f"{a}->{b}", f"{b}->{a}")}
    loads = defaultdict(float)
    n = 0
    attempts = 0
    while n < n_avb:
        attempts += 1
        if attempts > 100_000:
            raise ValueError(f"{name}: cannot place {n_avb} AVB flows under the port caps")
        s, d = pair()
        route = topology.shortest_path(s, d)
        payload = rng.randint(*avb_payload)
        bits = wire_size(payload) * 8 * 1e9 / avb_period
        ports = [f"{a}->{b}" for a, b in zip(route, route[1:])]
        if not _loads_ok(loads, ports, bits, caps):
            continue
        for k in ports:
            loads[k] += bits
        n += 1
        flows.append({"id": f"avb{n}", "class": "A", "route": list(route),
                      "payload": payload, "period": _ns(avb_period)})

    return {
        "format": "tsnsim-scenario",
        "version": 1,
        "name": name,
        "description": description,
        "defaults": {"duration": "30s", "seed": 1},
        "topology": {
            "link_rate": _rate(rate),
            "cable_length_m": cable_m,
            "switch_delay": _ns(topology.switch_delay),
            "switches": list(switches),
            "end_stations": list(stations),
            "links": [[a, b] for a, b in links],
        },
        "classes": [
            {"name": "TT", "priority": 7, "kind": "TT"},
            {"name": "A", "priority": 6, "kind": "AVB",
             "oper_idle_slope": _rate(oper_idle_slope)},
            {"name": "BE", "priority": 0, "kind": "BE"},
        ],
        "flows": flows,
        "schedules": {
            "hyperperiod": _ns(hyperperiod),
            "ports": {k: {"windows": [[_ns(s), _ns(e)] for s, e in v]}
                      for k, v in sorted(windows.items())},
        },
    }


def medium_mesh(n_avb: int) -> dict:
    if n_avb not in (30, 40, 50, 60):
        raise ValueError("medium-mesh variants exist for 30, 40, 50 and 60 AVB flows")
    switches = [f"SW{i}" for i in range(1, 7)]
    stations = [f"ES{i}" for i in range(1, 13)]
    core = [("SW1", "SW2"), ("SW2", "SW3"), ("SW4", "SW5"), ("SW5", "SW6"),
            ("SW1", "SW4"), ("SW2", "SW5"), ("SW3", "SW6"), ("SW1", "SW5"), ("SW2", "SW6")]
    edge = [(f"ES{i}", f"SW{(i + 1) // 2}") for i in range(1, 13)]
    doc = _build(
        f"medium-mesh-{n_avb}",
        "Medium-Mesh-like approximation: 6 switches, 12 end stations, 100 Mbps, "
        f"15 TT and {n_avb} AVB flows (prefix of the 60-flow set).",
        switches, stations, edge + core, 100_000_000,
        n_tt=15, n_avb=60, hyperperiod=1_000_000, tt_period=1_000_000,
        avb_period=1_000_000, oper_idle_slope=60_000_000, load_fraction=0.9,
        tt_payload=(64, 400), avb_payload=(64, 400), seed=1,
    )
    avb = [f for f in doc["flows"] if f["class"] == "A"][:n_avb]
    doc["flows"] = [f for f in doc["flows"] if f["class"] == "TT"] + avb
    return doc


def orion() -> dict:
    switches = [f"SW{i}" for i in range(1, 16)]
    stations = [f"ES{i}" for i in range(1, 32)]
    # two redundant planes of a ring-and-spoke avionics backbone
    core = [(f"SW{i}", f"SW{i % 8 + 1}") for i in range(1, 9)]
    core += [(f"SW{i}", f"SW{8 + (i + 1) // 2}") for i in range(1, 9)]
    core += [("SW9", "SW15"), ("SW10", "SW15"), ("SW11", "SW15"), ("SW12", "SW15"),
             ("SW13", "SW15"), ("SW14", "SW15"), ("SW13", "SW14")]
    edge = [(f"ES{i}", f"SW{(i - 1) % 14 + 1}") for i in range(1, 32)]
    return _build(
        "orion",
        "Orion-like approximation: 15 switches, 31 end stations, 1 Gbps, "
        "20 TT and 60 AVB flows, reserved AVB rate 750 Mbps.",
        switches, stations, edge + core, 1_000_000_000,
        n_tt=20, n_avb=60, hyperperiod=500_000, tt_period=500_000,
        avb_period=125_000, oper_idle_slope=750_000_000, load_fraction=0.9,
        tt_payload=(64, 1500), avb_payload=(64, 1500), seed=11,
    )


def pathology_123() -> dict:
    """123-byte AVB frames sweep across a TT window on a single port."""
    rate = 100_000_000
    return {
        "format": "tsnsim-scenario",
        "version": 1,
        "name": "pathology-123",
        "description": "Non-preemptable 123-byte AVB frames (below the minimum "
                       "preemptable size) drifting across a TT window, plus a large "
                       "preemptable AVB flow whose fragments meet the window.",
        "defaults": {"duration": "700ms", "seed": 1, "fp": "without-hr"},
        "topology": {
            "link_rate": _rate(rate),
            "cable_length_m": 10,
            "switches": ["SW1"],
            "end_stations": ["ES1", "ES2", "ES3"],
            "links": [["ES1", "SW1"], ["ES2", "SW1"], ["ES3", "SW1"]],
        },
        "classes": [
            {"name": "TT", "priority": 7, "kind": "TT"},
            {"name": "A", "priority": 6, "kind": "AVB", "oper_idle_slope": "80Mbps"},
        ],
        "flows": [
            {"id": "tt1", "class": "TT", "route": ["ES1", "SW1", "ES3"], "payload": 100,
             "period": "1ms", "offset": "0ns"},
            # 101-byte payload -> 123-byte MAC frame; the period is 663 byte
            # times, so over 663 hyperperiods its phase against the window
            # visits every byte boundary
            {"id": "avb1", "class": "A", "route": ["ES2", "SW1", "ES3"], "payload": 101,
             "period": "53040ns", "offset": "0ns"},
            {"id": "avb2", "class": "A", "route": ["ES2", "SW1", "ES3"], "payload": 1000,
             "period": "997us", "offset": "0ns"},
        ],
        "schedules": {
            "hyperperiod": "1ms",
            "ports": {
                "ES1->SW1": {"windows": [["0ns", "25us"]]},
                # the TT frame is fully received at SW1 at 10450 ns (130 byte
                # times + 50 ns of cable) and forwarded 4 us later
                "SW1->ES3": {"windows": [["14450ns", "40us"]]},
            },
        },
    }


def credit_demo() -> dict:
    """One port, one TT window, two AVB frames (credit-trace oracle)."""
    return {
        "format": "tsnsim-scenario",
        "version": 1,
        "name": "credit-demo",
        "description": "Single port at 100 Mbps; a TT window at [500us, 600us) "
                       "and two 1500-byte AVB frames queued before it.",
        "defaults": {"duration": "1ms", "seed": 1},
        "topology": {
            "link_rate": "100Mbps",
            "cable_length_m": 0,
            "switches": [],
            "end_stations": ["ES1", "ES2"],
            "links": [["ES1", "ES2"]],
        },
        "classes": [
            {"name": "TT", "priority": 7, "kind": "TT"},
            {"name": "A", "priority": 6, "kind": "AVB", "oper_idle_slope": "50Mbps"},
        ],
        "flows": [
            {"id": "avb1", "class": "A", "route": ["ES1", "ES2"], "payload": 1500,
             "period": "1ms", "offset": "300us"},
            {"id": "avb2", "class": "A", "route": ["ES1", "ES2"], "payload": 1500,
             "period": "1ms", "offset": "340us"},
        ],
        "schedules": {
            "hyperperiod": "1ms",
            "ports": {"ES1->ES2": {"windows": [["500us", "600us"]]}},
        },
    }


def all_documents() -> dict:
    docs = {f"medium-mesh-{n}": medium_mesh(n) for n in (30, 40, 50, 60)}
    docs["orion"] = orion()
    docs["pathology-123"] = pathology_123()
    docs["credit-demo"] = credit_demo()
    return docs


def write_all(directory=SCENARIO_DIR) -> list:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, doc in all_documents().items():
        scenario = from_dict(doc, f"<{name}>")
        path = directory / f"{name}.yaml"
        path.write_text(dump_scenario(scenario))
        written.append(path)
    return written


if __name__ == "__main__":  # pragma: no cover
    for p in write_all():
        print(p)
