"""Scenario files: parsing, validation and serialization.

A scenario is a YAML key tree with a versioned header::

    format: tsnsim-scenario
    version: 1
    name: ...
    defaults: {credit_mode, fp, guardband, idle_slope_scaling, seed, duration}
    topology: {switch_delay, link_rate, cable_length_m, switches, end_stations, links}
    classes: [{name, priority, kind, preemption, oper_idle_slope}]
    flows: [{id, class, route, payload, period, offset, deadline}]
    schedules: {hyperperiod, ports: {"A->B": {hyperperiod, windows | entries}}}

Times accept integers (ns) or strings such as ``"12.5us"``; rates accept
integers (bit/s) or strings such as ``"100Mbps"``.  See README.md for the
full field reference.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import yaml

from .cbs import AVB_RESERVATION_CAP, CreditMode
from .gcl import FpMode, GclEntry, GclSchedule
from .model import (
    ConfigError,
    Flow,
    Link,
    PreemptionClass,
    Topology,
    TrafficClass,
    TrafficKind,
    format_rate,
    format_time,
    line_size,
    parse_rate,
    parse_time,
    tx_duration,
    wire_size,
)

FORMAT = "tsnsim-scenario"
VERSION = 1
SCALINGS = ("gate-and-guardband", "gate", "none")


class ScenarioError(ConfigError):
    """Invalid scenario; the message carries the file location."""


@dataclass(frozen=True)
class RunConfig:
    credit_mode: CreditMode = CreditMode.NONFROZEN
    fp_mode: FpMode = FpMode.NONE
    guardband: bool = True
    scaling: str = "gate-and-guardband"
    seed: int = 1
    duration: int = 30_000_000_000

    def __post_init__(self):
        object.__setattr__(self, "credit_mode", CreditMode(self.credit_mode))
        object.__setattr__(self, "fp_mode", FpMode(self.fp_mode))
        if self.scaling not in SCALINGS:
            raise ConfigError(f"unknown idle-slope scaling {self.scaling!r}")
        if self.duration < 0:
            raise ConfigError("duration must be non-negative")

    def replace(self, **changes) -> "RunConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return dataclasses.replace(self, **changes)

    @property
    def label(self) -> str:
        gb = "" if self.guardband else "/gb-off"
        return f"{self.credit_mode.value}/{self.fp_mode.value}{gb}/seed{self.seed}"


@dataclass
class Scenario:
    name: str
    topology: Topology
    classes: tuple
    flows: tuple
    schedules: dict
    defaults: RunConfig = field(default_factory=RunConfig)
    description: str = ""
    warnings: list = field(default_factory=list, compare=False)

    def traffic_class(self, name) -> TrafficClass:
        for c in self.classes:
            if c.name == name:
                return c
        raise KeyError(name)

    def port_keys(self) -> list:
        """Directed links used by at least one flow, in first-use order."""
        seen = {}
        for f in self.flows:
            for a, b in zip(f.route, f.route[1:]):
                seen.setdefault(f"{a}->{b}", None)
        return list(seen)

    def schedule_for(self, key: str) -> GclSchedule:
        sched = self.schedules.get(key)
        if sched is not None:
            return sched
        names = {c.name for c in self.classes}
        tt = {c.name for c in self.classes if c.kind is TrafficKind.TT}
        return GclSchedule.always_open(names, closed=tt)


# -- YAML loading with line numbers --------------------------------------

class _Map(dict):
    line = 0
    lines: dict = {}


class _Seq(list):
    line = 0
    lines: list = []


class _Loader(yaml.SafeLoader):
    pass


def _construct_map(loader, node):
    loader.flatten_mapping(node)
    out = _Map()
    out.line = node.start_mark.line + 1
    out.lines = {}
    for key_node, value_node in node.value:
        key = loader.construct_object(key_node, deep=True)
        out[key] = loader.construct_object(value_node, deep=True)
        out.lines[key] = key_node.start_mark.line + 1
    return out


def _construct_seq(loader, node):
    out = _Seq(loader.construct_object(n, deep=True) for n in node.value)
    out.line = node.start_mark.line + 1
    out.lines = [n.start_mark.line + 1 for n in node.value]
    return out


_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_map)
_Loader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_SEQUENCE_TAG, _construct_seq)


class _Ctx:
    """Location tracker producing ``file:line: key.path: message`` errors."""

    def __init__(self, source):
        self.source = source

    def error(self, node, key, path, msg):
        line = None
        if isinstance(node, _Map) and key in node.lines:
            line = node.lines[key]
        elif isinstance(node, _Seq) and isinstance(key, int) and key < len(node.lines):
            line = node.lines[key]
        elif isinstance(node, (_Map, _Seq)):
            line = node.line
        where = f"{self.source}:{line}" if line else str(self.source)
        return ScenarioError(f"{where}: {path}: {msg}")

    def get(self, node, key, path, *, required=True, default=None, conv=None):
        if not isinstance(node, dict):
            raise self.error(node, None, path, "expected a mapping")
        if key not in node:
            if required:
                raise self.error(node, None, f"{path}.{key}" if path else key,
                                 "missing required field")
            return default
        value = node[key]
        if conv is None:
            return value
        try:
            return conv(value)
        except (ConfigError, ValueError, TypeError) as exc:
            raise self.error(node, key, f"{path}.{key}" if path else key, str(exc)) from None


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    if str(value).lower() in ("on", "true", "yes", "1"):
        return True
    if str(value).lower() in ("off", "false", "no", "0"):
        return False
    raise ValueError(f"expected on/off, got {value!r}")


def _as_list(value):
    if not isinstance(value, list):
        raise ValueError(f"expected a list, got {type(value).__name__}")
    return value


def parse_scenario(path) -> Scenario:
    """Load and fully validate a scenario file (or a bundled scenario name)."""
    path = resolve_path(path)
    text = Path(path).read_text()
    return parse_text(text, source=str(path))


def parse_text(text: str, source="<string>") -> Scenario:
    try:
        doc = yaml.load(text, Loader=_Loader)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{source}: malformed YAML: {exc}") from None
    return from_dict(doc, source)


def from_dict(doc, source="<dict>") -> Scenario:
    ctx = _Ctx(source)
    if not isinstance(doc, dict):
        raise ScenarioError(f"{source}: top level must be a mapping")
    fmt = ctx.get(doc, "format", "")
    if fmt != FORMAT:
        raise ctx.error(doc, "format", "format", f"expected {FORMAT!r}, got {fmt!r}")
    version = ctx.get(doc, "version", "")
    if version != VERSION:
        raise ctx.error(doc, "version", "version", f"unsupported version {version!r}")
    name = str(ctx.get(doc, "name", ""))
    description = str(ctx.get(doc, "description", "", required=False, default=""))

    defaults = _parse_defaults(ctx, doc.get("defaults") or _Map(), doc)
    topology, link_rates = _parse_topology(ctx, ctx.get(doc, "topology", ""))
    classes = _parse_classes(ctx, ctx.get(doc, "classes", "", conv=_as_list), link_rates)
    flows = _parse_flows(ctx, ctx.get(doc, "flows", "", conv=_as_list), topology, classes)
    schedules = _parse_schedules(ctx, doc.get("schedules") or _Map(), topology, classes)

    scenario = Scenario(name, topology, tuple(classes), tuple(flows), schedules,
                        defaults, description)
    _check_tt_feasibility(ctx, doc, scenario)
    return scenario


def _parse_defaults(ctx, node, doc) -> RunConfig:
    kw = {}
    if "credit_mode" in node:
        kw["credit_mode"] = ctx.get(node, "credit_mode", "defaults", conv=CreditMode)
    if "fp" in node:
        kw["fp_mode"] = ctx.get(node, "fp", "defaults", conv=FpMode)
    if "guardband" in node:
        kw["guardband"] = ctx.get(node, "guardband", "defaults", conv=_as_bool)
    if "idle_slope_scaling" in node:
        kw["scaling"] = ctx.get(node, "idle_slope_scaling", "defaults",
                                conv=lambda v: v if v in SCALINGS else _bad(v, SCALINGS))
    if "seed" in node:
        kw["seed"] = ctx.get(node, "seed", "defaults", conv=int)
    if "duration" in node:
        kw["duration"] = ctx.get(node, "duration", "defaults", conv=parse_time)
    return RunConfig(**kw)


def _bad(value, allowed):
    raise ValueError(f"{value!r} not one of {', '.join(allowed)}")


def _parse_topology(ctx, node):
    path = "topology"
    switch_delay = ctx.get(node, "switch_delay", path, required=False, default=4000,
                           conv=parse_time)
    default_rate = ctx.get(node, "link_rate", path, required=False, default=100_000_000,
                           conv=parse_rate)
    default_len = ctx.get(node, "cable_length_m", path, required=False, default=10,
                          conv=float)
    switches = [str(s) for s in ctx.get(node, "switches", path, conv=_as_list)]
    stations = [str(s) for s in ctx.get(node, "end_stations", path, conv=_as_list)]
    links_node = ctx.get(node, "links", path, conv=_as_list)
    links = []
    rates = []
    for i, item in enumerate(links_node):
        lp = f"{path}.links[{i}]"
        if isinstance(item, list):
            ends, rate, length = item, default_rate, default_len
        else:
            ends = ctx.get(item, "nodes", lp, conv=_as_list)
            rate = ctx.get(item, "rate", lp, required=False, default=default_rate,
                           conv=parse_rate)
            length = ctx.get(item, "length_m", lp, required=False, default=default_len,
                             conv=float)
        if len(ends) != 2:
            raise ctx.error(links_node, i, lp, "a link joins exactly two nodes")
        links.append(Link(str(ends[0]), str(ends[1]), rate, length))
        rates.append(rate)
    try:
        topo = Topology(tuple(switches), tuple(stations), tuple(links), switch_delay)
    except ConfigError as exc:
        raise ctx.error(node, "links", f"{path}.links", str(exc)) from None
    return topo, rates


def _parse_classes(ctx, node, link_rates):
    classes = []
    names = set()
    prios = set()
    for i, item in enumerate(node):
        p = f"classes[{i}]"
        name = str(ctx.get(item, "name", p))
        if name in names:
            raise ctx.error(node, i, p, f"duplicate class {name!r}")
        prio = ctx.get(item, "priority", p, conv=int)
        if prio in prios:
            raise ctx.error(item, "priority", f"{p}.priority", f"duplicate priority {prio}")
        kind = ctx.get(item, "kind", p, conv=TrafficKind)
        default_pre = "express" if kind is TrafficKind.TT else "preemptable"
        pre = ctx.get(item, "preemption", p, required=False, default=default_pre,
                      conv=PreemptionClass)
        pre = PreemptionClass(pre)
        oper = ctx.get(item, "oper_idle_slope", p, required=False, conv=parse_rate)
        if kind is TrafficKind.AVB and oper is None:
            raise ctx.error(item, None, f"{p}.oper_idle_slope", "AVB classes need a reservation")
        if kind is not TrafficKind.AVB and oper is not None:
            raise ctx.error(item, "oper_idle_slope", f"{p}.oper_idle_slope",
                            "only AVB classes are credit-shaped")
        if kind is TrafficKind.TT and pre is not PreemptionClass.EXPRESS:
            raise ctx.error(item, "preemption", f"{p}.preemption", "TT classes are express")
        names.add(name)
        prios.add(prio)
        classes.append(TrafficClass(name, prio, kind, pre, oper))
    reserved = sum(c.oper_idle_slope for c in classes if c.oper_idle_slope)
    for rate in set(link_rates):
        if reserved > AVB_RESERVATION_CAP * rate:
            raise ctx.error(node, None, "classes",
                            f"AVB reservation {format_rate(reserved)} exceeds the 85% cap "
                            f"of a {format_rate(rate)} port ({format_rate(int(AVB_RESERVATION_CAP * rate))})")
    return classes


def _parse_flows(ctx, node, topology, classes):
    by_name = {c.name: c for c in classes}
    flows = []
    ids = set()
    for i, item in enumerate(node):
        p = f"flows[{i}]"
        fid = str(ctx.get(item, "id", p))
        if fid in ids:
            raise ctx.error(node, i, p, f"duplicate flow id {fid!r}")
        ids.add(fid)
        cls = str(ctx.get(item, "class", p))
        if cls not in by_name:
            raise ctx.error(item, "class", f"{p}.class", f"unknown class {cls!r}")
        route = ctx.get(item, "route", p)
        if route == "auto":
            src = str(ctx.get(item, "source", p))
            dst = str(ctx.get(item, "destination", p))
            for n in (src, dst):
                if n not in topology.end_stations:
                    raise ctx.error(item, "route", f"{p}.route", f"unknown end station {n!r}")
            route = topology.shortest_path(src, dst)
        else:
            route = tuple(str(n) for n in _as_list(route))
        for j, n in enumerate(route):
            if n not in topology.nodes:
                raise ctx.error(item, "route", f"{p}.route[{j}]", f"unknown node {n!r}")
        try:
            topology.check_route(route)
        except ConfigError as exc:
            raise ctx.error(item, "route", f"{p}.route", str(exc)) from None
        if route[0] not in topology.end_stations or route[-1] not in topology.end_stations:
            raise ctx.error(item, "route", f"{p}.route", "flows start and end at end stations")
        payload = ctx.get(item, "payload", p, conv=int)
        try:
            wire_size(payload)
        except ConfigError as exc:
            raise ctx.error(item, "payload", f"{p}.payload", str(exc)) from None
        period = ctx.get(item, "period", p, conv=parse_time)
        if period <= 0:
            raise ctx.error(item, "period", f"{p}.period", "period must be positive")
        offset = ctx.get(item, "offset", p, required=False, conv=parse_time)
        if offset is not None and not 0 <= offset < period:
            raise ctx.error(item, "offset", f"{p}.offset", "offset must lie in [0, period)")
        deadline = ctx.get(item, "deadline", p, required=False, conv=parse_time)
        flows.append(Flow(fid, cls, route, payload, period, offset, deadline))
    return flows


def _parse_schedules(ctx, node, topology, classes):
    names = frozenset(c.name for c in classes)
    tt = [c.name for c in classes if c.kind is TrafficKind.TT]
    avb = [c.name for c in classes if c.kind is TrafficKind.AVB]
    default_hp = ctx.get(node, "hyperperiod", "schedules", required=False,
                         default=1_000_000, conv=parse_time)
    ports = node.get("ports") or _Map()
    out = {}
    for key, spec in ports.items():
        p = f"schedules.ports.{key}"
        parts = str(key).split("->")
        if len(parts) != 2:
            raise ctx.error(ports, key, p, "port keys look like 'A->B'")
        a, b = (s.strip() for s in parts)
        try:
            topology.link(a, b)
        except ConfigError as exc:
            raise ctx.error(ports, key, p, str(exc)) from None
        hp = ctx.get(spec, "hyperperiod", p, required=False, default=default_hp,
                     conv=parse_time)
        strict = ctx.get(spec, "strict", p, required=False, default=True, conv=_as_bool)
        try:
            if "windows" in spec:
                windows = []
                for j, w in enumerate(_as_list(spec["windows"])):
                    if not isinstance(w, list) or len(w) != 2:
                        raise ctx.error(spec["windows"], j, f"{p}.windows[{j}]",
                                        "a window is [start, end]")
                    windows.append((parse_time(w[0]), parse_time(w[1])))
                sched = GclSchedule.from_windows(hp, windows, names, express=tt)
            else:
                entries = []
                elist = ctx.get(spec, "entries", p, conv=_as_list)
                cursor = 0
                for j, e in enumerate(elist):
                    ep = f"{p}.entries[{j}]"
                    off = ctx.get(e, "offset", ep, required=False, default=cursor,
                                  conv=parse_time)
                    dur = ctx.get(e, "duration", ep, conv=parse_time)
                    opened = frozenset(str(x) for x in ctx.get(e, "open", ep, conv=_as_list))
                    unknown = opened - names
                    if unknown:
                        raise ctx.error(e, "open", f"{ep}.open",
                                        f"unknown class {sorted(unknown)[0]!r}")
                    entries.append(GclEntry(off, dur, opened))
                    cursor = off + dur
                sched = GclSchedule(hp, tuple(entries), names)
            if strict:
                sched.check_exclusive(tt, avb)
        except ConfigError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ctx.error(ports, key, p, str(exc)) from None
        out[f"{a}->{b}"] = sched
    return out


def _check_tt_feasibility(ctx, doc, scenario: Scenario) -> None:
    """Every port on a TT route needs TT gate time for the TT load it carries."""
    tt = {c.name for c in scenario.classes if c.kind is TrafficKind.TT}
    demand: dict[str, list] = {}
    for f in scenario.flows:
        if f.traffic_class not in tt:
            continue
        for a, b in zip(f.route, f.route[1:]):
            demand.setdefault(f"{a}->{b}", []).append(f)
    for key, flows in demand.items():
        sched = scenario.schedule_for(key)
        a, b = key.split("->")
        rate = scenario.topology.link(a, b).rate
        hp = sched.hyperperiod
        open_time = sum(e.duration for e in sched.entries if e.open & tt)
        if open_time == 0:
            raise ScenarioError(f"{ctx.source}: schedules.ports.{key}: port carries TT "
                                f"flow {flows[0].id} but never opens a TT gate")
        need = sum(
            tx_duration(line_size(f.payload_bytes), rate) * Fraction(hp, f.period)
            for f in flows
        )
        if need > open_time:
            raise ScenarioError(f"{ctx.source}: schedules.ports.{key}: TT load needs "
                                f"{float(need):.0f} ns per cycle but gates are open "
                                f"{open_time} ns")
        longest = max(e.duration for e in sched.entries if e.open & tt)
        biggest = max(tx_duration(line_size(f.payload_bytes), rate) for f in flows)
        if biggest > longest:
            scenario.warnings.append(
                f"{key}: largest TT frame ({biggest} ns) exceeds every TT window")


# -- serialization -------------------------------------------------------

def _schedule_windows(sched: GclSchedule, tt, names):
    """Express windows if ``sched`` is exactly a windows-style schedule."""
    windows = [(e.offset, e.end) for e in sched.entries if e.open == frozenset(tt)]
    try:
        rebuilt = GclSchedule.from_windows(sched.hyperperiod, windows, names, express=tt)
    except ConfigError:
        return None
    return windows if rebuilt == sched else None


def to_dict(scenario: Scenario) -> dict:
    d = scenario.defaults
    topo = scenario.topology
    names = frozenset(c.name for c in scenario.classes)
    tt = [c.name for c in scenario.classes if c.kind is TrafficKind.TT]
    links = []
    for link in topo.links:
        links.append({"nodes": [link.a, link.b], "rate": format_rate(link.rate),
                      "length_m": _plain_number(link.length_m)})
    classes = []
    for c in scenario.classes:
        entry = {"name": c.name, "priority": c.priority, "kind": c.kind.value,
                 "preemption": c.preemption.value}
        if c.oper_idle_slope is not None:
            entry["oper_idle_slope"] = format_rate(c.oper_idle_slope)
        classes.append(entry)
    flows = []
    for f in scenario.flows:
        entry = {"id": f.id, "class": f.traffic_class, "route": list(f.route),
                 "payload": f.payload_bytes, "period": format_time(f.period)}
        if f.offset is not None:
            entry["offset"] = format_time(f.offset)
        if f.deadline is not None:
            entry["deadline"] = format_time(f.deadline)
        flows.append(entry)
    ports = {}
    for key, sched in scenario.schedules.items():
        spec = {"hyperperiod": format_time(sched.hyperperiod)}
        windows = _schedule_windows(sched, tt, names)
        if windows is not None:
            spec["windows"] = [[format_time(s), format_time(e)] for s, e in windows]
        else:
            spec["entries"] = [
                {"offset": format_time(e.offset), "duration": format_time(e.duration),
                 "open": sorted(e.open)} for e in sched.entries
            ]
        ports[key] = spec
    return {
        "format": FORMAT,
        "version": VERSION,
        "name": scenario.name,
        "description": scenario.description,
        "defaults": {
            "credit_mode": d.credit_mode.value,
            "fp": d.fp_mode.value,
            "guardband": "on" if d.guardband else "off",
            "idle_slope_scaling": d.scaling,
            "seed": d.seed,
            "duration": format_time(d.duration),
        },
        "topology": {
            "switch_delay": format_time(topo.switch_delay),
            "switches": list(topo.switches),
            "end_stations": list(topo.end_stations),
            "links": links,
        },
        "classes": classes,
        "flows": flows,
        "schedules": {"ports": ports},
    }


class _Dumper(yaml.SafeDumper):
    pass


def _flow_list(dumper, data):
    flow = len(data) <= 4 and all(not isinstance(x, (dict, list)) for x in data)
    return dumper.represent_sequence("tag:yaml.org,2002:seq", data, flow_style=flow)


_Dumper.add_representer(list, _flow_list)


def dump_scenario(scenario: Scenario) -> str:
    return yaml.dump(to_dict(scenario), Dumper=_Dumper, sort_keys=False, width=100)


def write_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(dump_scenario(scenario))


# -- bundled scenarios ---------------------------------------------------

def bundled_names() -> list:
    root = resources.files("tsnsim") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def resolve_path(path):
    p = Path(path)
    if p.exists():
        return p
    candidate = resources.files("tsnsim") / "scenarios" / f"{path}.yaml"
    if candidate.is_file():
        return Path(str(candidate))
    raise ScenarioError(f"{path}: no such file or bundled scenario "
                        f"(bundled: {', '.join(bundled_names())})")


def load_bundled(name: str) -> Scenario:
    return parse_scenario(resolve_path(name))


def collect_warnings(scenario: Scenario, config: RunConfig | None = None) -> list:
    """Build every port (under each FP mode unless one is given) and gather
    schedule warnings and configuration errors."""
    from .network import build_ports_config

    modes = [config.fp_mode] if config else list(FpMode)
    found = list(scenario.warnings)
    for mode in modes:
        cfg = (config or scenario.defaults).replace(fp_mode=mode)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            build_ports_config(scenario, cfg)
        for w in caught:
            msg = f"[fp={mode.value}] {w.message}"
            if msg not in found:
                found.append(msg)
    return found


def _plain_number(x):
    """Write whole floats as integers so dumps are stable across round trips."""
    return int(x) if float(x).is_integer() else x
