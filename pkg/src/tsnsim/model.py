"""Domain types and framing arithmetic shared by the simulator.

All time values are integer nanoseconds.  Rates are integer bits per second
and restricted to the two link speeds the simulator models exactly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum

MIN_PAYLOAD = 64
MAX_PAYLOAD = 1500

MAC_OVERHEAD = 22  # header 14 + VLAN tag 4 + FCS 4
PREAMBLE_SFD = 8
IFG = 12
LINE_OVERHEAD = PREAMBLE_SFD + IFG

NS_PER_M = 5
SUPPORTED_RATES = (100_000_000, 1_000_000_000)


class ConfigError(ValueError):
    """Raised for invalid scenario or component configuration."""


class TrafficKind(str, Enum):
    TT = "TT"
    AVB = "AVB"
    BE = "BE"


class PreemptionClass(str, Enum):
    EXPRESS = "express"
    PREEMPTABLE = "preemptable"


def wire_size(payload_bytes: int) -> int:
    """MAC frame size (header, VLAN tag and FCS included) for a payload."""
    if not MIN_PAYLOAD <= payload_bytes <= MAX_PAYLOAD:
        raise ConfigError(
            f"payload {payload_bytes} B outside [{MIN_PAYLOAD}, {MAX_PAYLOAD}]"
        )
    return payload_bytes + MAC_OVERHEAD


def line_size(payload_bytes: int) -> int:
    """Bytes of line occupancy: MAC frame plus preamble/SFD and IFG."""
    return wire_size(payload_bytes) + LINE_OVERHEAD


def byte_time(rate: int) -> int:
    if rate not in SUPPORTED_RATES:
        raise ConfigError(f"unsupported link rate {rate} bit/s")
    return 8_000_000_000 // rate


def tx_duration(line_bytes: int, rate: int) -> int:
    return line_bytes * byte_time(rate)


def propagation_delay(length_m: float) -> int:
    if length_m < 0:
        raise ConfigError(f"negative cable length {length_m}")
    return int(round(length_m * NS_PER_M))


_TIME_UNITS = {"ns": 1, "us": 1_000, "ms": 1_000_000, "s": 1_000_000_000}
_RATE_UNITS = {"bps": 1, "kbps": 1_000, "mbps": 1_000_000, "gbps": 1_000_000_000}
_QTY = re.compile(r"^\s*([0-9]*\.?[0-9]+)\s*([a-zA-Z]*)\s*$")


def _parse_quantity(value, units: dict[str, int], default_unit: str) -> int:
    if isinstance(value, bool):
        raise ConfigError(f"expected a quantity, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if not value.is_integer():
            raise ConfigError(f"non-integer base quantity {value!r}")
        return int(value)
    m = _QTY.match(str(value))
    if not m:
        raise ConfigError(f"cannot parse quantity {value!r}")
    number, unit = m.groups()
    unit = (unit or default_unit).lower()
    if unit not in units:
        raise ConfigError(f"unknown unit {unit!r} in {value!r}")
    scaled = float(number) * units[unit]
    # decimal literals like 0.1ms are exact after rounding to the base unit
    result = round(scaled)
    if abs(result - scaled) > 1e-6 * max(1.0, abs(scaled)):
        raise ConfigError(f"{value!r} is not a whole number of base units")
    return int(result)


def parse_time(value) -> int:
    """Parse ``"500us"``-style strings (or bare integers in ns) to ns."""
    return _parse_quantity(value, _TIME_UNITS, "ns")


def parse_rate(value) -> int:
    return _parse_quantity(value, _RATE_UNITS, "bps")


def format_time(ns: int) -> str:
    for unit, scale in (("s", 10**9), ("ms", 10**6), ("us", 10**3)):
        if ns and ns % scale == 0:
            return f"{ns // scale}{unit}"
    return f"{ns}ns"


def format_rate(bps: int) -> str:
    for unit, scale in (("Gbps", 10**9), ("Mbps", 10**6), ("kbps", 10**3)):
        if bps and bps % scale == 0:
            return f"{bps // scale}{unit}"
    return f"{bps}bps"


@dataclass(frozen=True)
class TrafficClass:
    name: str
    priority: int
    kind: TrafficKind
    preemption: PreemptionClass = PreemptionClass.PREEMPTABLE
    # reserved bandwidth before gate-time scaling; AVB classes only
    oper_idle_slope: int | None = None

    @property
    def cbs_enabled(self) -> bool:
        return self.kind is TrafficKind.AVB

    @property
    def express(self) -> bool:
        return self.preemption is PreemptionClass.EXPRESS


@dataclass(frozen=True)
class Flow:
    id: str
    traffic_class: str
    route: tuple[str, ...]
    payload_bytes: int
    period: int
    # None means "draw uniformly in [0, period) from the run seed"
    offset: int | None = None
    deadline: int | None = None

    @property
    def source(self) -> str:
        return self.route[0]

    @property
    def destination(self) -> str:
        return self.route[-1]

    @property
    def mac_bytes(self) -> int:
        return wire_size(self.payload_bytes)


@dataclass(frozen=True)
class Link:
    a: str
    b: str
    rate: int
    length_m: float = 10.0

    @property
    def propagation(self) -> int:
        return propagation_delay(self.length_m)


@dataclass
class Topology:
    switches: tuple[str, ...]
    end_stations: tuple[str, ...]
    links: tuple[Link, ...]
    switch_delay: int = 4_000
    _adj: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        names = list(self.switches) + list(self.end_stations)
        if len(set(names)) != len(names):
            raise ConfigError("duplicate node names in topology")
        known = set(names)
        adj: dict[str, dict[str, Link]] = {n: {} for n in names}
        for link in self.links:
            for end in (link.a, link.b):
                if end not in known:
                    raise ConfigError(f"link references unknown node {end!r}")
            if link.a == link.b:
                raise ConfigError(f"self-loop link on {link.a!r}")
            if link.b in adj[link.a]:
                raise ConfigError(f"duplicate link {link.a}-{link.b}")
            byte_time(link.rate)
            adj[link.a][link.b] = link
            adj[link.b][link.a] = link
        self._adj = adj

    @property
    def nodes(self) -> tuple[str, ...]:
        return self.switches + self.end_stations

    def is_switch(self, node: str) -> bool:
        return node in self.switches

    def neighbors(self, node: str) -> dict[str, Link]:
        return self._adj[node]

    def link(self, a: str, b: str) -> Link:
        try:
            return self._adj[a][b]
        except KeyError:
            raise ConfigError(f"no link between {a!r} and {b!r}") from None

    def check_route(self, route) -> None:
        if len(route) < 2:
            raise ConfigError(f"route {route!r} needs at least two nodes")
        if len(set(route)) != len(route):
            raise ConfigError(f"route {list(route)} is not a simple path")
        for node in route:
            if node not in self._adj:
                raise ConfigError(f"route references unknown node {node!r}")
        for a, b in zip(route, route[1:]):
            self.link(a, b)

    def shortest_path(self, src: str, dst: str) -> tuple[str, ...]:
        """BFS path; neighbours are visited in sorted order for determinism."""
        prev = {src: None}
        frontier = [src]
        while frontier:
            nxt = []
            for node in frontier:
                for nb in sorted(self._adj[node]):
                    if nb in prev:
                        continue
                    if nb != dst and nb not in self.switches:
                        continue
                    prev[nb] = node
                    nxt.append(nb)
            frontier = nxt
        if dst not in prev:
            raise ConfigError(f"no path from {src} to {dst}")
        path = [dst]
        while path[-1] != src:
            path.append(prev[path[-1]])
        return tuple(reversed(path))


class Frame:
    """One instance of a flow on the wire."""

    __slots__ = ("flow", "seq", "mac_bytes", "created", "hops")

    def __init__(self, flow: Flow, seq: int, created: int):
        self.flow = flow
        self.seq = seq
        self.mac_bytes = flow.mac_bytes
        self.created = created
        self.hops: list[int] = []

    @property
    def data_bytes(self) -> int:
        # frame bytes excluding the trailing FCS
        return self.mac_bytes - 4

    def __repr__(self):
        return f"Frame({self.flow.id}#{self.seq})"


@dataclass(frozen=True)
class Fragment:
    frame: object
    index: int
    offset: int  # first frame byte carried
    data_bytes: int
    is_final: bool

    @property
    def on_wire_bytes(self) -> int:
        # mCRC on non-final fragments, the original FCS on the final one
        return self.data_bytes + 4

    @property
    def line_bytes(self) -> int:
        return self.on_wire_bytes + LINE_OVERHEAD
