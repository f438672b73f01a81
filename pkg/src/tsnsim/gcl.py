"""Cyclic gate programs, guardband and hold/release windows.

Intervals are half-open ``(start, end)`` pairs in nanoseconds.  Window lists
returned by the public helpers are folded into ``[0, hyperperiod)``; a window
that wraps around the cycle boundary is returned as two pieces.
"""

from __future__ import annotations

import warnings
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum

from .model import ConfigError, LINE_OVERHEAD, MAX_PAYLOAD, line_size, tx_duration

NO_FP_GB_LINE_BYTES = line_size(MAX_PAYLOAD)  # 1542
# largest MAC frame that can never be preempted, in line bytes (123 + 20)
NON_PREEMPTABLE_MAC_BYTES = 123
FP_GB_LINE_BYTES = NON_PREEMPTABLE_MAC_BYTES + LINE_OVERHEAD
PREEMPTION_OVERHEAD_BYTES = 16  # mCRC 4 + IFG 12


class ScheduleWarning(UserWarning):
    """A schedule is valid but degenerate (clipped guardband, merged holds)."""


class FpMode(str, Enum):
    NONE = "none"
    WITHOUT_HR = "without-hr"
    WITH_HR = "with-hr"


@dataclass(frozen=True)
class GclEntry:
    offset: int
    duration: int
    open: frozenset

    @property
    def end(self) -> int:
        return self.offset + self.duration


@dataclass(frozen=True)
class GclSchedule:
    hyperperiod: int
    entries: tuple
    classes: frozenset = field(default=frozenset())

    def __post_init__(self):
        if self.hyperperiod <= 0:
            raise ConfigError("hyperperiod must be positive")
        if not self.entries:
            raise ConfigError("schedule has no entries")
        cursor = 0
        for e in self.entries:
            if e.duration <= 0:
                raise ConfigError(f"entry at {e.offset} ns has non-positive duration")
            if e.offset != cursor:
                kind = "gap" if e.offset > cursor else "overlap"
                raise ConfigError(f"schedule {kind} at {min(cursor, e.offset)} ns")
            cursor = e.end
        if cursor != self.hyperperiod:
            raise ConfigError(
                f"entries cover {cursor} ns but hyperperiod is {self.hyperperiod} ns"
            )
        opened = frozenset().union(*(e.open for e in self.entries))
        if not self.classes:
            object.__setattr__(self, "classes", opened)
        elif not opened <= self.classes:
            raise ConfigError(f"entries open unknown classes {sorted(opened - self.classes)}")

    @classmethod
    def always_open(cls, classes, hyperperiod: int = 1_000_000, closed=()):
        classes = frozenset(classes)
        return cls(hyperperiod, (GclEntry(0, hyperperiod, classes - set(closed)),), classes)

    @classmethod
    def from_windows(cls, hyperperiod, windows, classes, express=("TT",)):
        """Build a schedule where ``express`` classes are open only inside
        ``windows`` and every other class is open only outside them."""
        classes = frozenset(classes)
        express = frozenset(express)
        others = classes - express
        entries = []
        cursor = 0
        for start, end in sorted(windows):
            if start < cursor:
                raise ConfigError(f"window [{start}, {end}) overlaps its predecessor")
            if start > cursor:
                entries.append(GclEntry(cursor, start - cursor, others))
            entries.append(GclEntry(start, end - start, express))
            cursor = end
        if cursor < hyperperiod:
            entries.append(GclEntry(cursor, hyperperiod - cursor, others))
        return cls(hyperperiod, tuple(entries), classes)

    def check_exclusive(self, tt_classes, avb_classes) -> None:
        tt, avb = set(tt_classes), set(avb_classes)
        for e in self.entries:
            if e.open & tt and e.open & avb:
                raise ConfigError(
                    f"TT and AVB gates both open in entry at {e.offset} ns"
                )


@dataclass(frozen=True)
class GuardbandPolicy:
    mode: FpMode = FpMode.NONE
    gb_line_bytes: int = NO_FP_GB_LINE_BYTES
    rate: int = 100_000_000
    # with-hr only
    hold_advance: int | None = None
    express: tuple = ("TT",)

    @classmethod
    def default(cls, mode, rate, *, guardband=True, express=("TT",)):
        mode = FpMode(mode)
        if mode is FpMode.NONE:
            gb = NO_FP_GB_LINE_BYTES
        else:
            gb = FP_GB_LINE_BYTES if guardband else 0
        hold = default_hold_advance(rate) if mode is FpMode.WITH_HR else None
        return cls(mode, gb, rate, hold, tuple(express))

    @property
    def gb_duration(self) -> int:
        return tx_duration(self.gb_line_bytes, self.rate)


def default_hold_advance(rate: int) -> int:
    """Lead time that lets any preemptable transmission finish or be cut."""
    return tx_duration(FP_GB_LINE_BYTES + PREEMPTION_OVERHEAD_BYTES, rate)


def _check_class(schedule: GclSchedule, cls: str) -> None:
    if cls not in schedule.classes:
        raise ConfigError(f"class {cls!r} unknown to this schedule")


def gate_state_at(schedule: GclSchedule, cls: str, t: int) -> bool:
    """True when the gate of ``cls`` is open at ``t``."""
    _check_class(schedule, cls)
    if t < 0:
        raise ValueError("negative time")
    phase = t % schedule.hyperperiod
    offsets = [e.offset for e in schedule.entries]
    entry = schedule.entries[bisect_right(offsets, phase) - 1]
    return cls in entry.open


def _cyclic_runs(schedule: GclSchedule, is_open) -> list:
    """Maximal runs where ``is_open(entry)`` holds, unrolled so that a run
    wrapping the cycle boundary ends beyond the hyperperiod."""
    hp = schedule.hyperperiod
    flags = [bool(is_open(e)) for e in schedule.entries]
    if all(flags):
        return [(0, hp)]
    if not any(flags):
        return []
    runs = []
    start = None
    for e, f in zip(schedule.entries, flags):
        if f and start is None:
            start = e.offset
        elif not f and start is not None:
            runs.append((start, e.offset))
            start = None
    if start is not None:
        if flags[0]:
            # joins the run that begins at offset 0
            first = runs.pop(0)
            runs.append((start, hp + first[1]))
        else:
            runs.append((start, hp))
    return sorted(runs)


def open_intervals(schedule: GclSchedule, cls: str) -> list:
    _check_class(schedule, cls)
    return _cyclic_runs(schedule, lambda e: cls in e.open)


def _fold(windows, hp) -> list:
    out = []
    for s, e in windows:
        if e <= s:
            continue
        shift = (s // hp) * hp
        s, e = s - shift, e - shift
        if e <= hp:
            out.append((s, e))
        else:
            out.append((s, hp))
            out.append((0, e - hp))
    return _merge(sorted(out))


def _merge(windows) -> list:
    merged = []
    for s, e in windows:
        if merged and s <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], e))
        else:
            merged.append((s, e))
    return merged


def _measure(windows) -> int:
    return sum(e - s for s, e in windows)


def guardband_windows(schedule: GclSchedule, policy: GuardbandPolicy, cls: str) -> list:
    """Windows of length ``policy.gb_duration`` ending at each gate close of
    ``cls``, clipped to the open interval they belong to."""
    runs = open_intervals(schedule, cls)
    length = policy.gb_duration
    if length <= 0:
        return []
    windows = []
    for start, end in runs:
        if end - start >= schedule.hyperperiod:
            continue  # never closes
        gb_start = end - length
        if gb_start < start:
            warnings.warn(
                f"guardband of {length} ns exceeds open interval "
                f"[{start}, {end}) of class {cls}; window clipped",
                ScheduleWarning,
                stacklevel=2,
            )
            gb_start = start
        windows.append((gb_start, end))
    return _fold(windows, schedule.hyperperiod)


def express_windows(schedule: GclSchedule, express=("TT",)) -> list:
    express = set(express)
    for name in express:
        _check_class(schedule, name)
    return _cyclic_runs(schedule, lambda e: e.open & express)


def hold_windows(schedule: GclSchedule, hold_advance: int, express=("TT",)) -> list:
    """``(hold_at, release_at)`` pairs: hold asserted ``hold_advance`` before
    each express window opens, released when it ends."""
    hp = schedule.hyperperiod
    runs = express_windows(schedule, express)
    if not runs:
        return []
    if runs == [(0, hp)]:
        return []  # an ungated express class has no windows to protect
    raw = sorted((s - hold_advance, e) for s, e in runs)
    # two unrolled copies so the last window can merge with the next cycle's first
    extended = raw + [(s + hp, e + hp) for s, e in raw]
    merged = _merge(sorted(extended))
    if len(merged) < len(extended):
        warnings.warn(
            f"hold advance {hold_advance} ns merges consecutive express windows",
            ScheduleWarning,
            stacklevel=2,
        )
    folded = _fold(merged, hp)
    if _measure(folded) >= hp:
        return [(0, hp)]
    return folded


def _intersect(a, b) -> list:
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        s = max(a[i][0], b[j][0])
        e = min(a[i][1], b[j][1])
        if s < e:
            out.append((s, e))
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return out


def blocked_windows(schedule, policy, cls, *, preemptable=True) -> list:
    """Open-gate time during which ``cls`` may not start a transmission:
    guardbands plus, under hold/release, the hold pre-windows."""
    hp = schedule.hyperperiod
    blocked = guardband_windows(schedule, policy, cls)
    if policy.mode is FpMode.WITH_HR and preemptable:
        adv = policy.hold_advance if policy.hold_advance is not None else default_hold_advance(policy.rate)
        blocked = _merge(sorted(blocked + hold_windows(schedule, adv, policy.express)))
    opened = _fold(open_intervals(schedule, cls), hp)
    return _intersect(blocked, opened)


def closed_time_and_gb(schedule, policy, cls, *, preemptable=True) -> tuple:
    """Per-cycle ``(T_GateClosed, T_GB)`` for ``cls``."""
    hp = schedule.hyperperiod
    opened = _fold(open_intervals(schedule, cls), hp)
    closed = hp - _measure(opened)
    return closed, _measure(blocked_windows(schedule, policy, cls, preemptable=preemptable))


class _StepFunction:
    """Periodic boolean step function with O(log n) lookup."""

    __slots__ = ("hp", "points", "values")

    def __init__(self, hp, windows):
        self.hp = hp
        points = [0]
        values = [False]
        for s, e in windows:
            if s == points[-1]:
                values[-1] = True
            else:
                points.append(s)
                values.append(True)
            if e < hp:
                points.append(e)
                values.append(False)
        self.points = points
        self.values = values

    def __call__(self, t):
        return self.values[bisect_right(self.points, t % self.hp) - 1]


class PortGating:
    """Precomputed gate/guardband/hold lookups for one egress port."""

    def __init__(self, schedule: GclSchedule, class_policies: dict, preemptable: dict,
                 express=("TT",)):
        self.schedule = schedule
        hp = schedule.hyperperiod
        self.hyperperiod = hp
        self.gate = {}
        self.gb = {}
        self.hold = {}
        self.blocked = {}
        points = {0}
        with_hr = [p for p in class_policies.values() if p.mode is FpMode.WITH_HR]
        hold_w = []
        if with_hr and express and any(n in schedule.classes for n in express):
            policy = with_hr[0]
            adv = policy.hold_advance if policy.hold_advance is not None else default_hold_advance(policy.rate)
            hold_w = hold_windows(schedule, adv, [n for n in express if n in schedule.classes])
        hold_fn = _StepFunction(hp, hold_w)
        for s, e in hold_w:
            points.update((s, e % hp))
        for cls in schedule.classes:
            opened = _fold(open_intervals(schedule, cls), hp)
            self.gate[cls] = _StepFunction(hp, opened)
            for s, e in opened:
                points.update((s, e % hp))
            policy = class_policies.get(cls)
            gbw = []
            blk = []
            if policy is not None:
                gbw = guardband_windows(schedule, policy, cls)
                blk = blocked_windows(schedule, policy, cls, preemptable=preemptable.get(cls, False))
            self.gb[cls] = _StepFunction(hp, gbw)
            self.blocked[cls] = _StepFunction(hp, blk)
            self.hold[cls] = hold_fn if (preemptable.get(cls, False) and hold_w) else None
            for s, e in blk:
                points.update((s, e % hp))
        self.boundaries = sorted(points)
        self.trivial = len(self.boundaries) == 1

    def next_boundary(self, t: int) -> int:
        """Smallest boundary instant strictly after ``t``."""
        hp = self.hyperperiod
        base = t - t % hp
        phase = t - base
        i = bisect_right(self.boundaries, phase)
        if i < len(self.boundaries):
            return base + self.boundaries[i]
        return base + hp + self.boundaries[0]

    def hold_active(self, cls, t) -> bool:
        fn = self.hold.get(cls)
        return fn is not None and fn(t)
