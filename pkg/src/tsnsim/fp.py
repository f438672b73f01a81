"""Express/preemptable merge sublayer: fragment rules, cut points, reassembly.

Byte accounting: a frame of ``M`` MAC bytes carries ``M - 4`` data bytes plus
its FCS.  Every fragment closes with a 4-byte check sequence (mCRC for
non-final fragments, the original FCS for the last one), so a fragment with
``d`` data bytes occupies ``d + 4`` wire bytes and ``d + 24`` line bytes.
"""

from __future__ import annotations

from dataclasses import dataclass

from .gcl import FpMode, PREEMPTION_OVERHEAD_BYTES
from .model import Fragment, IFG, PREAMBLE_SFD, tx_duration

MIN_FRAGMENT_WIRE_BYTES = 64
MIN_FRAGMENT_DATA = MIN_FRAGMENT_WIRE_BYTES - 4  # 60
MIN_PREEMPTABLE_FRAME_BYTES = 124


class ReassemblyError(RuntimeError):
    pass


@dataclass(frozen=True)
class PreemptionConfig:
    enabled: bool = False
    hr_mode: FpMode = FpMode.NONE
    t_delay_fp_bytes: int = PREEMPTION_OVERHEAD_BYTES
    min_fragment_wire_bytes: int = MIN_FRAGMENT_WIRE_BYTES
    min_preemptable_frame_bytes: int = MIN_PREEMPTABLE_FRAME_BYTES

    @classmethod
    def for_mode(cls, mode) -> "PreemptionConfig":
        mode = FpMode(mode)
        return cls(enabled=mode is not FpMode.NONE, hr_mode=mode)

    def t_delay_fp(self, rate: int) -> int:
        return tx_duration(self.t_delay_fp_bytes, rate)


def can_cut(unit_data: int, sent: int) -> bool:
    """Whether a unit carrying ``unit_data`` data bytes may be cut after
    ``sent`` of them: both resulting pieces need >= 60 data bytes."""
    return sent >= MIN_FRAGMENT_DATA and unit_data - sent >= MIN_FRAGMENT_DATA


def can_preempt(frame_mac_bytes: int, bytes_already_sent: int) -> bool:
    if not 0 <= bytes_already_sent < frame_mac_bytes:
        raise ValueError("bytes_already_sent out of range")
    if frame_mac_bytes < MIN_PREEMPTABLE_FRAME_BYTES:
        return False
    return can_cut(frame_mac_bytes - 4, bytes_already_sent)


class Transmission:
    """One unit (whole frame or fragment) occupying the line."""

    __slots__ = ("frame", "cls", "index", "offset", "data", "start", "bt",
                 "sent", "final", "preemptable", "cut_checked", "token")

    def __init__(self, frame, cls, index, offset, start, bt, preemptable):
        self.frame = frame
        self.cls = cls
        self.index = index
        self.offset = offset
        self.data = frame.data_bytes - offset
        self.start = start
        self.bt = bt
        self.sent = self.data
        self.final = True
        self.preemptable = preemptable
        self.cut_checked = False
        self.token = 0

    @property
    def end(self) -> int:
        return self.start + (PREAMBLE_SFD + self.sent + 4 + IFG) * self.bt

    @property
    def data_end(self) -> int:
        """Instant the last check-sequence byte leaves the port."""
        return self.start + (PREAMBLE_SFD + self.sent + 4) * self.bt

    def sent_at(self, t: int) -> int:
        n = (t - self.start) // self.bt - PREAMBLE_SFD
        return min(max(n, 0), self.sent)

    def cut_point(self, t: int):
        """Earliest byte-aligned instant >= t at which this unit can be cut,
        as ``(instant, data bytes sent)``, or None if it must complete."""
        if not self.preemptable or not self.final:
            return None
        bt = self.bt
        steps = -(-(t - self.start) // bt)  # ceil
        sent = max(steps - PREAMBLE_SFD, MIN_FRAGMENT_DATA)
        if not can_cut(self.data, sent):
            return None
        return self.start + (PREAMBLE_SFD + sent) * bt, sent

    def cut(self, sent: int) -> None:
        self.sent = sent
        self.final = False
        self.token += 1

    def fragment(self) -> Fragment:
        return Fragment(self.frame, self.index, self.offset, self.sent, self.final)


@dataclass
class Remainder:
    frame: object
    cls: str
    offset: int
    index: int

    @property
    def data(self) -> int:
        return self.frame.data_bytes - self.offset


class MergeState:
    """In-flight unit and the (at most one) preempted remainder of a port."""

    __slots__ = ("in_flight", "held", "pending_resume")

    def __init__(self):
        self.in_flight: Transmission | None = None
        self.held = False
        self.pending_resume: Remainder | None = None

    def preempt(self, t: int):
        """Request a cut of the in-flight unit at the first legal point
        >= t.  Returns ``(cut instant, closed fragment, remainder)`` or None
        when the unit must finish (or nothing is in flight)."""
        tx = self.in_flight
        if tx is None:
            return None
        point = tx.cut_point(t)
        if point is None:
            return None
        at, sent = point
        tx.cut(sent)
        rem = Remainder(tx.frame, tx.cls, tx.offset + sent, tx.index + 1)
        self.pending_resume = rem
        return at, tx.fragment(), rem

    def resume(self, t: int, bt: int, preemptable: bool = True) -> Transmission:
        """Start the continuation of the preempted frame."""
        rem = self.pending_resume
        if rem is None:
            raise RuntimeError("resume called with no preempted frame pending")
        self.pending_resume = None
        return Transmission(rem.frame, rem.cls, rem.index, rem.offset, t, bt, preemptable)


def reassemble(fragments):
    """Rebuild a frame from its fragments (in order); returns the frame."""
    if not fragments:
        raise ReassemblyError("no fragments")
    frame = fragments[0].frame
    offset = 0
    for i, frag in enumerate(fragments):
        if frag.frame is not frame:
            raise ReassemblyError("fragments from different frames")
        if frag.index != i or frag.offset != offset:
            raise ReassemblyError(f"fragment {frag.index} out of order (expected {i})")
        if frag.is_final != (i == len(fragments) - 1):
            raise ReassemblyError("final fragment missing or misplaced")
        offset += frag.data_bytes
    if offset != frame.data_bytes:
        raise ReassemblyError(f"reassembled {offset} of {frame.data_bytes} data bytes")
    return frame
