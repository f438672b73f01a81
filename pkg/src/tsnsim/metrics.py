"""Per-flow delay/jitter accumulation and CSV/summary emission."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

from .cbs import NANOBITS_PER_BIT

KPI_COLUMNS = ("flow_id", "class", "kind", "smd_ns", "smj_ns", "samples")
TRACE_COLUMNS = (
    "time_ns", "port", "class", "credit_nanobits", "credit_bits", "slope_bps",
    "capped", "regime", "tt_gate", "avb_gate", "gb_active", "hold_active",
    "backlog_frames", "backlog_bytes",
)


class FlowStats:
    """End-to-end delay samples of one flow, keyed by sequence number."""

    __slots__ = ("flow_id", "traffic_class", "kind", "_samples", "_sorted")

    def __init__(self, flow_id, traffic_class="", kind=""):
        self.flow_id = flow_id
        self.traffic_class = traffic_class
        self.kind = kind
        self._samples: dict[int, int] = {}
        self._sorted = True

    def record_delivery(self, seq: int, send_t: int, recv_t: int) -> None:
        delay = recv_t - send_t
        if delay < 0:
            raise RuntimeError(
                f"flow {self.flow_id} frame {seq}: received before sent ({recv_t} < {send_t})"
            )
        if self._samples and seq < next(reversed(self._samples)):
            self._sorted = False
        self._samples[seq] = delay

    @property
    def samples(self) -> list:
        if not self._sorted:
            self._samples = dict(sorted(self._samples.items()))
            self._sorted = True
        return list(self._samples.values())

    def __len__(self):
        return len(self._samples)

    @property
    def smd(self):
        return max(self._samples.values()) if self._samples else None

    @property
    def smj(self):
        s = self.samples
        if len(s) < 2:
            return None
        return max(abs(b - a) for a, b in zip(s, s[1:]))


def smd(samples):
    return max(samples) if samples else None


def smj(samples):
    if len(samples) < 2:
        return None
    return max(abs(b - a) for a, b in zip(samples, samples[1:]))


@dataclass(frozen=True)
class TraceRecord:
    time: int
    port: str
    cls: str
    credit: int  # nanobits
    slope: int
    capped: bool
    regime: str
    tt_gate: bool
    avb_gate: bool
    gb_active: bool
    hold_active: bool
    backlog_frames: int
    backlog_bytes: int

    def row(self):
        return (
            self.time, self.port, self.cls, self.credit, format_bits(self.credit),
            self.slope, int(self.capped), self.regime, int(self.tt_gate),
            int(self.avb_gate), int(self.gb_active), int(self.hold_active),
            self.backlog_frames, self.backlog_bytes,
        )


def format_bits(nanobits: int) -> str:
    sign = "-" if nanobits < 0 else ""
    whole, frac = divmod(abs(nanobits), NANOBITS_PER_BIT)
    if not frac:
        return f"{sign}{whole}"
    return f"{sign}{whole}.{frac:09d}".rstrip("0")


def write_kpi_csv(path, stats, extra=None) -> None:
    """One row per flow; ``extra`` columns (a dict) are prepended."""
    extra = extra or {}
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(tuple(extra) + KPI_COLUMNS)
        for fs in stats:
            w.writerow(tuple(extra.values()) + kpi_row(fs))


def kpi_row(fs: FlowStats) -> tuple:
    return (
        fs.flow_id, fs.traffic_class, fs.kind,
        "" if fs.smd is None else fs.smd,
        "" if fs.smj is None else fs.smj,
        len(fs),
    )


def write_trace_csv(path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for r in records:
            w.writerow(r.row())


def class_maxima(stats) -> dict:
    out: dict[str, dict] = {}
    for fs in stats:
        entry = out.setdefault(fs.traffic_class, {"kind": fs.kind, "flows": 0,
                                                   "max_smd_ns": None, "max_smj_ns": None})
        entry["flows"] += 1
        for key, value in (("max_smd_ns", fs.smd), ("max_smj_ns", fs.smj)):
            if value is not None and (entry[key] is None or value > entry[key]):
                entry[key] = value
    return out


def write_summary(path, summary: dict) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
