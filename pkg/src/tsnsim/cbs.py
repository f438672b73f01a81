"""Credit-based shaper state for one AVB class on one port.

Credit is kept in integer *nanobits* (bits x 1e9).  With slopes in whole
bits per second and time in whole nanoseconds every slope x duration product
is an exact integer, so traces reconstruct bit-for-bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .model import ConfigError

NANOBITS_PER_BIT = 1_000_000_000
NANOBITS_PER_MILLIBIT = 1_000_000
AVB_RESERVATION_CAP = Fraction(85, 100)


class CreditMode(str, Enum):
    NONFROZEN = "nonfrozen"
    FROZEN = "frozen"
    RETURN_TO_ZERO = "return-to-zero"


class Regime(str, Enum):
    TRANSMITTING = "transmitting"
    ACCUMULATING = "accumulating"
    PAUSED = "paused_gate_closed"
    GUARDBAND = "guardband"
    IDLE_ZERO = "idle_zero"


def scaled_idle_slope(oper_idle_slope, hyperperiod, t_gate_closed, t_gb=0) -> Fraction:
    """Reserved bandwidth stretched over the time the class can actually use."""
    available = hyperperiod - t_gate_closed - t_gb
    if available <= 0:
        raise ConfigError(
            f"class starved: gate closed {t_gate_closed} ns + guardband {t_gb} ns "
            f">= cycle {hyperperiod} ns"
        )
    return Fraction(oper_idle_slope) * hyperperiod / available


def send_slope(idle_slope, port_rate):
    if not 0 < idle_slope < port_rate:
        raise ConfigError(
            f"idle slope {float(idle_slope):.0f} bit/s must lie in (0, {port_rate})"
        )
    return idle_slope - port_rate


@dataclass(frozen=True)
class CbsClassConfig:
    name: str
    oper_idle_slope: int
    idle_slope: int
    port_rate: int
    mode: CreditMode = CreditMode.NONFROZEN

    def __post_init__(self):
        send_slope(self.idle_slope, self.port_rate)

    @property
    def send_slope(self) -> int:
        return self.idle_slope - self.port_rate


class CreditState:
    """Piecewise-linear credit driven by four boolean inputs.

    ``transmitting`` (a unit of this class is on the line), ``gate_open``,
    ``guarded`` (inside a guardband or hold window) and ``backlog`` (frames or
    a preempted remainder queued).  The slope over ``[last_update, next)`` is
    fixed by the inputs seen at ``last_update``.
    """

    __slots__ = ("config", "credit", "last_update", "regime", "slope", "cap",
                 "transmitting", "gate_open", "guarded", "backlog", "log")

    def __init__(self, config: CbsClassConfig, t: int = 0, *, log: bool = False):
        self.config = config
        self.credit = 0
        self.last_update = t
        self.regime = Regime.IDLE_ZERO
        self.slope = 0
        self.cap = False
        self.transmitting = False
        self.gate_open = True
        self.guarded = False
        self.backlog = False
        self.log = [] if log else None

    @property
    def credit_bits(self) -> Fraction:
        return Fraction(self.credit, NANOBITS_PER_BIT)

    def value_at(self, t: int) -> int:
        """Credit at ``t`` under the current regime (no state change)."""
        c = self.credit + self.slope * (t - self.last_update)
        if self.cap and c > 0:
            c = 0
        return c

    def advance(self, t: int) -> None:
        if t < self.last_update:
            raise RuntimeError(f"credit time regression {t} < {self.last_update}")
        if t != self.last_update:
            self.credit = self.value_at(t)
            self.last_update = t

    def update(self, t, *, transmitting=None, gate_open=None, guarded=None, backlog=None):
        self.advance(t)
        if transmitting is not None:
            self.transmitting = transmitting
        if gate_open is not None:
            self.gate_open = gate_open
        if guarded is not None:
            self.guarded = guarded
        if backlog is not None:
            self.backlog = backlog
        self._derive()
        return self

    def _derive(self) -> None:
        cfg = self.config
        idle = cfg.idle_slope
        old = (self.regime, self.slope, self.credit)
        self.cap = False
        if self.transmitting:
            regime, slope = Regime.TRANSMITTING, cfg.send_slope
        elif not self.gate_open:
            regime, slope = Regime.PAUSED, 0
        else:
            if not self.backlog and self.credit > 0:
                self.credit = 0
            if self.guarded:
                regime = Regime.GUARDBAND
                if cfg.mode is CreditMode.NONFROZEN and (self.backlog or self.credit < 0):
                    slope = idle
                    self.cap = not self.backlog
                elif cfg.mode is CreditMode.RETURN_TO_ZERO:
                    self.credit = 0
                    slope = 0
                else:
                    slope = 0
            elif self.backlog or self.credit < 0:
                regime, slope = Regime.ACCUMULATING, idle
                self.cap = not self.backlog
            else:
                regime, slope = Regime.IDLE_ZERO, 0
        if not self.transmitting and not self.backlog and self.credit > 0:
            self.credit = 0
        self.regime = regime
        self.slope = slope
        if self.log is not None and (regime, slope, self.credit) != old:
            self.log.append((self.last_update, self.credit, regime))

    _EVENTS = {
        "tx_start": ("transmitting", True),
        "tx_end": ("transmitting", False),
        "gate_open": ("gate_open", True),
        "gate_close": ("gate_open", False),
        "gb_start": ("guarded", True),
        "gb_end": ("guarded", False),
        "queue_nonempty": ("backlog", True),
        "queue_empty": ("backlog", False),
    }

    def on_state_change(self, event: str, t: int) -> "CreditState":
        try:
            attr, value = self._EVENTS[event]
        except KeyError:
            raise ValueError(f"unknown credit event {event!r}") from None
        return self.update(t, **{attr: value})

    def eligible(self, t: int) -> bool:
        """Credit non-negative, gate open, not guarded."""
        return self.gate_open and not self.guarded and self.value_at(t) >= 0

    def zero_crossing(self, t: int):
        """Earliest instant >= t at which credit reaches zero under the
        current slope, or None if it never does."""
        c = self.value_at(t)
        if c >= 0:
            return t
        if self.slope <= 0:
            return None
        return t + (-c + self.slope - 1) // self.slope


def idle_slope_for_port(oper_idle_slope, hyperperiod, closed, gb, scaling: str) -> int:
    if scaling == "none":
        value = Fraction(oper_idle_slope)
    elif scaling == "gate":
        value = scaled_idle_slope(oper_idle_slope, hyperperiod, closed, 0)
    elif scaling == "gate-and-guardband":
        value = scaled_idle_slope(oper_idle_slope, hyperperiod, closed, gb)
    else:
        raise ConfigError(f"unknown idle-slope scaling {scaling!r}")
    return round(value)
