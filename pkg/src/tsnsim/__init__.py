"""Discrete-event simulator for TSN egress ports combining gate control
lists, credit-based shaping and frame preemption."""

from .cbs import CreditMode, CreditState, scaled_idle_slope, send_slope
from .gcl import FpMode, GclEntry, GclSchedule, GuardbandPolicy
from .model import ConfigError, Flow, TrafficClass, TrafficKind, line_size, tx_duration, wire_size
from .network import Network
from .scenario import RunConfig, Scenario, ScenarioError, load_bundled, parse_scenario

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "CreditMode", "CreditState", "Flow", "FpMode", "GclEntry", "GclSchedule",
    "GuardbandPolicy", "Network", "RunConfig", "Scenario", "ScenarioError", "TrafficClass",
    "TrafficKind", "line_size", "load_bundled", "parse_scenario", "scaled_idle_slope",
    "send_slope", "tx_duration", "wire_size",
]
