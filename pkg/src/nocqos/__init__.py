"""Cycle-level simulator of QoS arbitration in an on-chip interconnect."""

from .engine import SimRun, run_scenario
from .metrics import MetricsReport
from .model import ConfigurationError, QosLevel, ScenarioConfig, validate
from .presets import PRESET_NAMES, preset

__all__ = [
    "ConfigurationError",
    "MetricsReport",
    "PRESET_NAMES",
    "QosLevel",
    "ScenarioConfig",
    "SimRun",
    "preset",
    "run_scenario",
    "validate",
]
__version__ = "0.1.0"
