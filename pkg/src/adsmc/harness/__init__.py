"""Scenario configuration, closed-loop runs, comparisons and sweeps."""

from .config import ScenarioConfig, load_config, parse_config
from .metrics import TrackingReport
from .runner import COLUMNS, RunResult, run_scenario

__all__ = [
    "COLUMNS",
    "RunResult",
    "ScenarioConfig",
    "TrackingReport",
    "load_config",
    "parse_config",
    "run_scenario",
]
