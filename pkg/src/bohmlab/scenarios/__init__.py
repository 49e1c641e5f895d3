"""Reproducible scenario runs and their configuration."""

from .conditions import analyze_conditions
from .config import (DESCRIPTIONS, SCENARIO_IDS, ScenarioConfig, apply_overrides, config_from_dict, default_config,
                     format_config, load_config, parse_config, validate)
from .report import ScenarioReport, dumps, read_report, write_report
from .runs import (ScenarioRun, run_crossing, run_fast_recorder, run_protective, run_scenario,
                   run_spin_recorder)

__all__ = [
    "DESCRIPTIONS", "SCENARIO_IDS", "ScenarioConfig", "ScenarioReport", "ScenarioRun", "analyze_conditions",
    "apply_overrides", "config_from_dict", "default_config", "dumps", "format_config", "load_config", "parse_config",
    "read_report", "run_crossing", "run_fast_recorder", "run_protective", "run_scenario",
    "run_spin_recorder", "validate", "write_report",
]
