"""Scenario configuration, parameter sweeps and CSV output."""

from .config import ConfigError, ScenarioConfig, SweepAxis, Tie, SolverOptions, load_config, parse_config
from .csvio import OutputError, column_dictionary, columns_for, emit_csv, format_value, read_csv, sidecar_path
from .presets import PRESET_NAMES, figure_preset, preset_document
from .runner import OBSERVABLES, PointResult, evaluate, run_sweep

__all__ = [
    "ConfigError", "ScenarioConfig", "SweepAxis", "Tie", "SolverOptions", "load_config", "parse_config",
    "OutputError", "column_dictionary", "columns_for", "emit_csv", "format_value", "read_csv", "sidecar_path", "PRESET_NAMES", "figure_preset", "preset_document",
    "OBSERVABLES", "PointResult", "evaluate", "run_sweep",
]
