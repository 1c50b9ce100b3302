"""Configuration, scenario runs, sweeps, convergence studies and file I/O."""
from .config import ConfigError, ScenarioConfig, SweepConfig, build_scenario, load_config, parse_config
from .runner import (SWEEP_COLUMNS, ConvergenceReport, ScenarioResult, convergence_study, diagnostics_csv,
                     read_csv, run_scenario, run_sweep)
from .snapshot import SnapshotError, read_snapshot, write_snapshot

__all__ = [
    "ConfigError", "ScenarioConfig", "SweepConfig", "build_scenario", "load_config", "parse_config",
    "SWEEP_COLUMNS", "ConvergenceReport", "ScenarioResult", "convergence_study", "diagnostics_csv", "read_csv",
    "run_scenario", "run_sweep", "SnapshotError", "read_snapshot", "write_snapshot",
]
