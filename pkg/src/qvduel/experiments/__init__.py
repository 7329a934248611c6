"""Tabular experiment suites: error curves, step-size sweeps and exports."""

from qvduel.experiments.config import (
    EXPERIMENTS,
    ConfigError,
    ExperimentConfig,
    default_step_size_grid,
)
from qvduel.experiments.output import emit_plot_script, read_csv, write_csv
from qvduel.experiments.runner import (
    BestStats,
    CellStats,
    ErrorCurve,
    SweepResult,
    auc,
    reference_values,
    rms_error,
    run_trial,
    sweep,
)

__all__ = [
    "EXPERIMENTS",
    "BestStats",
    "CellStats",
    "ConfigError",
    "ErrorCurve",
    "ExperimentConfig",
    "SweepResult",
    "auc",
    "default_step_size_grid",
    "emit_plot_script",
    "read_csv",
    "reference_values",
    "rms_error",
    "run_trial",
    "sweep",
    "write_csv",
]
