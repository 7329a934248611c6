from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from qvduel.agents import ALGORITHMS

EXPERIMENTS = ("prediction", "qvmax_control", "dueling_control")

# prediction targets the uniform behavior policy; control targets greedy policies,
# where expected_sarsa runs with a greedy target
_CONTROL = ("expected_sarsa", "q_learning", "qvmax", "bc_qvmax", "dueling", "hard_rdq", "soft_rdq")
VALID_ALGORITHMS = {
    "prediction": ("expected_sarsa", "qv"),
    "qvmax_control": _CONTROL,
    "dueling_control": _CONTROL,
}

_EXPERIMENT_DEFAULTS = {
    "prediction": dict(algorithms=("expected_sarsa", "qv"), gamma=0.99, suboptimal_reward=0.0, init_std=0.0),
    "qvmax_control": dict(algorithms=("q_learning", "qvmax", "bc_qvmax"), gamma=0.99,
                          suboptimal_reward=0.0, init_std=0.0),
    "dueling_control": dict(algorithms=("q_learning", "dueling", "hard_rdq"), gamma=0.999,
                            suboptimal_reward=-1.0, init_std=2.0),
}

DEFAULT_ALPHA_MIN = math.exp(-6.0)
DEFAULT_GRID_SIZE = 61


class ConfigError(ValueError):
    pass


def default_step_size_grid(alpha_min: float = DEFAULT_ALPHA_MIN, size: int = DEFAULT_GRID_SIZE) -> tuple[float, ...]:
    """Natural-log spaced step sizes from ``alpha_min`` up to exactly 1."""
    if not 0.0 < alpha_min < 1.0:
        raise ConfigError("alpha_min must lie in (0, 1)")
    if size < 2:
        raise ConfigError("grid needs at least two values")
    lo = math.log(alpha_min)
    grid = [math.exp(lo + i * (0.0 - lo) / (size - 1)) for i in range(size)]
    grid[-1] = 1.0
    return tuple(grid)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce one experiment suite.

    Build with :meth:`for_experiment` to pick up the per-experiment
    defaults; the plain constructor uses the prediction settings.
    """

    experiment_id: str = "prediction"
    algorithms: tuple[str, ...] = ("expected_sarsa", "qv")
    num_actions_list: tuple[int, ...] = (2, 6, 10, 14, 18)
    steps_per_trial: int = 20_000
    num_trials: int = 100
    step_size_grid: tuple[float, ...] = field(default_factory=default_step_size_grid)
    gamma: float = 0.99
    suboptimal_reward: float = 0.0
    record_stride: int = 100
    base_seed: int = 0
    num_states: int = 4
    init_std: float = 0.0
    rdq_beta: float = 1e-3
    auc_stride: int = 1
    curves: str = "best"

    def __post_init__(self):
        object.__setattr__(self, "algorithms", tuple(self.algorithms))
        object.__setattr__(self, "num_actions_list", tuple(int(n) for n in self.num_actions_list))
        object.__setattr__(self, "step_size_grid", tuple(float(a) for a in self.step_size_grid))
        self.validate()

    def validate(self) -> None:
        if self.experiment_id not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment_id!r}; choose from {EXPERIMENTS}")
        if not self.algorithms:
            raise ConfigError("at least one algorithm is required")
        for name in self.algorithms:
            if name not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {name!r}")
            if name not in VALID_ALGORITHMS[self.experiment_id]:
                raise ConfigError(f"algorithm {name!r} cannot run in experiment {self.experiment_id!r}")
        if len(set(self.algorithms)) != len(self.algorithms):
            raise ConfigError("duplicate algorithms")
        if not self.num_actions_list or min(self.num_actions_list) < 1:
            raise ConfigError("num_actions_list must hold positive integers")
        if self.steps_per_trial < 0:
            raise ConfigError("steps_per_trial must be non-negative")
        if self.num_trials < 1:
            raise ConfigError("num_trials must be at least 1")
        grid = np.asarray(self.step_size_grid)
        if grid.size == 0 or np.any(grid <= 0.0) or np.any(grid > 1.0):
            raise ConfigError("step sizes must lie in (0, 1]")
        if np.any(np.diff(grid) <= 0.0):
            raise ConfigError("step_size_grid must be strictly increasing")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma must lie in [0, 1)")
        if self.record_stride < 1 or self.auc_stride < 1:
            raise ConfigError("record_stride and auc_stride must be positive")
        if not 0 <= self.base_seed < 2**64:
            raise ConfigError("base_seed must be an unsigned 64-bit integer")
        if self.num_states < 1:
            raise ConfigError("num_states must be positive")
        if self.init_std < 0.0:
            raise ConfigError("init_std must be non-negative")
        if not 0.0 <= self.rdq_beta < 1.0:
            raise ConfigError("rdq_beta must lie in [0, 1)")
        if self.curves not in ("best", "all"):
            raise ConfigError("curves must be 'best' or 'all'")

    @classmethod
    def for_experiment(cls, experiment_id: str, **overrides) -> ExperimentConfig:
        if experiment_id not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {experiment_id!r}; choose from {EXPERIMENTS}")
        values = dict(_EXPERIMENT_DEFAULTS[experiment_id])
        values.update(overrides)
        alpha_min = values.pop("alpha_min", None)
        grid_size = values.pop("grid_size", None)
        if "step_size_grid" not in values and (alpha_min is not None or grid_size is not None):
            values["step_size_grid"] = default_step_size_grid(
                DEFAULT_ALPHA_MIN if alpha_min is None else alpha_min,
                DEFAULT_GRID_SIZE if grid_size is None else grid_size,
            )
        return cls(experiment_id=experiment_id, **values)

    @classmethod
    def from_mapping(cls, data: dict, **overrides) -> ExperimentConfig:
        """Build from a parsed config file, with ``overrides`` taking precedence."""
        allowed = {f.name for f in dataclasses.fields(cls)} | {"alpha_min", "grid_size"}
        unknown = set(data) - allowed
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(sorted(unknown))}")
        merged = {**data, **overrides}
        experiment_id = merged.pop("experiment_id", "prediction")
        return cls.for_experiment(experiment_id, **merged)

    @classmethod
    def from_json(cls, path: str | Path, **overrides) -> ExperimentConfig:
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        return cls.from_mapping(data, **overrides)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **changes)
