"""Trial execution, AUC scoring and step-size sweeps."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from qvduel.agents import DUEL_VARIANTS, QV_VARIANTS
from qvduel.experiments.config import VALID_ALGORITHMS, ExperimentConfig
from qvduel.experiments.kernels import CODES, run_trial_kernel
from qvduel.mdp import TabularMdp, build_parametric_mdp, uniform_policy
from qvduel.operators import solve_optimal, solve_prediction

log = logging.getLogger(__name__)

Z_95 = 1.959963984540054
# spawn-key tag for the initialization stream shared by every algorithm in a trial
_INIT_TAG = 2**32 - 1


@dataclass(frozen=True, eq=False)
class ErrorCurve:
    """Normalized RMS error of one trial, in percent of the initial error.

    ``steps``/``percent`` are the recorded points; ``auc`` is computed from
    the unthinned per-step curve (subsampled by ``auc_stride`` only).
    """

    experiment: str
    algorithm: str
    num_actions: int
    step_size: float
    trial: int
    steps: np.ndarray
    percent: np.ndarray
    initial_error: float
    auc: float

    @property
    def points(self) -> list[tuple[int, float]]:
        return list(zip(self.steps.tolist(), self.percent.tolist()))


@dataclass(frozen=True)
class CellStats:
    algorithm: str
    num_actions: int
    step_size: float
    mean_auc: float
    ci_low: float
    ci_high: float
    trial_aucs: tuple[float, ...]

    @property
    def num_trials(self) -> int:
        return len(self.trial_aucs)

    @property
    def ci_half_width(self) -> float:
        return (self.ci_high - self.ci_low) / 2.0


@dataclass(frozen=True)
class BestStats:
    algorithm: str
    num_actions: int
    best_step_size: float
    best_auc: float
    ci_low: float
    ci_high: float


@dataclass
class SweepResult:
    config: ExperimentConfig
    cells: list[CellStats] = field(default_factory=list)
    best: list[BestStats] = field(default_factory=list)
    curves: dict[tuple[str, int, float], list[ErrorCurve]] = field(default_factory=dict)

    @property
    def experiment(self) -> str:
        return self.config.experiment_id

    def cell(self, algorithm: str, num_actions: int, step_size: float) -> CellStats:
        for c in self.cells:
            if (c.algorithm, c.num_actions, c.step_size) == (algorithm, num_actions, step_size):
                return c
        raise KeyError((algorithm, num_actions, step_size))

    def best_for(self, algorithm: str, num_actions: int) -> BestStats:
        for b in self.best:
            if (b.algorithm, b.num_actions) == (algorithm, num_actions):
                return b
        raise KeyError((algorithm, num_actions))

    def auc_by_step_size(self, algorithm: str, num_actions: int) -> np.ndarray:
        return np.array([self.cell(algorithm, num_actions, a).mean_auc for a in self.config.step_size_grid])

    def selected_curves(self) -> list[ErrorCurve]:
        """Curves to export: best step size only, or everything, per ``config.curves``."""
        keys = sorted(self.curves, key=lambda k: (self.config.algorithms.index(k[0]), k[1], k[2]))
        if self.config.curves == "best":
            chosen = {(b.algorithm, b.num_actions, b.best_step_size) for b in self.best}
            keys = [k for k in keys if k in chosen]
        return [c for k in keys for c in self.curves[k]]


def rms_error(q_est: np.ndarray, q_ref: np.ndarray) -> float:
    """Euclidean norm of ``q_ref - q_est``."""
    q_est = np.asarray(q_est, dtype=np.float64)
    q_ref = np.asarray(q_ref, dtype=np.float64)
    if q_est.shape != q_ref.shape:
        raise ValueError(f"shape mismatch: {q_est.shape} vs {q_ref.shape}")
    return float(np.linalg.norm((q_ref - q_est).ravel()))


def auc(curve: ErrorCurve | np.ndarray) -> float:
    """Mean of the recorded normalized errors; 100 means no progress at all."""
    values = curve.percent if isinstance(curve, ErrorCurve) else np.asarray(curve, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot score an empty curve")
    return float(values.mean())


def build_mdp(config: ExperimentConfig, num_actions: int) -> TabularMdp:
    return build_parametric_mdp(config.num_states, num_actions, config.gamma, config.suboptimal_reward)


@lru_cache(maxsize=64)
def _reference(experiment_id: str, num_states: int, num_actions: int, gamma: float,
               suboptimal_reward: float) -> tuple[TabularMdp, np.ndarray]:
    mdp = build_parametric_mdp(num_states, num_actions, gamma, suboptimal_reward)
    if experiment_id == "prediction":
        q_ref, _ = solve_prediction(mdp, uniform_policy(mdp))
    else:
        q_ref, _ = solve_optimal(mdp)
    q_ref.setflags(write=False)
    return mdp, q_ref


def reference_values(config: ExperimentConfig, num_actions: int) -> np.ndarray:
    """``q_b`` under the uniform behavior for prediction, ``q_*`` for control."""
    return _reference(config.experiment_id, config.num_states, num_actions, config.gamma,
                      config.suboptimal_reward)[1]


def trial_seed(base_seed: int, algorithm: str, num_actions: int, step_size: float, trial: int) -> np.random.SeedSequence:
    """Seed for one trial's dynamics, independent of execution order.

    The step size enters through its IEEE-754 bit pattern, so a value taken
    from the grid seeds identically in a sweep and in a single ``run``.
    """
    bits = int(np.float64(step_size).view(np.uint64))
    return np.random.SeedSequence(base_seed, spawn_key=(CODES[algorithm], num_actions, bits >> 32,
                                                        bits & 0xFFFFFFFF, trial))


def init_seed(base_seed: int, num_actions: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(base_seed, spawn_key=(_INIT_TAG, num_actions, trial))


def initial_tables(config: ExperimentConfig, algorithm: str, num_actions: int, trial: int):
    """Initial ``(q, v, adv)`` tables for one trial.

    With ``init_std > 0`` every algorithm in the trial starts from the same
    draws ``V0 ~ N(0, std^2)`` and ``Adv0 ~ N(0, std^2)``: dueling agents use
    them directly, the others start from ``Q0 = V0 + Adv0`` (and ``V0``).
    """
    S = config.num_states
    v0 = np.zeros(S)
    adv0 = np.zeros((S, num_actions))
    if config.init_std > 0.0:
        rng = np.random.Generator(np.random.Philox(init_seed(config.base_seed, num_actions, trial)))
        v0 = rng.normal(0.0, config.init_std, size=S)
        adv0 = rng.normal(0.0, config.init_std, size=(S, num_actions))
    if algorithm in DUEL_VARIANTS:
        return np.zeros((S, num_actions)), v0, adv0
    q0 = v0[:, None] + adv0
    if algorithm in QV_VARIANTS:
        return q0, v0.copy(), np.zeros((S, num_actions))
    return q0, np.zeros(S), np.zeros((S, num_actions))


def draw_experience(config: ExperimentConfig, algorithm: str, num_actions: int, step_size: float, trial: int):
    """Start state, uniform behavior actions and transition uniforms for one trial."""
    seed = trial_seed(config.base_seed, algorithm, num_actions, step_size, trial)
    rng = np.random.Generator(np.random.Philox(seed))
    s0 = int(rng.integers(config.num_states))
    actions = rng.integers(0, num_actions, size=config.steps_per_trial)
    uniforms = rng.random(config.steps_per_trial)
    return s0, actions, uniforms


def run_trial(config: ExperimentConfig, algorithm: str, num_actions: int, step_size: float, trial_index: int) -> ErrorCurve:
    if algorithm not in VALID_ALGORITHMS[config.experiment_id]:
        raise ValueError(f"algorithm {algorithm!r} cannot run in experiment {config.experiment_id!r}")
    if not 0.0 < step_size <= 1.0:
        raise ValueError(f"step size must lie in (0, 1], got {step_size}")

    mdp, q_ref = _reference(config.experiment_id, config.num_states, num_actions, config.gamma,
                            config.suboptimal_reward)
    q, v, adv = initial_tables(config, algorithm, num_actions, trial_index)
    s0, actions, uniforms = draw_experience(config, algorithm, num_actions, step_size, trial_index)

    greedy_target = config.experiment_id != "prediction"
    target = uniform_policy(mdp).probs
    beta = config.rdq_beta if algorithm == "soft_rdq" else 0.0
    errors = np.empty(config.steps_per_trial + 1)
    run_trial_kernel(CODES[algorithm], greedy_target, target, q, v, adv, mdp.outcome_cdf, mdp.rewards,
                     actions, uniforms, s0, float(step_size), mdp.gamma, beta, q_ref, errors)

    initial = errors[0]
    if initial == 0.0:
        raise ValueError("initial error is zero; the normalized curve is undefined")
    percent = errors * (100.0 / initial)
    # the zero-step point is 100% by definition
    percent[0] = 100.0
    steps = np.arange(0, config.steps_per_trial + 1, config.record_stride)
    return ErrorCurve(
        experiment=config.experiment_id,
        algorithm=algorithm,
        num_actions=num_actions,
        step_size=float(step_size),
        trial=trial_index,
        steps=steps,
        percent=percent[steps],
        initial_error=float(initial),
        auc=auc(percent[::config.auc_stride]),
    )


def _summarize(values: list[float]) -> tuple[float, float, float]:
    x = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        return math.inf, math.inf, math.inf
    mean = float(x.mean())
    if x.size < 2 or np.all(x == x[0]):
        return mean, mean, mean
    half = Z_95 * float(x.std(ddof=1)) / math.sqrt(x.size)
    return mean, mean - half, mean + half


def _best_cell(cells: list[CellStats]) -> CellStats:
    # cells arrive in increasing step size, so a strict comparison keeps the smaller one on ties
    best = cells[0]
    for c in cells[1:]:
        if c.mean_auc < best.mean_auc:
            best = c
    return best


def default_jobs() -> int:
    return os.cpu_count() or 1


def sweep(config: ExperimentConfig, jobs: int | None = None) -> SweepResult:
    """Run every (algorithm, |A|, step size, trial) combination and aggregate AUCs.

    Trials are independent and may run in any order on ``jobs`` threads; the
    result depends only on ``config``.
    """
    jobs = default_jobs() if jobs is None else max(1, jobs)
    tasks = [
        (alg, n, alpha, trial)
        for alg in config.algorithms
        for n in config.num_actions_list
        for alpha in config.step_size_grid
        for trial in range(config.num_trials)
    ]
    log.info("%s: %d trials of %d steps on %d thread(s)", config.experiment_id, len(tasks),
             config.steps_per_trial, jobs)

    def work(task):
        return run_trial(config, *task)

    if jobs == 1:
        curves = [work(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            curves = list(pool.map(work, tasks))

    result = SweepResult(config)
    for task, curve in zip(tasks, curves):
        result.curves.setdefault(task[:3], []).append(curve)

    for alg in config.algorithms:
        for n in config.num_actions_list:
            row = []
            for alpha in config.step_size_grid:
                aucs = [c.auc for c in result.curves[(alg, n, alpha)]]
                mean, lo, hi = _summarize(aucs)
                row.append(CellStats(alg, n, alpha, mean, lo, hi, tuple(aucs)))
            result.cells.extend(row)
            best = _best_cell(row)
            result.best.append(BestStats(alg, n, best.step_size, best.mean_auc, best.ci_low, best.ci_high))
            log.info("%s |A|=%d best alpha=%.4g AUC=%.3f", alg, n, best.step_size, best.mean_auc)
    return result
