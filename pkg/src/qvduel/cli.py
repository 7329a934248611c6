"""Command-line entry point: ``qvduel {run,sweep,figures,verify,solve}``."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

import numpy as np

from qvduel.agents import ALGORITHMS
from qvduel.experiments.config import EXPERIMENTS, ConfigError, ExperimentConfig
from qvduel.experiments.output import emit_plot_script, write_csv, write_curves_csv
from qvduel.experiments.runner import SweepResult, run_trial, sweep
from qvduel.mdp import MdpError, build_parametric_mdp, uniform_policy
from qvduel.operators import solve_optimal, solve_prediction
from qvduel.verification import run_checks

log = logging.getLogger("qvduel")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

SEED_ENV = "QVDUEL_SEED"
FIGURE_EXPERIMENTS = EXPERIMENTS
# fields that define an experiment; `figures` fixes these per suite
_SUITE_FIELDS = {"experiment_id", "algorithms", "gamma", "suboptimal_reward", "init_std"}


class UsageError(Exception):
    pass


def _env_seed() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _read_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    import json

    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise UsageError(f"{path}: expected a JSON object")
    return data


def _overrides(args) -> dict:
    """Flag values that were actually given; flags beat the config file."""
    out = {}
    if getattr(args, "trials", None) is not None:
        out["num_trials"] = args.trials
    if getattr(args, "steps", None) is not None:
        out["steps_per_trial"] = args.steps
    if getattr(args, "actions", None) is not None:
        out["num_actions_list"] = tuple(args.actions)
    if getattr(args, "algorithms", None) is not None:
        out["algorithms"] = tuple(args.algorithms)
    if getattr(args, "gamma", None) is not None:
        out["gamma"] = args.gamma
    if getattr(args, "record_stride", None) is not None:
        out["record_stride"] = args.record_stride
    if getattr(args, "experiment", None) is not None:
        out["experiment_id"] = args.experiment
    return out


def _resolve_seed(args, file_data: dict) -> int:
    if args.seed is not None:
        return args.seed
    if "base_seed" in file_data:
        return int(file_data["base_seed"])
    env = _env_seed()
    return 0 if env is None else env


def resolve_config(args, **extra) -> ExperimentConfig:
    """Defaults, then config file, then environment seed fallback, then flags."""
    data = _read_config_file(args.config)
    overrides = {**_overrides(args), **extra}
    overrides["base_seed"] = _resolve_seed(args, data)
    try:
        return ExperimentConfig.from_mapping(data, **overrides)
    except (ConfigError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def _print_best_table(results: list[SweepResult]) -> None:
    print(f"{'experiment':<16} {'algorithm':<15} {'|A|':>4} {'best alpha':>11} {'AUC %':>9} {'95% CI':>21}")
    for result in results:
        for b in result.best:
            print(f"{result.experiment:<16} {b.algorithm:<15} {b.num_actions:>4} {b.best_step_size:>11.5f} "
                  f"{b.best_auc:>9.3f} [{b.ci_low:>9.3f}, {b.ci_high:>9.3f}]")


def cmd_run(args) -> int:
    config = resolve_config(args, algorithms=(args.algorithm,))
    if len(config.num_actions_list) != 1:
        raise UsageError("run takes exactly one --actions value")
    if not 0.0 < args.alpha <= 1.0:
        raise UsageError("--alpha must lie in (0, 1]")
    n = config.num_actions_list[0]
    curves = [run_trial(config, args.algorithm, n, args.alpha, t) for t in range(config.num_trials)]
    path = Path(args.out) / config.experiment_id / "curves.csv"
    write_curves_csv(curves, path)
    aucs = [c.auc for c in curves]
    log.info("wrote %s; mean AUC %.3f over %d trial(s)", path, float(np.mean(aucs)), len(aucs))
    return EXIT_OK


def _run_sweep(config: ExperimentConfig, out: Path, jobs: int | None, plot: bool) -> SweepResult:
    result = sweep(config, jobs=jobs)
    directory = out / config.experiment_id
    for path in write_csv(result, directory):
        log.info("wrote %s", path)
    if plot:
        log.info("wrote %s", emit_plot_script(result, directory / "plot.py"))
    return result


def cmd_sweep(args) -> int:
    config = resolve_config(args)
    result = _run_sweep(config, Path(args.out), args.jobs, plot=False)
    _print_best_table([result])
    return EXIT_OK


def cmd_figures(args) -> int:
    data = _read_config_file(args.config)
    clash = _SUITE_FIELDS & set(data)
    if clash:
        raise UsageError(f"figures fixes {', '.join(sorted(clash))} per experiment; remove them from the config")
    scale = {"num_trials": 100 if args.paper_scale else 20, "record_stride": 100}
    scale.update({k: v for k, v in _overrides(args).items()})
    scale["base_seed"] = _resolve_seed(args, data)
    results = []
    for experiment in FIGURE_EXPERIMENTS:
        try:
            config = ExperimentConfig.from_mapping({**data, "experiment_id": experiment}, **scale)
        except (ConfigError, TypeError) as exc:
            raise UsageError(str(exc)) from None
        results.append(_run_sweep(config, Path(args.out), args.jobs, plot=True))
    _print_best_table(results)
    return EXIT_OK


def cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else (_env_seed() or 0)
    checks = run_checks(num_pairs=args.pairs, seed=seed)
    for check in checks:
        print(check.line())
    failed = sum(not c.passed for c in checks)
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_FAILURE


def cmd_solve(args) -> int:
    try:
        mdp = build_parametric_mdp(args.num_states, args.actions, args.gamma, args.suboptimal_reward)
    except MdpError as exc:
        raise UsageError(str(exc)) from None
    q_b, v_b = solve_prediction(mdp, uniform_policy(mdp))
    q_star, v_star = solve_optimal(mdp)

    np.set_printoptions(precision=8, suppress=True, linewidth=120)
    print(f"MDP: {mdp.num_states} states, {mdp.num_actions} actions, gamma={mdp.gamma}, "
          f"rewards={mdp.rewards.tolist()}")
    for label, values in (("v_b (uniform behavior)", v_b), ("q_b", q_b), ("v_*", v_star), ("q_*", q_star)):
        print(f"{label}:\n{values}")

    directory = Path(args.out) / "solve"
    directory.mkdir(parents=True, exist_ok=True)
    mdp.save_json(directory / "mdp.json")
    with open(directory / "fixed_points.csv", "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["kind", "state", "action", "value"])
        for kind, q, v in (("behavior", q_b, v_b), ("optimal", q_star, v_star)):
            for s in range(mdp.num_states):
                writer.writerow([f"v_{kind}", s, "", format(v[s], ".17g")])
                for a in range(mdp.num_actions):
                    writer.writerow([f"q_{kind}", s, a, format(q[s, a], ".17g")])
    log.info("wrote %s", directory)
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser, single_algorithm: bool = False) -> None:
    p.add_argument("--config", help="JSON file with experiment config fields")
    p.add_argument("--experiment", choices=EXPERIMENTS)
    if single_algorithm:
        p.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    else:
        p.add_argument("--algorithms", nargs="+", choices=ALGORITHMS)
    p.add_argument("--actions", nargs="+", type=int, help="number(s) of actions")
    p.add_argument("--gamma", type=float)
    _add_scale(p)


def _add_scale(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trials", type=int)
    p.add_argument("--steps", type=int, help="environment steps per trial")
    p.add_argument("--record-stride", type=int)
    p.add_argument("--seed", type=int, help=f"base seed (fallback: ${SEED_ENV}, then 0)")
    p.add_argument("--out", default="results", help="output directory (default: ./results)")
    p.add_argument("--jobs", type=int, default=None, help="worker threads (default: CPU count)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qvduel", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one (experiment, algorithm, |A|, alpha) cell")
    _add_common(p, single_algorithm=True)
    p.add_argument("--alpha", type=float, required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="full step-size sweep for one experiment")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("figures", help="run all three experiment suites and emit plot scripts")
    p.add_argument("--config")
    p.add_argument("--actions", nargs="+", type=int)
    p.add_argument("--paper-scale", action="store_true", help="100 trials instead of 20")
    _add_scale(p)
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser("verify", help="certify contraction and fixed-point properties")
    p.add_argument("--pairs", type=int, default=1000)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("solve", help="print and export exact fixed points")
    p.add_argument("--actions", type=int, default=18)
    p.add_argument("--num-states", type=int, default=4)
    p.add_argument("--gamma", type=float, default=0.99)
    p.add_argument("--suboptimal-reward", type=float, default=0.0)
    p.add_argument("--out", default="results")
    p.set_defaults(func=cmd_solve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"qvduel: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"qvduel: I/O error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
