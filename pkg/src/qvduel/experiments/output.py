"""CSV export and plot-script generation for sweep results."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable

from qvduel.experiments.runner import ErrorCurve, SweepResult

CURVES_HEADER = ["experiment", "algorithm", "num_actions", "step_size", "trial", "step", "normalized_rms_percent"]
AUC_HEADER = ["experiment", "algorithm", "num_actions", "step_size", "mean_auc", "ci_low", "ci_high", "num_trials"]
BEST_HEADER = ["experiment", "algorithm", "num_actions", "best_step_size", "best_auc", "ci_low", "ci_high"]


def fmt(x: float) -> str:
    # 17 significant digits round-trip every float64
    return format(float(x), ".17g")


def _write_rows(path: Path, header: list[str], rows: Iterable[list]) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
            n += 1
    return n


def write_curves_csv(curves: Iterable[ErrorCurve], path: str | Path) -> int:
    """Write one row per recorded point, in the given curve order; returns the row count."""
    def rows():
        for c in curves:
            for step, value in zip(c.steps.tolist(), c.percent.tolist()):
                yield [c.experiment, c.algorithm, c.num_actions, fmt(c.step_size), c.trial, step, fmt(value)]

    return _write_rows(Path(path), CURVES_HEADER, rows())


def write_auc_csv(result: SweepResult, path: str | Path) -> int:
    rows = (
        [result.experiment, c.algorithm, c.num_actions, fmt(c.step_size), fmt(c.mean_auc),
         fmt(c.ci_low), fmt(c.ci_high), c.num_trials]
        for c in result.cells
    )
    return _write_rows(Path(path), AUC_HEADER, rows)


def write_best_csv(result: SweepResult, path: str | Path) -> int:
    rows = (
        [result.experiment, b.algorithm, b.num_actions, fmt(b.best_step_size), fmt(b.best_auc),
         fmt(b.ci_low), fmt(b.ci_high)]
        for b in result.best
    )
    return _write_rows(Path(path), BEST_HEADER, rows)


def write_csv(result: SweepResult | list[ErrorCurve], path: str | Path) -> list[Path]:
    """Export a sweep as ``curves.csv``, ``auc.csv`` and ``best.csv`` under the
    directory ``path``, or a plain list of curves to the file ``path``."""
    path = Path(path)
    if isinstance(result, SweepResult):
        written = [path / "curves.csv", path / "auc.csv", path / "best.csv"]
        write_curves_csv(result.selected_curves(), written[0])
        write_auc_csv(result, written[1])
        write_best_csv(result, written[2])
        return written
    curves = sorted(result, key=lambda c: (c.algorithm, c.num_actions, c.step_size, c.trial))
    write_curves_csv(curves, path)
    return [path]


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


PLOT_TEMPLATE = '''\
"""Render the {experiment} results: error vs. steps, AUC vs. step size, best AUC vs. |A|.

Reads curves.csv, auc.csv and best.csv from this script's directory and
writes {experiment}.png next to them. Requires matplotlib.
"""

import csv
import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent
Z_95 = 1.959963984540054


def load(name):
    with open(HERE / name, newline="") as f:
        return list(csv.DictReader(f))


def main():
    curves = load("curves.csv")
    aucs = load("auc.csv")
    best = load("best.csv")
    algorithms = list(dict.fromkeys(row["algorithm"] for row in best))
    largest = max(int(row["num_actions"]) for row in best)

    fig, (left, center, right) = plt.subplots(1, 3, figsize=(15, 4.2))

    for alg in algorithms:
        pick = [r for r in best if r["algorithm"] == alg and int(r["num_actions"]) == largest][0]
        alpha = float(pick["best_step_size"])
        by_step = defaultdict(list)
        for r in curves:
            if (r["algorithm"] == alg and int(r["num_actions"]) == largest
                    and float(r["step_size"]) == alpha):
                by_step[int(r["step"])].append(float(r["normalized_rms_percent"]))
        steps = sorted(by_step)
        if not steps:
            continue
        mean = [sum(by_step[s]) / len(by_step[s]) for s in steps]
        half = []
        for s, m in zip(steps, mean):
            xs = by_step[s]
            var = sum((x - m) ** 2 for x in xs) / (len(xs) - 1) if len(xs) > 1 else 0.0
            half.append(Z_95 * math.sqrt(var / len(xs)))
        line, = left.plot(steps, mean, label=f"{{alg}} (alpha={{alpha:.3g}})")
        left.fill_between(steps, [m - h for m, h in zip(mean, half)],
                          [m + h for m, h in zip(mean, half)], color=line.get_color(), alpha=0.2)

        rows = [r for r in aucs if r["algorithm"] == alg and int(r["num_actions"]) == largest]
        rows = [r for r in rows if math.isfinite(float(r["mean_auc"]))]
        xs = [float(r["step_size"]) for r in rows]
        center.plot(xs, [float(r["mean_auc"]) for r in rows], color=line.get_color(), label=alg)
        center.fill_between(xs, [float(r["ci_low"]) for r in rows], [float(r["ci_high"]) for r in rows],
                            color=line.get_color(), alpha=0.2)
        center.axhline(float(pick["best_auc"]), color=line.get_color(), linestyle="--", linewidth=0.8)

        rows = sorted((r for r in best if r["algorithm"] == alg), key=lambda r: int(r["num_actions"]))
        ns = [int(r["num_actions"]) for r in rows]
        right.plot(ns, [float(r["best_auc"]) for r in rows], marker="o", color=line.get_color(), label=alg)
        right.fill_between(ns, [float(r["ci_low"]) for r in rows], [float(r["ci_high"]) for r in rows],
                           color=line.get_color(), alpha=0.2)

    left.set(xlabel="steps", ylabel="normalized RMS error (%)", title=f"|A| = {{largest}}")
    center.set(xscale="log", xlabel="step size", ylabel="AUC (%)", ylim=(0, 105), title=f"|A| = {{largest}}")
    right.set(xlabel="number of actions", ylabel="best AUC (%)")
    for ax in (left, center, right):
        ax.legend(fontsize=8)
    fig.suptitle("{experiment}")
    fig.tight_layout()
    fig.savefig(HERE / "{experiment}.png", dpi=150)


if __name__ == "__main__":
    main()
'''


def emit_plot_script(result: SweepResult | str, path: str | Path) -> Path:
    """Write a standalone matplotlib script for one experiment's three panels."""
    experiment = result if isinstance(result, str) else result.experiment
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(PLOT_TEMPLATE.format(experiment=experiment))
    return path
