import math

import numpy as np
import pytest

from qvduel.experiments import (
    ConfigError,
    ExperimentConfig,
    auc,
    default_step_size_grid,
    emit_plot_script,
    read_csv,
    reference_values,
    rms_error,
    run_trial,
    sweep,
    write_csv,
)
from qvduel.experiments.output import AUC_HEADER, BEST_HEADER, CURVES_HEADER
from qvduel.experiments.runner import _summarize, initial_tables


def small_config(experiment="prediction", **overrides):
    values = dict(num_actions_list=(2, 4), steps_per_trial=300, num_trials=3,
                  step_size_grid=(0.05, 0.2, 0.6), record_stride=50)
    values.update(overrides)
    return ExperimentConfig.for_experiment(experiment, **values)


def test_default_grid():
    grid = default_step_size_grid()
    assert len(grid) == 61
    assert grid[0] == pytest.approx(math.exp(-6))
    assert grid[-1] == 1.0
    np.testing.assert_allclose(np.diff(np.log(grid)), 0.1, atol=1e-12)


def test_grid_validation():
    with pytest.raises(ConfigError):
        default_step_size_grid(alpha_min=1.0)
    with pytest.raises(ConfigError):
        default_step_size_grid(size=1)


def test_experiment_defaults():
    c = ExperimentConfig.for_experiment("dueling_control")
    assert (c.gamma, c.suboptimal_reward, c.init_std) == (0.999, -1.0, 2.0)
    assert c.algorithms == ("q_learning", "dueling", "hard_rdq")
    p = ExperimentConfig.for_experiment("prediction")
    assert (p.num_trials, p.steps_per_trial, p.num_actions_list) == (100, 20_000, (2, 6, 10, 14, 18))
    assert ExperimentConfig.for_experiment("qvmax_control", alpha_min=0.01, grid_size=3).step_size_grid == \
        pytest.approx((0.01, 0.1, 1.0))


@pytest.mark.parametrize("override", [
    dict(num_trials=0),
    dict(algorithms=("qv",), experiment_id="qvmax_control"),
    dict(algorithms=("q_learning",)),
    dict(algorithms=("nope",)),
    dict(step_size_grid=(0.5, 0.1)),
    dict(step_size_grid=(0.0, 0.1)),
    dict(gamma=1.0),
    dict(record_stride=0),
    dict(curves="some"),
])
def test_config_validation(override):
    experiment = override.pop("experiment_id", "prediction")
    with pytest.raises(ConfigError):
        ExperimentConfig.for_experiment(experiment, **override)


def test_from_mapping_rejects_unknown_fields():
    with pytest.raises(ConfigError, match="unknown"):
        ExperimentConfig.from_mapping({"trails": 3})
    c = ExperimentConfig.from_mapping({"experiment_id": "qvmax_control", "num_trials": 4}, num_trials=2)
    assert c.num_trials == 2 and c.experiment_id == "qvmax_control"


def test_config_json(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"experiment_id": "dueling_control", "steps_per_trial": 10}')
    c = ExperimentConfig.from_json(path)
    assert c.steps_per_trial == 10 and c.gamma == 0.999
    path.write_text("[1, 2]")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(path)


def test_auc_and_rms():
    assert auc(np.array([100.0, 50.0, 0.0])) == 50.0
    with pytest.raises(ValueError):
        auc(np.array([]))
    assert rms_error(np.zeros((2, 2)), np.array([[3.0, 0.0], [0.0, 4.0]])) == 5.0
    with pytest.raises(ValueError):
        rms_error(np.zeros(2), np.zeros(3))


def test_summarize():
    mean, lo, hi = _summarize([1.0, 2.0, 3.0])
    assert mean == 2.0
    # 1.96 * sample std / sqrt(n) = 1.96 * 1 / sqrt(3)
    assert hi - mean == pytest.approx(1.959963984540054 / math.sqrt(3))
    assert _summarize([4.0, 4.0]) == (4.0, 4.0, 4.0)
    assert _summarize([1.0, math.nan]) == (math.inf, math.inf, math.inf)


def test_reference_values():
    c = small_config()
    q_b = reference_values(c, 4)
    np.testing.assert_allclose(q_b[:, 0], 1 + 0.99 / (0.01 * 4), atol=1e-8)
    q_star = reference_values(small_config("qvmax_control"), 4)
    np.testing.assert_allclose(q_star[:, 0], 100.0, atol=1e-8)


def test_run_trial_curve_shape():
    c = small_config()
    curve = run_trial(c, "qv", 4, 0.2, 0)
    assert curve.steps.tolist() == list(range(0, 301, 50))
    assert curve.percent[0] == 100.0
    assert curve.initial_error == pytest.approx(np.linalg.norm(reference_values(c, 4)))
    assert 0.0 < curve.auc < 100.0
    assert curve.points[1][0] == 50


def test_zero_steps_gives_flat_curve():
    curve = run_trial(small_config(steps_per_trial=0), "expected_sarsa", 2, 0.2, 0)
    assert curve.percent.tolist() == [100.0]
    assert curve.auc == 100.0


def test_run_trial_rejects_bad_pairing():
    with pytest.raises(ValueError):
        run_trial(small_config(), "q_learning", 2, 0.2, 0)
    with pytest.raises(ValueError):
        run_trial(small_config(), "qv", 2, 1.5, 0)


def test_initial_tables_shared_across_algorithms():
    c = small_config("dueling_control", algorithms=("q_learning", "dueling", "hard_rdq"))
    q, _, _ = initial_tables(c, "q_learning", 4, 1)
    _, v, adv = initial_tables(c, "hard_rdq", 4, 1)
    np.testing.assert_array_equal(q, v[:, None] + adv)
    _, v2, _ = initial_tables(c, "hard_rdq", 4, 2)
    assert not np.array_equal(v, v2)


def test_trials_are_independent_of_execution_order():
    c = small_config()
    result = sweep(c, jobs=1)
    again = sweep(c, jobs=4)
    for key, curves in result.curves.items():
        for a, b in zip(curves, again.curves[key]):
            assert np.array_equal(a.percent, b.percent)
    # a single run reproduces the sweep's trial exactly
    alpha = c.step_size_grid[1]
    assert np.array_equal(run_trial(c, "qv", 4, alpha, 2).percent, result.curves[("qv", 4, alpha)][2].percent)


def test_sweep_bookkeeping():
    c = small_config()
    result = sweep(c, jobs=2)
    assert len(result.cells) == 2 * 2 * 3
    assert len(result.best) == 2 * 2
    for b in result.best:
        row = result.auc_by_step_size(b.algorithm, b.num_actions)
        assert b.best_auc == row.min()
        assert b.best_step_size == c.step_size_grid[int(np.argmin(row))]
        cell = result.cell(b.algorithm, b.num_actions, b.best_step_size)
        assert cell.num_trials == 3
        assert cell.mean_auc == pytest.approx(np.mean(cell.trial_aucs))
    selected = result.selected_curves()
    assert len(selected) == 4 * 3
    result.config = c.replace(curves="all")
    assert len(result.selected_curves()) == 12 * 3
    with pytest.raises(KeyError):
        result.best_for("qv", 99)


def test_ties_go_to_smaller_step_size():
    # every trial at zero steps scores exactly 100, so all cells tie
    c = small_config(steps_per_trial=0)
    result = sweep(c, jobs=1)
    assert all(b.best_step_size == c.step_size_grid[0] for b in result.best)


def test_csv_export_round_trip(tmp_path):
    c = small_config()
    result = sweep(c, jobs=1)
    paths = write_csv(result, tmp_path / "prediction")
    assert [p.name for p in paths] == ["curves.csv", "auc.csv", "best.csv"]
    curves = read_csv(paths[0])
    assert list(curves[0]) == CURVES_HEADER
    assert len(curves) == 4 * 3 * 7
    cells = read_csv(paths[1])
    assert list(cells[0]) == AUC_HEADER
    assert len(cells) == 12
    best = read_csv(paths[2])
    assert list(best[0]) == BEST_HEADER
    for row, b in zip(best, result.best):
        # 17 significant digits round-trip exactly
        assert float(row["best_auc"]) == b.best_auc
        assert float(row["best_step_size"]) == b.best_step_size

    curve_list = [run_trial(c, "qv", 2, 0.2, t) for t in (1, 0)]
    (path,) = write_csv(curve_list, tmp_path / "run.csv")
    rows = read_csv(path)
    assert rows[0]["trial"] == "0"
    assert len(rows) == 14


def test_csv_export_is_deterministic(tmp_path):
    c = small_config("qvmax_control", algorithms=("q_learning", "bc_qvmax"))
    write_csv(sweep(c, jobs=1), tmp_path / "a")
    write_csv(sweep(c, jobs=3), tmp_path / "b")
    for name in ("curves.csv", "auc.csv", "best.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_plot_script_is_valid_python(tmp_path):
    path = emit_plot_script("dueling_control", tmp_path / "plot.py")
    source = path.read_text()
    compile(source, str(path), "exec")
    assert "dueling_control.png" in source


def test_plot_script_renders(tmp_path):
    pytest.importorskip("matplotlib")
    import runpy

    c = small_config()
    result = sweep(c, jobs=1)
    write_csv(result, tmp_path)
    emit_plot_script(result, tmp_path / "plot.py")
    runpy.run_path(str(tmp_path / "plot.py"), run_name="__main__")
    assert (tmp_path / "prediction.png").stat().st_size > 0
