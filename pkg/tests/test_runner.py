import pytest

from src.config.settings import RunConfig
from src.services.experiment.runner import ExperimentRunner, non_increasing, refinement_verdicts


def _rows(h, **columns):
    rows = [{"h": step} for step in h]
    for name, values in columns.items():
        for row, value in zip(rows, values):
            row[name] = value
    return rows


def test_non_increasing():
    assert non_increasing([3.0, 2.0, 2.0, 1.0]) is True
    assert non_increasing([3.0, 4.0]) is False
    # values already at rounding level may wobble
    assert non_increasing([1e-3, 1e-11, 5e-11]) is True
    assert non_increasing([None, 1.0]) is None
    assert non_increasing([]) is None


def test_weak_residual_trend_is_judged_from_coarse_to_fine():
    rows = _rows([0.005, 0.02, 0.01], weak_neumann_linear=[1e-4, 4e-4, 2e-4], C_tilde=[1.0, 1.0, 1.0])
    verdicts, measured = refinement_verdicts("fixed", rows)
    assert verdicts == {"weak_neumann_decreasing": True}
    assert measured == {}

    rows[0]["weak_neumann_linear"] = 3e-4
    verdicts, _ = refinement_verdicts("fixed", rows)
    assert verdicts["weak_neumann_decreasing"] is False


def test_moving_sweep_judges_c_tilde_stability():
    rows = _rows([0.02, 0.01, 0.005], weak_neumann_linear=[3e-3, 2e-3, 1e-3], C_tilde=[1.0, 1.5, 1.9])
    verdicts, measured = refinement_verdicts("moving", rows)
    assert verdicts == {"weak_neumann_decreasing": True, "c_tilde_stable": True}
    assert measured["c_tilde_ratio"] == pytest.approx(1.9)

    rows[2]["C_tilde"] = 2.5
    verdicts, measured = refinement_verdicts("moving", rows)
    assert verdicts["c_tilde_stable"] is False
    assert measured["c_tilde_ratio"] == pytest.approx(2.5)


def test_sphere_sweep_judges_the_wedge_trend():
    rows = _rows([0.02, 0.01], wedge_residual_linear=[1e-2, 2e-2], weak_neumann_linear=[None, None])
    verdicts, _ = refinement_verdicts("sphere", rows)
    assert verdicts == {"wedge_decreasing": False}
    assert refinement_verdicts("sphere", rows[:1]) == ({}, {})


def _sweep(tmp_path, data):
    config = RunConfig.from_dict(data).validate()
    return ExperimentRunner(config, run_dir=str(tmp_path / "sweep")).sweep("N", [8, 16, 32])


@pytest.mark.slow
def test_fixed_sweep_weak_neumann_decreases(tmp_path):
    report = _sweep(tmp_path, {
        "mode": "fixed", "seed": 2,
        "grid": {"geometry": "FlatBox", "dim": 1, "nodes_per_phase": 17},
        "initial": {"recipe": "smooth-random", "n": 2, "amplitude": 0.5},
        "flow": {"T": 0.04, "N": 8},
    })
    assert report["weak_neumann_decreasing"] is True
    residuals = [row["weak_neumann_linear"] for row in report["rows"]]
    assert residuals[0] > residuals[-1]
    assert all(row["weak_neumann_residual"] <= 1e-6 for row in report["rows"])


@pytest.mark.slow
def test_sphere_sweep_wedge_decreases(tmp_path):
    report = _sweep(tmp_path, {
        "mode": "sphere", "seed": 2,
        "sphere": {"dim": 1, "nodes": 32, "target_dim": 3, "amplitude": 1.0},
        "flow": {"T": 0.04, "N": 8},
    })
    assert report["wedge_decreasing"] is True


@pytest.mark.slow
def test_shrinking_circle_sweep_keeps_c_tilde_stable(tmp_path):
    report = _sweep(tmp_path, {
        "mode": "moving", "seed": 2,
        "grid": {"geometry": "PolarDisk", "dim": 2, "radial_nodes": 9, "angular_nodes": 12},
        "motion": {"kind": "ShrinkingCircle", "r0": 0.8},
        "initial": {"recipe": "smooth-random", "n": 2, "amplitude": 0.4},
        "flow": {"T": 0.16, "N": 8},
    })
    assert report["c_tilde_ratio"] <= 2.0
    assert report["c_tilde_stable"] is True
    assert report["weak_neumann_decreasing"] is True
