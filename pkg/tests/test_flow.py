import numpy as np
import pytest

from src.config.settings import FlowConfig
from src.core.errors import AdmissibilityError, FlowError, GeometryError
from src.core.flow.engine import FlowEngine, required_growth_rate, run_fixed, run_moving
from src.core.flow.interpolants import CONSTANT, LAMBDA, LINEAR, evaluate_interpolant, lambda_pair_statistics
from src.core.flow.transfer import pullback
from src.core.functional.test_fields import SpaceTimeTestField
from src.core.functional.weak_forms import spatial_axes, weak_formula_residual, weak_neumann_residual
from src.core.grid.domain import polar_disk, rebuild
from src.core.grid.fields import smooth_random
from src.core.matrix import algebra as alg
from src.core.motion.diffeo import PRESCRIBED_POINT, SHRINKING_CIRCLE, InterfaceMotion, build_diffeos
from src.services.experiment.runner import interface_test_field


def test_fixed_run_satisfies_energy_inequalities(short_run):
    _, _, trace = short_run
    assert len(trace) == 9
    for verdict in trace.energy_verdicts() + [trace.monotone_verdict()]:
        assert verdict.passed, verdict.to_dict()
    assert np.max(trace.column("el_residual")[1:]) <= 1e-6
    assert np.max(trace.column("pair_residual_max")) <= 1e-12
    assert np.max(trace.column("orth_residual_max")) <= 1e-8


def test_gap_closed_form_and_bound(short_run):
    A0, interpolants, trace = short_run
    h = interpolants.h
    gap = interpolants.gap()
    assert gap == pytest.approx(interpolants.sampled_gap(), rel=1e-3)
    assert gap == pytest.approx(h * h * float(trace.kinetic().sum()) / 3.0, rel=1e-12)
    assert gap <= h * h * trace.dirichlet()[0] / 3.0 * (1.0 + 1e-9)
    assert interpolants.history.diagnostics["gap"] == gap


def test_interpolants_at_step_times(short_run):
    A0, interpolants, _ = short_run
    hist = interpolants.history
    assert interpolants.evaluate(LINEAR, 0.0) is A0
    for m in (1, 4, 8):
        t = m * hist.h
        end = hist.fields[m]
        for which in (LINEAR, CONSTANT, LAMBDA):
            assert np.allclose(interpolants.evaluate(which, t).plus, end.plus, atol=1e-15)
    mid = interpolants.evaluate(LINEAR, 0.5 * hist.h)
    assert np.allclose(mid.plus, 0.5 * (hist.warm_starts[0].plus + hist.fields[1].plus))
    with pytest.raises(FlowError):
        interpolants.evaluate(LINEAR, 1.0)
    with pytest.raises(FlowError):
        interpolants.evaluate("cubic", 0.01)


def test_lambda_plateau_fraction(short_run):
    _, interpolants, _ = short_run
    for lam in (0.5, 0.9):
        stats = lambda_pair_statistics(interpolants, lam)
        samples = stats["samples_per_slab"]
        assert abs(stats["fraction_of_spacetime_interface_exact"] - lam) <= 1.0 / samples
    with pytest.raises(FlowError):
        lambda_pair_statistics(interpolants, 1.0)


def test_weak_forms_at_solver_tolerance(short_run):
    A0, interpolants, _ = short_run
    hist = interpolants.history
    psi = interface_test_field(A0.grid, A0.n, hist.T)
    assert weak_neumann_residual(hist, psi) <= 1e-6
    parts = weak_formula_residual(hist, psi)
    assert parts["mismatch"] <= 1e-9 * max(1.0, parts["antisymmetric"])
    assert parts["symmetric"] == 0.0


def test_weak_neumann_with_an_interface_jump(short_run_3):
    A0, interpolants, _ = short_run_3
    hist = interpolants.history
    psi = interface_test_field(A0.grid, A0.n, hist.T)
    end = hist.fields[4]
    axes = spatial_axes(end)
    psi_plus, psi_minus = psi.evaluate_phases(end.grid, 0.5 * hist.T, axes)
    k = end.grid.n_interface
    jump = psi_plus[:k] - psi_minus[:k]
    parts = alg.v_components(jump, axes)
    assert np.max(alg.frob_norm(parts[3])) <= 1e-12
    assert np.allclose(parts[2], jump, atol=1e-12)
    assert np.min(alg.frob_norm(jump)) > 1e-8

    assert weak_neumann_residual(hist, psi) <= 1e-6
    weak = weak_formula_residual(hist, psi)
    assert weak["mismatch"] <= 1e-9 * max(1.0, weak["antisymmetric"])


def test_weak_neumann_needs_antisymmetric_jumps(short_run_3):
    A0, interpolants, _ = short_run_3
    hist = interpolants.history
    psi = interface_test_field(A0.grid, A0.n, hist.T)
    bad = SpaceTimeTestField(psi.phi, psi.chi, psi.generator, np.eye(3))
    with pytest.raises(AdmissibilityError):
        weak_neumann_residual(hist, bad)


def test_interpolant_point_values_and_rates(short_run):
    _, interpolants, _ = short_run
    hist = interpolants.history
    h, m = hist.h, 3
    start, end = hist.warm_starts[m], hist.fields[m + 1]
    t = hist.time(m) + 0.25 * h
    expected = start.plus[2] + 0.25 * (end.plus[2] - start.plus[2])
    assert np.allclose(evaluate_interpolant(interpolants, LINEAR, ("plus", 2), t), expected, atol=1e-15)
    assert np.array_equal(evaluate_interpolant(interpolants, CONSTANT, ("minus", 0), t), end.minus[0])

    rate_plus, rate_minus = interpolants.time_derivative(t)
    assert np.allclose(rate_plus, (end.plus - start.plus) / h, atol=1e-12)
    eps = 1e-3 * h
    fd = (interpolants.evaluate(LINEAR, t + eps).minus - interpolants.evaluate(LINEAR, t - eps).minus) / (2 * eps)
    assert np.allclose(rate_minus, fd, atol=1e-6)

    late = hist.time(m) + (1.0 - 0.5 * hist.lam) * h
    assert interpolants.evaluate(LAMBDA, late) is end
    assert np.max(np.abs(interpolants.evaluate(LAMBDA, t).plus - end.plus)) > 0.0


def test_required_growth_rate():
    assert required_growth_rate(1.0, 0.5, 0.1) == 0.0
    assert required_growth_rate(0.0, 1.0, 0.1) == 0.0
    assert required_growth_rate(1.0, np.e, 0.5) == pytest.approx(2.0)


def test_run_fixed_needs_a_stationary_interface(random_pair):
    engine = FlowEngine(FlowConfig(T=0.02, N=2), motion=InterfaceMotion(kind=PRESCRIBED_POINT,
                                                                        point_coeffs=(0.0, 1.0)))
    with pytest.raises(FlowError):
        engine.run_fixed(random_pair)


def test_constant_point_motion_reproduces_the_fixed_flow(random_pair):
    flow = FlowConfig(T=0.02, N=4)
    fixed, fixed_trace = run_fixed(random_pair, flow)
    still = InterfaceMotion(kind=PRESCRIBED_POINT, point_coeffs=(0.0,))
    moving, moving_trace = run_moving(random_pair, flow, still)
    assert np.array_equal(fixed.history.fields[-1].plus, moving.history.fields[-1].plus)
    assert fixed_trace.csv_text() == moving_trace.csv_text()
    assert moving.history.diagnostics["transfer_error_max"] == 0.0


def test_stationary_pullback_is_exact(random_pair):
    fam = build_diffeos(InterfaceMotion(kind=PRESCRIBED_POINT, point_coeffs=(0.0,)), 0.01, 0.04, (-1.0, 1.0))
    moved, err = pullback(random_pair, fam, 0, rebuild(random_pair.grid, 0.0))
    assert err == 0.0
    assert np.array_equal(moved.plus, random_pair.plus)
    assert np.array_equal(moved.minus, random_pair.minus)


def test_moving_point_flow(random_pair):
    motion = InterfaceMotion(kind=PRESCRIBED_POINT, point_coeffs=(0.0, 0.5), profile_width=0.3)
    steps = []
    interpolants, trace = run_moving(random_pair, FlowConfig(T=0.04, N=4), motion,
                                     on_step=lambda m, row: steps.append(m))
    hist = interpolants.history
    assert steps == [0, 1, 2, 3, 4]
    assert hist.fields[-1].grid.interface_position == pytest.approx(0.02)
    c_tilde = hist.diagnostics["c_tilde"]
    assert np.isfinite(c_tilde)
    d0 = trace.dirichlet()[0]
    assert np.max(trace.dirichlet()) <= np.exp(c_tilde * 0.04) * d0 * (1.0 + 1e-12)
    assert np.max(trace.column("pair_residual_max")) <= 1e-12
    assert np.max(trace.column("jac_dev_max")) > 0.0
    assert np.all(np.array(hist.diagnostics["transfer_errors"]) >= 0.0)


def test_motion_must_start_at_the_grid_interface(disk_grid):
    A0 = smooth_random(rebuild(disk_grid, 0.7), 2, np.random.SeedSequence(1))
    with pytest.raises(GeometryError):
        run_moving(A0, FlowConfig(T=0.04, N=4), InterfaceMotion(kind=SHRINKING_CIRCLE, r0=0.8))


@pytest.mark.slow
def test_shrinking_circle_flow():
    grid = polar_disk(1.0, 0.05, 0.8, 9, 12)
    A0 = smooth_random(grid, 3, np.random.SeedSequence(0, spawn_key=(0,)), amplitude=0.4)
    motion = InterfaceMotion(kind=SHRINKING_CIRCLE, r0=0.8)
    interpolants, trace = run_moving(A0, FlowConfig(T=0.08, N=8), motion)
    hist = interpolants.history
    assert hist.fields[-1].grid.interface_position == pytest.approx(np.sqrt(0.64 - 0.16))
    assert np.isfinite(hist.diagnostics["c_tilde"])
    assert np.max(trace.column("pair_residual_max")) <= 1e-12
    assert np.max(trace.column("el_residual")[1:]) <= 1e-6


@pytest.mark.slow
def test_gap_shrinks_with_the_step():
    from src.utils.helpers import loglog_slope

    grid = polar_disk(1.0, 0.05, 0.8, 7, 8)
    A0 = smooth_random(grid, 2, np.random.SeedSequence(5))
    hs, gaps = [], []
    for N in (4, 8, 16):
        interpolants, _ = run_fixed(A0, FlowConfig(T=0.08, N=N))
        hs.append(interpolants.h)
        gaps.append(interpolants.gap())
    assert gaps[0] > gaps[1] > gaps[2]
    assert loglog_slope(hs, gaps) >= 0.8
