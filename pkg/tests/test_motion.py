import numpy as np
import pytest

from src.core.errors import GeometryError, LifespanError, StepSizeError
from src.core.motion.diffeo import (PRESCRIBED_POINT, SHRINKING_CIRCLE, InterfaceMotion, blend, build_diffeos,
                                    verify_diffeo_bounds)

CIRCLE = InterfaceMotion(kind=SHRINKING_CIRCLE, r0=0.8)
DOMAIN = (0.05, 1.0)


def _ring_points(radii, angle=0.3):
    radii = np.asarray(radii, dtype=float)
    return np.stack([radii * np.cos(angle), radii * np.sin(angle)], axis=1)


def test_circle_moves_by_curvature():
    t = np.linspace(0.0, 0.3, 7)
    p = CIRCLE.position(t)
    assert np.allclose(p ** 2, 0.64 - 2.0 * t)
    assert np.allclose(CIRCLE.normal_velocity(t), CIRCLE.curvature(t))
    assert CIRCLE.lifespan == pytest.approx(0.32)


@pytest.mark.parametrize("T", [0.32, 0.5, 0.3])
def test_lifespan_is_enforced(T):
    with pytest.raises(LifespanError) as info:
        build_diffeos(CIRCLE, 0.001, T, DOMAIN)
    assert info.value.details["T0"] == pytest.approx(0.32)
    assert "T0" in str(info.value)


def test_bad_steps_and_domains():
    with pytest.raises(StepSizeError):
        build_diffeos(CIRCLE, 0.0, 0.1, DOMAIN)
    with pytest.raises(StepSizeError):
        build_diffeos(CIRCLE, 0.16, 0.16, DOMAIN)
    with pytest.raises(GeometryError):
        build_diffeos(CIRCLE, 0.01, 0.16, (0.05, 0.9))
    with pytest.raises(GeometryError):
        InterfaceMotion(kind="Spiral")


def test_blend_is_c2_at_the_band_edge():
    b = blend(np.array([0.0, 1.0, -1.0, 1.5]))
    assert b.value[0] == 1.0
    assert np.allclose(b.value[1:], 0.0)
    assert np.allclose(b.d1[1:], 0.0)
    assert np.allclose(b.d2[1:], 0.0)
    assert np.max(np.abs(blend(np.linspace(-1, 1, 2001)).d1)) == pytest.approx(1.875, rel=1e-5)


def test_step_map_carries_the_interface_back():
    fam = build_diffeos(CIRCLE, 0.01, 0.16, DOMAIN)
    for m in (0, 7, fam.steps - 1):
        t_m, t_next = fam.time(m), fam.time(m + 1)
        s = np.linspace(0.2, 0.99, 41)
        assert np.array_equal(fam.map_coordinate(m, s, t_m), s)
        assert fam.map_coordinate(m, CIRCLE.position(t_next), t_next) == pytest.approx(
            CIRCLE.position(t_m), abs=1e-14)


def test_circle_profile_rescales_by_the_radius_ratio():
    fam = build_diffeos(CIRCLE, 0.01, 0.16, DOMAIN)
    m = 6
    t = fam.time(m) + 0.7 * fam.h
    p, p_m = CIRCLE.position(t), CIRCLE.position(fam.time(m))
    rho = fam.profile(m, np.array([p]), t).rho[0]
    assert rho / p == pytest.approx(p_m / p, rel=1e-14)
    core = np.linspace(0.1, 0.3, 5)
    assert np.array_equal(fam.map_coordinate(m, core, t), core)

    s, eps = np.linspace(0.2, 0.95, 31), 1e-6
    prof = fam.profile(m, s, t)
    ds = (fam.profile(m, s + eps, t).rho - fam.profile(m, s - eps, t).rho) / (2 * eps)
    dt = (fam.profile(m, s, t + eps).rho - fam.profile(m, s, t - eps).rho) / (2 * eps)
    dst = (fam.profile(m, s, t + eps).rho_s - fam.profile(m, s, t - eps).rho_s) / (2 * eps)
    assert np.allclose(prof.rho_s, ds, atol=1e-7)
    assert np.allclose(prof.rho_t, dt, atol=1e-7)
    assert np.allclose(prof.rho_st, dst, atol=1e-6)


def test_inverse_and_composed_maps():
    fam = build_diffeos(CIRCLE, 0.01, 0.16, DOMAIN)
    x = _ring_points(np.linspace(0.2, 0.98, 25))
    m, t = 5, fam.time(5) + 0.4 * fam.h
    y = fam.apply(m, x, t)
    assert np.allclose(fam.inverse(m, y, t), x, atol=1e-12)
    assert np.allclose(fam.composed(m, x, fam.time(m + 1)), x, atol=1e-12)
    assert np.all(fam.jacobian_determinant(m, x, t) > 0.0)


def test_diffeo_bounds_stay_bounded_as_h_halves():
    reports = [verify_diffeo_bounds(build_diffeos(CIRCLE, h, 0.16, DOMAIN)) for h in (0.02, 0.01, 0.005)]
    c0 = np.array([r.C0 for r in reports])
    assert np.all(np.isfinite(c0)) and np.all(c0 > 0)
    assert c0.max() / c0.min() <= 1.5
    cj = np.array([r.CJ for r in reports])
    assert cj.max() / cj.min() <= 1.5
    c1 = np.array([r.C1 for r in reports])
    assert np.all(np.isfinite(c1)) and c1.max() / c1.min() <= 1.5


def test_stationary_family_is_the_identity():
    fam = build_diffeos(InterfaceMotion(), 0.01, 0.1, (-1.0, 1.0))
    x = np.linspace(-0.9, 0.9, 11)[:, None]
    assert np.array_equal(fam.apply(3, x, 0.035), x)
    assert np.array_equal(fam.velocity_coordinate(3, x[:, 0]), np.zeros(11))
    report = verify_diffeo_bounds(fam)
    assert report.C0 == report.C1 == report.C2 == 0.0


def test_prescribed_point_velocity_matches_speed():
    motion = InterfaceMotion(kind=PRESCRIBED_POINT, point_coeffs=(0.0, 0.5), profile_width=0.3)
    fam = build_diffeos(motion, 0.01, 0.1, (-1.0, 1.0))
    m = 4
    p_next = motion.position(fam.time(m + 1))
    # -dp/dt on the interface, zero outside the blending band
    assert fam.velocity_coordinate(m, np.array([p_next]))[0] == pytest.approx(-0.5, rel=1e-12)
    assert fam.velocity_coordinate(m, np.array([0.9]))[0] == 0.0
    assert motion.curvature(0.05) == 0.0
