"""
Interface motions and the step diffeomorphisms between moving domains.

For a step m and t in (t_m, t_{m+1}] the map Phi^m(., t) sends the domain at
time t to the domain at t_m. It acts on the normal coordinate s (radius for
the circle, x for a point in 1D). The circle is rescaled radially,

    rho(s, t) = s * (1 + (p(t_m) / p(t) - 1) * beta((s - p(t)) / w)),

and a point on a line is shifted,

    rho(s, t) = s + (p(t_m) - p(t)) * beta((s - p(t)) / w),

where p(t) is the interface position and beta a quintic C^2 bump equal to 1
at the interface and 0 outside |u| <= 1. Tangential coordinates are kept.
All derivatives below are analytic.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy import optimize

from src.core.errors import BoundViolationError, GeometryError, LifespanError, StepSizeError

logger = logging.getLogger(__name__)

STATIONARY = "Stationary"
SHRINKING_CIRCLE = "ShrinkingCircle"
PRESCRIBED_POINT = "PrescribedPoint1D"

BETA_SLOPE_MAX = 1.875


@dataclass(frozen=True)
class InterfaceMotion:
    kind: str = STATIONARY
    r0: float = 0.8
    point_coeffs: Tuple[float, ...] = (0.0,)
    profile_width: Optional[float] = None
    position0: float = 0.0

    def __post_init__(self):
        if self.kind not in (STATIONARY, SHRINKING_CIRCLE, PRESCRIBED_POINT):
            raise GeometryError(f"unknown interface motion '{self.kind}'")
        if self.kind == SHRINKING_CIRCLE and self.r0 <= 0:
            raise GeometryError("circle radius must be positive", r0=self.r0)

    @property
    def lifespan(self) -> float:
        if self.kind == SHRINKING_CIRCLE:
            return 0.5 * self.r0 ** 2
        return float("inf")

    @property
    def width(self) -> float:
        if self.profile_width is not None:
            return float(self.profile_width)
        if self.kind == SHRINKING_CIRCLE:
            return 0.2 * self.r0
        return 0.2

    @property
    def is_stationary(self) -> bool:
        if self.kind == STATIONARY:
            return True
        if self.kind == PRESCRIBED_POINT:
            return all(c == 0.0 for c in self.point_coeffs[1:])
        return False

    def _poly(self) -> Polynomial:
        return Polynomial(self.point_coeffs)

    def position(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == SHRINKING_CIRCLE:
            return np.sqrt(self.r0 ** 2 - 2.0 * t)
        if self.kind == PRESCRIBED_POINT:
            return self._poly()(t)
        return np.full(t.shape, float(self.position0)) if t.shape else float(self.position0)

    def speed(self, t):
        """dp/dt."""
        t = np.asarray(t, dtype=float)
        if self.kind == SHRINKING_CIRCLE:
            return -1.0 / self.position(t)
        if self.kind == PRESCRIBED_POINT:
            return self._poly().deriv(1)(t)
        return np.zeros(t.shape) if t.shape else 0.0

    def acceleration(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == SHRINKING_CIRCLE:
            return -1.0 / self.position(t) ** 3
        if self.kind == PRESCRIBED_POINT:
            return self._poly().deriv(2)(t)
        return np.zeros(t.shape) if t.shape else 0.0

    def curvature(self, t):
        """Mean curvature of the interface; zero for flat and point interfaces."""
        if self.kind == SHRINKING_CIRCLE:
            return 1.0 / self.position(t)
        t = np.asarray(t, dtype=float)
        return np.zeros(t.shape) if t.shape else 0.0

    def normal_velocity(self, t):
        """Inward normal speed of the interface, -dp/dt."""
        return -self.speed(t)


class Blend(NamedTuple):
    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    d3: np.ndarray


def blend(u) -> Blend:
    """beta(u) = 1 - 10|u|^3 + 15|u|^4 - 6|u|^5 on |u| <= 1, zero outside."""
    u = np.asarray(u, dtype=float)
    a = np.abs(u)
    inside = a <= 1.0
    sgn = np.sign(u)
    a = np.where(inside, a, 1.0)
    value = 1.0 - 10.0 * a ** 3 + 15.0 * a ** 4 - 6.0 * a ** 5
    d1 = -30.0 * sgn * a ** 2 * (1.0 - a) ** 2
    d2 = -60.0 * a * (1.0 - a) * (1.0 - 2.0 * a)
    d3 = -60.0 * sgn * (1.0 - 6.0 * a + 6.0 * a ** 2)
    zero = np.zeros_like(value)
    return Blend(np.where(inside, value, zero), np.where(inside, d1, zero),
                 np.where(inside, d2, zero), np.where(inside, d3, zero))


class Profile(NamedTuple):
    rho: np.ndarray
    rho_s: np.ndarray
    rho_ss: np.ndarray
    rho_t: np.ndarray
    rho_st: np.ndarray
    rho_tt: np.ndarray
    rho_stt: np.ndarray


@dataclass
class DiffeoReport:
    C0: float
    C1: float
    C2: float
    CJ: float
    velocity_sup: float
    h: float
    h0: float
    steps: int
    worst: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {"C0": self.C0, "C1": self.C1, "C2": self.C2, "CJ": self.CJ,
                "velocity_sup": self.velocity_sup, "h": self.h, "h0": self.h0,
                "steps": self.steps, "worst": dict(self.worst)}


@dataclass(frozen=True)
class DiffeoFamily:
    motion: InterfaceMotion
    h: float
    T: float
    steps: int
    h0: float
    domain: Tuple[float, float]
    radial: bool

    @property
    def width(self) -> float:
        return self.motion.width

    def time(self, m: int) -> float:
        return m * self.h

    def step_of(self, t: float) -> int:
        """Slab index m with t in (t_m, t_{m+1}]; t = 0 belongs to slab 0."""
        m = int(np.ceil(t / self.h - 1e-12)) - 1
        return min(max(m, 0), self.steps - 1)

    def profile(self, m: int, s, t: float) -> Profile:
        s = np.asarray(s, dtype=float)
        motion = self.motion
        w = self.width
        p = motion.position(t)
        dp, ddp = motion.speed(t), motion.acceleration(t)
        u = (s - p) / w
        u_t, u_tt = -dp / w, -ddp / w
        b = blend(u)
        if self.radial:
            return self._ratio_profile(m, s, p, dp, ddp, b, u_t, u_tt)
        delta = motion.position(self.time(m)) - p
        d_delta, dd_delta = -dp, -ddp
        rho = s + delta * b.value
        rho_s = 1.0 + delta * b.d1 / w
        rho_ss = delta * b.d2 / w ** 2
        rho_t = d_delta * b.value + delta * b.d1 * u_t
        rho_st = (d_delta * b.d1 + delta * b.d2 * u_t) / w
        rho_tt = (dd_delta * b.value + 2.0 * d_delta * b.d1 * u_t
                  + delta * b.d2 * u_t ** 2 + delta * b.d1 * u_tt)
        rho_stt = (dd_delta * b.d1 + 2.0 * d_delta * b.d2 * u_t
                   + delta * b.d3 * u_t ** 2 + delta * b.d2 * u_tt) / w
        return Profile(rho, rho_s, rho_ss, rho_t, rho_st, rho_tt, rho_stt)

    def _ratio_profile(self, m: int, s: np.ndarray, p, dp, ddp, b: Blend, u_t, u_tt) -> Profile:
        """rho = s * g with g = 1 + (r(t_m)/r(t) - 1) * beta."""
        w = self.width
        p_m = self.motion.position(self.time(m))
        a = p_m / p - 1.0
        a_t = -p_m * dp / p ** 2
        a_tt = p_m * (2.0 * dp ** 2 / p ** 3 - ddp / p ** 2)
        g = 1.0 + a * b.value
        g_s = a * b.d1 / w
        g_ss = a * b.d2 / w ** 2
        g_t = a_t * b.value + a * b.d1 * u_t
        g_st = (a_t * b.d1 + a * b.d2 * u_t) / w
        g_tt = a_tt * b.value + 2.0 * a_t * b.d1 * u_t + a * b.d2 * u_t ** 2 + a * b.d1 * u_tt
        g_stt = (a_tt * b.d1 + 2.0 * a_t * b.d2 * u_t + a * b.d3 * u_t ** 2 + a * b.d2 * u_tt) / w
        return Profile(rho=s * g, rho_s=g + s * g_s, rho_ss=2.0 * g_s + s * g_ss,
                       rho_t=s * g_t, rho_st=g_t + s * g_st, rho_tt=s * g_tt, rho_stt=g_tt + s * g_stt)

    def map_coordinate(self, m: int, s, t: float) -> np.ndarray:
        if self.motion.is_stationary:
            return np.array(s, dtype=float)
        return self.profile(m, s, t).rho

    def inverse_coordinate(self, m: int, y, t: float) -> np.ndarray:
        """Solve rho(s, t) = y for s by vectorized Newton iteration."""
        y = np.array(y, dtype=float)
        if self.motion.is_stationary:
            return y
        flat = np.atleast_1d(y).ravel()
        s = optimize.newton(
            lambda s: self.profile(m, s, t).rho - flat,
            flat.copy(),
            fprime=lambda s: self.profile(m, s, t).rho_s,
            tol=1e-15, maxiter=60, disp=False,
        )
        s = np.asarray(s, dtype=float)
        residual = np.abs(self.profile(m, s, t).rho - flat)
        if np.any(residual > 1e-12 * max(1.0, float(np.max(np.abs(flat))))):
            raise GeometryError("inverse map did not converge", step=m, t=t,
                                residual=float(np.max(residual)))
        return s.reshape(y.shape)

    def composed_coordinate(self, m: int, s, t: float) -> np.ndarray:
        """Coordinate of Phi-bar^m(x, t) = (Phi^m(., t_{m+1}))^{-1}(Phi^m(x, t))."""
        return self.inverse_coordinate(m, self.map_coordinate(m, s, t), self.time(m + 1))

    def _split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.radial:
            s = np.linalg.norm(x, axis=1)
            return s, x / s[:, None]
        return x[:, 0], np.ones((x.shape[0], 1))

    def apply(self, m: int, x, t: float) -> np.ndarray:
        s, direction = self._split(x)
        return direction * self.map_coordinate(m, s, t)[:, None]

    def inverse(self, m: int, y, t: float) -> np.ndarray:
        s, direction = self._split(y)
        return direction * self.inverse_coordinate(m, s, t)[:, None]

    def composed(self, m: int, x, t: float) -> np.ndarray:
        s, direction = self._split(x)
        return direction * self.composed_coordinate(m, s, t)[:, None]

    def jacobian(self, m: int, x, t: float) -> np.ndarray:
        """Cartesian D Phi^m(x, t), shape (N, d, d)."""
        s, direction = self._split(x)
        prof = self.profile(m, s, t)
        if not self.radial:
            return prof.rho_s[:, None, None]
        g = prof.rho / s
        radial = direction[:, :, None] * direction[:, None, :]
        eye = np.eye(direction.shape[1])
        return g[:, None, None] * (eye - radial) + prof.rho_s[:, None, None] * radial

    def jacobian_determinant(self, m: int, x, t: float) -> np.ndarray:
        return np.linalg.det(self.jacobian(m, x, t))

    def velocity_coordinate(self, m: int, s) -> np.ndarray:
        """Left-limit time derivative of the normal coordinate at t_{m+1}."""
        if self.motion.is_stationary:
            return np.zeros(np.shape(s))
        return self.profile(m, s, self.time(m + 1)).rho_t


def _step_bound(motion: InterfaceMotion, h: float, T: float, radial: bool) -> float:
    """Worst analytic bound of |D Phi - I| over the steps of size h covering (0, T]."""
    steps = max(int(np.ceil(T / h - 1e-12)), 1)
    ends = np.arange(1, steps + 1) * h
    starts = ends - h
    p_start, p_end = motion.position(starts), motion.position(ends)
    w = motion.width
    if not radial:
        return float(np.max(np.abs(p_start - p_end) * BETA_SLOPE_MAX / w))
    # rho_s - 1 = a (beta + (s / w) beta') with s / w = p / w + u
    u = np.linspace(-1.0, 1.0, 2001)
    b = blend(u)
    shape = np.abs(b.value[None, :] + (p_start[:, None] / w + u[None, :]) * b.d1[None, :])
    ratio = np.abs(p_start / p_end - 1.0)
    return float(np.max(ratio * np.maximum(np.max(shape, axis=1), 1.0)))


def largest_step(motion: InterfaceMotion, T: float, radial: bool, cap: float = 0.5) -> float:
    """Largest h with the analytic D Phi - I bound at most ``cap``."""
    if motion.is_stationary:
        return float("inf")
    if _step_bound(motion, T, T, radial) <= cap:
        return T
    lo, hi = 0.0, T
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if mid > 0 and _step_bound(motion, mid, T, radial) <= cap:
            lo = mid
        else:
            hi = mid
    return lo


def build_diffeos(motion: InterfaceMotion, h: float, T: float,
                  domain: Tuple[float, float] = (0.05, 1.0), margin: float = 0.1) -> DiffeoFamily:
    """Step diffeomorphisms for ``motion`` over (0, T] with step h.

    ``domain`` is the admissible range of the normal coordinate: (r_core, R)
    for the circle, (-L, L) for a point on a line.
    """
    if h <= 0 or T <= 0:
        raise StepSizeError("h and T must be positive", h=h, T=T)
    T0 = motion.lifespan
    if motion.kind == SHRINKING_CIRCLE and T >= T0 * (1.0 - margin):
        raise LifespanError(
            f"horizon T={T:g} reaches the lifespan margin: T0 = r0^2/2 = {T0:g}, "
            f"need T < {T0 * (1.0 - margin):g}", T=T, T0=T0, margin=margin)
    radial = motion.kind == SHRINKING_CIRCLE
    steps = max(int(round(T / h)), 1)
    w = motion.width
    lo, hi = domain
    if not motion.is_stationary:
        times = np.linspace(0.0, T, 4 * steps + 1)
        positions = motion.position(times)
        if np.min(positions) - w <= lo or np.max(positions) + w >= hi:
            raise GeometryError(
                "blending band leaves the domain",
                band=(float(np.min(positions) - w), float(np.max(positions) + w)), domain=domain)
    h0 = largest_step(motion, T, radial)
    if h > h0 * (1.0 + 1e-12):
        raise StepSizeError(f"step h={h:g} exceeds h0={h0:g}", h=h, h0=h0)
    family = DiffeoFamily(motion=motion, h=h, T=T, steps=steps, h0=h0, domain=domain, radial=radial)
    logger.debug("diffeomorphism family: %s, h=%g, steps=%d, h0=%g", motion.kind, h, steps, h0)
    return family


def verify_diffeo_bounds(fam: DiffeoFamily, samples: int = 401, time_fractions=(0.25, 0.5, 0.75, 1.0),
                         c0_cap: Optional[float] = None) -> DiffeoReport:
    """Sup norms of D Phi - I, time derivatives of D Phi and D^2 Phi over a space-time lattice."""
    lo, hi = fam.domain
    s = np.linspace(lo, hi, samples)
    if fam.radial:
        s = s[s > 0]
    c0 = c1 = c2 = cj = vel = 0.0
    worst = {}
    if not fam.motion.is_stationary:
        for m in range(fam.steps):
            for frac in time_fractions:
                t = fam.time(m) + frac * fam.h
                prof = fam.profile(m, s, t)
                if fam.radial:
                    g = prof.rho / s
                    g_s = (prof.rho_s - g) / s
                    g_ss = (prof.rho_ss - 2.0 * g_s) / s
                    dev = np.maximum(np.abs(g - 1.0), np.abs(prof.rho_s - 1.0))
                    d1 = np.maximum(np.abs(prof.rho_t / s), np.abs(prof.rho_st))
                    d2 = np.maximum(np.abs(prof.rho_tt / s), np.abs(prof.rho_stt))
                    # Frobenius norm of D^2 (x g(|x|)) in the radial/tangential frame
                    hess = np.sqrt((2.0 * g_s + s * g_ss) ** 2 + 3.0 * g_s ** 2)
                    jac = g * prof.rho_s
                else:
                    dev = np.abs(prof.rho_s - 1.0)
                    d1, d2 = np.abs(prof.rho_st), np.abs(prof.rho_stt)
                    hess = np.abs(prof.rho_ss)
                    jac = prof.rho_s
                i = int(np.argmax(dev))
                if dev[i] / fam.h > c0:
                    c0 = float(dev[i] / fam.h)
                    worst = {"m": m, "t": t, "x": float(s[i])}
                c1 = max(c1, float(np.max(d1)), float(np.max(d2)))
                c2 = max(c2, float(np.max(hess)))
                cj = max(cj, float(np.max(np.abs(jac - 1.0))) / fam.h)
                if frac == 1.0:
                    vel = max(vel, float(np.max(np.abs(prof.rho_t))))
    if c0_cap is not None and c0 > c0_cap:
        raise BoundViolationError(f"|D Phi - I|/h = {c0:.4g} exceeds the cap {c0_cap:g}", **worst)
    report = DiffeoReport(C0=c0, C1=c1, C2=c2, CJ=cj, velocity_sup=vel, h=fam.h, h0=fam.h0,
                          steps=fam.steps, worst=worst)
    logger.info("diffeomorphism bounds: C0=%.4g C1=%.4g C2=%.4g CJ=%.4g", c0, c1, c2, cj)
    return report
