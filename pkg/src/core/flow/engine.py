import logging
from typing import Callable, List, Optional, Tuple

import numpy as np

from src.config.settings import FlowConfig, StepConfig
from src.core.errors import FlowError, GeometryError
from src.core.flow.interpolants import FlowHistory, InterpolantSet
from src.core.flow.transfer import pullback
from src.core.functional.energy import euler_lagrange_residual
from src.core.functional.test_fields import build_test_library
from src.core.grid.domain import POLAR_DISK, TwoPhaseGrid, rebuild
from src.core.grid.fields import PairedField, VelocityField, dirichlet_by_phase, l2_distance_sq
from src.core.motion.diffeo import DiffeoFamily, InterfaceMotion, build_diffeos
from src.core.stepper.descent import minimize_step
from src.models.trace import FlowTrace, TraceRow

logger = logging.getLogger(__name__)

TINY_ENERGY = 1e-24

StepCallback = Callable[[int, TraceRow], None]
FieldCallback = Callable[[int, PairedField], None]


def velocity_field(fam: DiffeoFamily, m: int, grid: TwoPhaseGrid) -> Optional[VelocityField]:
    """Unit-frame velocity on the grid of t_{m+1}: d/dt of the normal coordinate, zero tangentially."""
    if fam.motion.is_stationary:
        return None
    parts = []
    for mesh in (grid.plus, grid.minus):
        v = np.zeros((mesh.size, len(mesh.shape)))
        v[:, 0] = fam.velocity_coordinate(m, mesh.axis0_coordinate())
        parts.append(v)
    return VelocityField(plus=parts[0], minus=parts[1])


def jacobian_deviation(fam: DiffeoFamily, m: int, grid: TwoPhaseGrid) -> float:
    if fam.motion.is_stationary:
        return 0.0
    t = fam.time(m + 1)
    dev = 0.0
    for mesh in (grid.plus, grid.minus):
        jac = fam.jacobian_determinant(m, mesh.coords, t)
        dev = max(dev, float(np.max(np.abs(jac - 1.0))))
    return dev


def required_growth_rate(d_prev: float, d_next: float, h: float) -> float:
    """Smallest C >= 0 with exp(-C t_{m+1}) d_next <= exp(-C t_m) d_prev."""
    if d_prev <= TINY_ENERGY or d_next <= d_prev:
        return 0.0
    return float(np.log(d_next / d_prev) / h)


class FlowEngine:
    """Minimizing-movement time marching with a fixed or prescribed moving interface."""

    def __init__(self, flow: FlowConfig, stepper: Optional[StepConfig] = None,
                 motion: Optional[InterfaceMotion] = None, margin: float = 0.1,
                 library_seed: Optional[np.random.SeedSequence] = None,
                 on_step: Optional[StepCallback] = None, on_field: Optional[FieldCallback] = None):
        self.flow = flow
        self.stepper = stepper or StepConfig()
        self.motion = motion or InterfaceMotion()
        self.margin = margin
        self.library_seed = library_seed
        self.on_step = on_step
        self.on_field = on_field

    def run_fixed(self, A0: PairedField) -> Tuple[InterpolantSet, FlowTrace]:
        if not self.motion.is_stationary:
            raise FlowError("run_fixed needs a stationary interface", motion=self.motion.kind)
        return self._march(A0, None)

    def run_moving(self, A0: PairedField) -> Tuple[InterpolantSet, FlowTrace]:
        grid = A0.grid
        if grid.geometry == POLAR_DISK:
            domain = (grid.params["radius"] * grid.params["core_fraction"], grid.params["radius"])
        else:
            domain = (-grid.params["half_width"], grid.params["half_width"])
        fam = build_diffeos(self.motion, self.flow.h, self.flow.T, domain=domain, margin=self.margin)
        p0 = float(self.motion.position(0.0))
        if abs(p0 - grid.interface_position) > 1e-12:
            raise GeometryError("initial grid interface differs from the motion at t = 0",
                                grid_interface=grid.interface_position, motion_interface=p0)
        return self._march(A0, fam)

    def _library(self, field: PairedField):
        seed = self.library_seed if self.library_seed is not None else np.random.SeedSequence(0, spawn_key=(2,))
        return build_test_library(field.grid, field.n, axes=field.axes,
                                  bumps_per_axis=self.flow.el_library_bumps, seed_sequence=seed)

    def _row(self, m: int, field: PairedField, total: float, kinetic: float, el: float,
             c_tilde: float, jac: float) -> TraceRow:
        parts = dirichlet_by_phase(field)
        return TraceRow(m=m, t=m * self.flow.h, E_dirichlet_plus=parts["plus"],
                        E_dirichlet_minus=parts["minus"], E_total=total, kinetic_increment=kinetic,
                        orth_residual_max=field.orthogonality_residual_max(),
                        pair_residual_max=field.pair_residual_max(), el_residual=el,
                        c_tilde_running=c_tilde, jac_dev_max=jac)

    def _march(self, A0: PairedField, fam: Optional[DiffeoFamily]) -> Tuple[InterpolantSet, FlowTrace]:
        h, N = self.flow.h, self.flow.N
        history = FlowHistory(h=h, T=self.flow.T, lam=self.flow.lam, fields=[A0])
        trace = FlowTrace()
        d0 = sum(dirichlet_by_phase(A0).values())
        row = self._row(0, A0, d0, 0.0, 0.0, 0.0, 0.0)
        trace.append(row)
        if self.on_step:
            self.on_step(0, row)
        if self.on_field:
            self.on_field(0, A0)

        current = A0
        reference = A0
        c_tilde = 0.0
        attachment = 0.0
        transfer_errors: List[float] = []
        iterations: List[int] = []
        grad_norms: List[float] = []
        for m in range(N):
            t_next = (m + 1) * h
            if fam is None:
                warm, V, err = current, None, 0.0
            else:
                grid_next = rebuild(current.grid, float(self.motion.position(t_next)))
                warm, err = pullback(current, fam, m, grid_next)
                reference, _ = pullback(reference, fam, m, grid_next)
                V = velocity_field(fam, m, grid_next)
                if err > 0.0:
                    logger.info("step %d: re-gridding transfer error %.3e", m, err)
            transfer_errors.append(err)
            try:
                result = minimize_step(warm, V, h, self.stepper)
            except FlowError as e:
                raise e.with_details(step=m)
            nxt = result.field
            iterations.append(result.iterations)
            grad_norms.append(result.final_grad_norm)
            kinetic = l2_distance_sq(nxt, warm) / h
            el = euler_lagrange_residual(nxt, warm, V, h, self._library(nxt))
            d_prev = trace.rows[-1].dirichlet
            d_next = sum(dirichlet_by_phase(nxt).values())
            c_tilde = max(c_tilde, required_growth_rate(d_prev, d_next, h))
            if d0 > TINY_ENERGY:
                attachment = max(attachment, l2_distance_sq(nxt, reference) / (t_next * d0))
            jac = 0.0 if fam is None else jacobian_deviation(fam, m, nxt.grid)
            row = self._row(m + 1, nxt, result.energy_after.total, kinetic, el, c_tilde, jac)
            trace.append(row)
            history.warm_starts.append(warm)
            history.velocities.append(V)
            history.fields.append(nxt)
            logger.info("step %d/%d: dirichlet=%.6e kinetic=%.3e iterations=%d grad=%.2e",
                        m + 1, N, d_next, kinetic, result.iterations, result.final_grad_norm)
            if self.on_step:
                self.on_step(m + 1, row)
            if self.on_field:
                self.on_field(m + 1, nxt)
            current = nxt

        interpolants = InterpolantSet(history)
        history.diagnostics.update({
            "gap": interpolants.gap(),
            "c_tilde": c_tilde,
            "attachment_C": attachment,
            "transfer_error_max": max(transfer_errors) if transfer_errors else 0.0,
            "transfer_errors": transfer_errors,
            "iterations": iterations,
            "final_grad_norm_max": max(grad_norms) if grad_norms else 0.0,
            "dirichlet_initial": d0,
        })
        return interpolants, trace


def run_fixed(A0: PairedField, flow: FlowConfig, stepper: Optional[StepConfig] = None,
              **kwargs) -> Tuple[InterpolantSet, FlowTrace]:
    return FlowEngine(flow, stepper, **kwargs).run_fixed(A0)


def run_moving(A0: PairedField, flow: FlowConfig, motion: InterfaceMotion,
               stepper: Optional[StepConfig] = None, **kwargs) -> Tuple[InterpolantSet, FlowTrace]:
    return FlowEngine(flow, stepper, motion=motion, **kwargs).run_moving(A0)
