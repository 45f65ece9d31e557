"""
One minimizing-movement step over the discrete admissible set.

Decision variables are every plus node value, the interior minus node values
and one unit axis per interface pair; the minus interface values are always
A+ (I - 2 n n^T), so the pair is minimal by construction. Descent follows
A <- A exp(tau D) with D the mass-preconditioned negative body-frame
gradient, and n <- normalize(n + tau d) for the axes, with Armijo
backtracking on the total energy.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from src.config.settings import StepConfig
from src.core.errors import InfeasibleStartError, StagnationError
from src.core.functional.energy import (Pair, body_gradient, energy, energy_difference,
                                        euclidean_gradient, gradient_dual_norm, transport_source)
from src.core.grid.fields import PairedField, VelocityField
from src.core.matrix import algebra as alg
from src.models.trace import StepResult

logger = logging.getLogger(__name__)

NOISE_FACTOR = 64.0


@dataclass
class _Search:
    """Descent data at one iterate."""
    grad_plus: np.ndarray  # interface rows hold the parameterized pair gradient
    grad_minus: np.ndarray  # interface rows unused
    grad_axes: np.ndarray
    dual_norm_sq: float


def _assemble(A: PairedField, Atilde: PairedField, h: float, transport: Optional[Pair]) -> _Search:
    grid = A.grid
    k = grid.n_interface
    euclid = euclidean_gradient(A, Atilde, None, h, transport=transport)
    gp, gm = body_gradient(A, euclid)
    refl = alg.reflection(A.axes)
    gp = gp.copy()
    gp[:k] = gp[:k] + refl @ gm[:k] @ refl
    mx = alg.transpose(A.plus[:k]) @ euclid[1][:k]
    ga = -2.0 * np.einsum("kij,kj->ki", mx + alg.transpose(mx), A.axes)
    ga -= np.sum(ga * A.axes, axis=1, keepdims=True) * A.axes
    return _Search(gp, gm, ga, gradient_dual_norm((gp, gm), A, ga) ** 2)


def _move(A: PairedField, search: _Search, tau: float) -> PairedField:
    grid = A.grid
    k = grid.n_interface
    mu_plus = grid.plus.volume.copy()
    mu_plus[:k] += grid.minus.volume[:k]
    step_plus = (-tau / mu_plus)[:, None, None] * search.grad_plus
    step_minus = (-tau / grid.minus.volume[k:])[:, None, None] * search.grad_minus[k:]
    plus = A.plus @ alg.expm_antisym(step_plus)
    minus = A.minus.copy()
    minus[k:] = A.minus[k:] @ alg.expm_antisym(step_minus)
    axes = A.axes - (tau / (grid.plus.volume[:k] + grid.minus.volume[:k]))[:, None] * search.grad_axes
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    minus[:k] = plus[:k] @ alg.reflection(axes)
    return PairedField(grid=grid, plus=plus, minus=minus, axes=axes)


def _reorthogonalize(A: PairedField) -> PairedField:
    k = A.grid.n_interface
    plus = alg.nearest_orthogonal_batch(A.plus)
    minus = alg.nearest_orthogonal_batch(A.minus)
    axes = A.axes / np.linalg.norm(A.axes, axis=1, keepdims=True)
    minus[:k] = plus[:k] @ alg.reflection(axes)
    return PairedField(grid=A.grid, plus=plus, minus=minus, axes=axes)


def minimize_step(Atilde: PairedField, V: Optional[VelocityField], h: float,
                  cfg: Optional[StepConfig] = None, tol_feasible: float = 1e-8) -> StepResult:
    """argmin of E_h(V, Atilde; .) by constrained descent warm-started at Atilde."""
    cfg = cfg or StepConfig()
    try:
        Atilde.check_admissible(tol_orth=tol_feasible, tol_pair=tol_feasible)
    except InfeasibleStartError as e:
        raise InfeasibleStartError(f"warm start is not admissible: {e}", **e.details)
    start = Atilde.canonical()
    if V is not None and V.is_zero():
        V = None
    transport = transport_source(start, V)
    before = energy(start, start, None, h, transport=transport)

    current = start
    search = _assemble(current, start, h, transport)
    tau_first = cfg.first_step(h)
    last_decrease: Optional[float] = None
    iterations = 0
    accepted_any = False
    total_change = 0.0
    while iterations < cfg.max_iters:
        grad_norm = np.sqrt(search.dual_norm_sq)
        if grad_norm <= cfg.tol_grad:
            break
        slope = -search.dual_norm_sq
        if last_decrease is None:
            tau = tau_first
        else:
            tau = cfg.optimism * 2.0 * last_decrease / slope
        accepted = None
        for _ in range(cfg.max_halvings):
            trial = _move(current, search, tau)
            change = energy_difference(trial, current, start, h, transport=transport)
            if change <= cfg.armijo * tau * slope:
                accepted = (trial, change)
                break
            tau *= cfg.backtrack
        if accepted is None:
            scale = max(1.0, abs(before.total))
            if grad_norm <= np.sqrt(NOISE_FACTOR * np.finfo(float).eps * scale):
                logger.debug("line search reached rounding level at iteration %d (grad %.3e)",
                             iterations, grad_norm)
                break
            raise StagnationError("line search failed after %d halvings" % cfg.max_halvings,
                                  iteration=iterations, energy=before.total + total_change,
                                  grad_norm=float(grad_norm), step=tau)
        current, change = accepted
        accepted_any = True
        total_change += change
        last_decrease = change
        iterations += 1
        if iterations % cfg.reorthogonalize_every == 0:
            current = _reorthogonalize(current)
        search = _assemble(current, start, h, transport)
        if iterations % 100 == 0:
            logger.debug("iteration %d: energy change %.3e, grad %.3e", iterations, total_change,
                         np.sqrt(search.dual_norm_sq))

    if accepted_any:
        current = _reorthogonalize(current)
        search = _assemble(current, start, h, transport)
    after = energy(current, start, None, h, transport=transport)
    if after.total > before.total:
        # re-orthogonalization rounding can lift a converged iterate above the start
        logger.debug("final iterate above warm start by %.3e; returning the warm start",
                     after.total - before.total)
        current, after, accepted_any = start, before, False
        search = _assemble(current, start, h, transport)
    return StepResult(field=current, iterations=iterations,
                      final_grad_norm=float(np.sqrt(search.dual_norm_sq)),
                      energy_before=before, energy_after=after, descent_accepted=accepted_any)


def stationarity(A: PairedField, Atilde: PairedField, V: Optional[VelocityField], h: float) -> Tuple[float, Pair]:
    """Dual gradient norm of the parameterized problem and the per-node body gradients."""
    if V is not None and V.is_zero():
        V = None
    transport = transport_source(Atilde, V)
    search = _assemble(A, Atilde, h, transport)
    return float(np.sqrt(search.dual_norm_sq)), (search.grad_plus, search.grad_minus)
