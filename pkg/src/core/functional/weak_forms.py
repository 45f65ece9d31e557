"""
Space-time weak residuals of a computed flow.

For a test field Psi the assembled form on each slab is

    sum_i mu_i  d_t At_i F_i^T : Psi_i  +  sum_e w/l^2 (G_b - G_a) F_b^T : (Psi_b - Psi_a)

integrated in time by Gauss-Legendre quadrature. ``pairing="interpolant"``
takes F = G = A^{m+1} (the piecewise-constant interpolant); ``"linear"``
takes F = G = the linear interpolant at the quadrature time. ``history`` is
any object exposing ``h``, ``fields``, ``warm_starts`` and ``velocities``
(see ``src.core.flow.interpolants.FlowHistory``).
"""

from typing import Any, Dict, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from src.core.errors import AdmissibilityError, FlowError
from src.core.functional.energy import phase_transport
from src.core.functional.test_fields import SpaceTimeTestField
from src.core.grid.domain import PhaseMesh
from src.core.matrix import algebra as alg

INTERPOLANT = "interpolant"
LINEAR = "linear"
QUADRATURE_POINTS = 3


def _gauss(points: int) -> Tuple[np.ndarray, np.ndarray]:
    x, w = leggauss(points)
    return 0.5 * (x + 1.0), 0.5 * w


def _phase_form(mesh: PhaseMesh, rate: np.ndarray, factor: np.ndarray, psi: np.ndarray,
                body_frame: bool) -> float:
    a, b = mesh.edges[:, 0], mesh.edges[:, 1]
    coef = mesh.edge_weight / mesh.edge_length ** 2
    diff = factor[b] - factor[a]
    if body_frame:
        mass = np.sum(mesh.volume * alg.frob_inner(rate, psi @ factor))
        stiff = np.sum(coef * alg.frob_inner(diff, psi[b] @ factor[b] - psi[a] @ factor[a]))
    else:
        mass = np.sum(mesh.volume * alg.frob_inner(rate @ alg.transpose(factor), psi))
        stiff = np.sum(coef * alg.frob_inner(diff @ alg.transpose(factor[b]), psi[b] - psi[a]))
    return float(mass + stiff)


def _slab_terms(history: Any, m: int, theta: float, pairing: str):
    start, end = history.warm_starts[m], history.fields[m + 1]
    h = history.h
    velocity = history.velocities[m] if m < len(history.velocities) else None
    out = []
    for name in ("plus", "minus"):
        mesh = end.grid.phase(name)
        a0, a1 = start.values(name), end.values(name)
        rate = (a1 - a0) / h
        if velocity is not None:
            v = velocity.plus if name == "plus" else velocity.minus
            rate = rate + (1.0 - theta) * phase_transport(a0, v, mesh) + theta * phase_transport(a1, v, mesh)
        if pairing == INTERPOLANT:
            factor = a1
        elif pairing == LINEAR:
            factor = (1.0 - theta) * a0 + theta * a1
        else:
            raise FlowError(f"unknown pairing '{pairing}'", pairing=pairing)
        out.append((mesh, rate, factor))
    return end, out


def spatial_axes(field: Any) -> np.ndarray:
    """A+ n per interface pair: the axis of the pair reflection acting from the left."""
    k = field.grid.n_interface
    return np.einsum("kij,kj->ki", field.plus[:k], field.axes)


def _check_interface(psi_plus: np.ndarray, psi_minus: np.ndarray, axes: np.ndarray, k: int) -> None:
    jump = alg.v_components(psi_plus[:k] - psi_minus[:k], axes)[3]
    scale = max(1.0, float(np.max(alg.frob_norm(psi_plus[:k])))) if k else 1.0
    violation = alg.frob_norm(jump)
    if k and np.max(violation) > 1e-10 * scale:
        raise AdmissibilityError("test field jump has a V4 component at the interface",
                                 violation=float(np.max(violation)), node=int(np.argmax(violation)))


def _assemble(history: Any, psi: SpaceTimeTestField, pairing: str, body_frame: bool,
              points: int, check: bool) -> float:
    nodes, weights = _gauss(points)
    total = 0.0
    for m in range(len(history.warm_starts)):
        t_m = m * history.h
        for theta, weight in zip(nodes, weights):
            t = t_m + theta * history.h
            end, terms = _slab_terms(history, m, theta, pairing)
            grid = end.grid
            axes = spatial_axes(end)
            psi_plus, psi_minus = psi.evaluate_phases(grid, t, axes)
            if check:
                _check_interface(psi_plus, psi_minus, axes, grid.n_interface)
            slab = 0.0
            for (mesh, rate, factor), values in zip(terms, (psi_plus, psi_minus)):
                slab += _phase_form(mesh, rate, factor, values, body_frame)
            total += history.h * weight * slab
    return total


def weak_neumann_residual(history: Any, psi: SpaceTimeTestField, pairing: str = INTERPOLANT,
                          points: int = QUADRATURE_POINTS) -> float:
    """|assembled space-time form| for an antisymmetric, interface-admissible Psi."""
    for gen in (psi.generator, psi.jump if psi.jump is not None else psi.generator):
        gen = np.asarray(gen, dtype=float)
        if np.max(np.abs(gen + gen.T)) > 1e-12:
            raise AdmissibilityError("weak Neumann test fields must be antisymmetric")
    return abs(_assemble(history, psi, pairing, body_frame=False, points=points, check=True))


def weak_formula_residual(history: Any, phi: SpaceTimeTestField, pairing: str = INTERPOLANT,
                          points: int = QUADRATURE_POINTS) -> Dict[str, float]:
    """Interior form for a general matrix-valued Phi, split into its two parts.

    The antisymmetric part is assembled in the body frame (right
    multiplication by the pairing factor) and must match
    ``weak_neumann_residual`` of the same part to rounding; the symmetric
    part vanishes in the continuum and is reported as measured.
    """
    gen = np.asarray(phi.generator, dtype=float)
    jump = None if phi.jump is None else alg.antisym(np.asarray(phi.jump, dtype=float))
    anti = SpaceTimeTestField(phi.phi, phi.chi, alg.antisym(gen), jump)
    symm = SpaceTimeTestField(phi.phi, phi.chi, alg.sym(gen))
    body = _assemble(history, anti, pairing, body_frame=True, points=points, check=False)
    neumann = _assemble(history, anti, pairing, body_frame=False, points=points, check=True)
    symmetric = _assemble(history, symm, pairing, body_frame=True, points=points, check=False)
    return {
        "antisymmetric": abs(body),
        "symmetric": abs(symmetric),
        "neumann": abs(neumann),
        "mismatch": abs(body - neumann),
    }
