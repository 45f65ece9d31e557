"""
Discrete minimizing-movement functional

    E_h(V, At; A) = sum_e w/l^2 |A_b - A_a|^2 + h^-1 |A - At|^2_L2 + 2 <V.grad At, A - At>_L2

with its Euclidean and body-frame (Riemannian) gradients and the discrete
Euler-Lagrange residual. ``V`` absent means the transport term is dropped.
"""

import logging
from typing import Optional, Tuple

import numpy as np

from src.core.errors import AdmissibilityError, FlowError, ManifoldError
from src.core.functional.test_fields import TestLibrary
from src.core.grid.domain import PhaseMesh, frame_gradient, require_same_grid
from src.core.grid.fields import PairedField, VelocityField, dirichlet_energy, l2_distance_sq
from src.core.matrix import algebra as alg
from src.core.stepper.admissible import admissible_direction_project, v4_violation
from src.models.trace import EnergyBreakdown

logger = logging.getLogger(__name__)

TOL_EL = 1e-6
TOL_TEST_V4 = 1e-10

Pair = Tuple[np.ndarray, np.ndarray]


def _check_h(h: float) -> None:
    if not h > 0:
        raise FlowError("time step must be positive", h=h)


def phase_transport(values: np.ndarray, velocity: np.ndarray, mesh: PhaseMesh) -> np.ndarray:
    """V . grad(values) with centered differences, one-sided at boundaries."""
    out = np.zeros_like(values)
    for axis, d in enumerate(frame_gradient(values, mesh)):
        out += velocity[:, axis, None, None] * d
    return out


def transport_source(Atilde: PairedField, V: Optional[VelocityField]) -> Optional[Pair]:
    if V is None:
        return None
    return (phase_transport(Atilde.plus, V.plus, Atilde.grid.plus),
            phase_transport(Atilde.minus, V.minus, Atilde.grid.minus))


def energy(A: PairedField, Atilde: PairedField, V: Optional[VelocityField], h: float,
           transport: Optional[Pair] = None) -> EnergyBreakdown:
    require_same_grid(A.grid, Atilde.grid)
    _check_h(h)
    dirichlet = dirichlet_energy(A)
    proximity = l2_distance_sq(A, Atilde) / h
    if transport is None:
        transport = transport_source(Atilde, V)
    cross = 0.0
    if transport is not None:
        for mesh, a, at, t in ((A.grid.plus, A.plus, Atilde.plus, transport[0]),
                               (A.grid.minus, A.minus, Atilde.minus, transport[1])):
            cross += 2.0 * float(np.sum(mesh.volume * alg.frob_inner(t, a - at)))
    return EnergyBreakdown(dirichlet=dirichlet, proximity=proximity, transport=cross,
                           total=dirichlet + proximity + cross)


def _phase_dirichlet_gradient(values: np.ndarray, mesh: PhaseMesh) -> np.ndarray:
    a, b = mesh.edges[:, 0], mesh.edges[:, 1]
    coef = (2.0 * mesh.edge_weight / mesh.edge_length ** 2)[:, None, None]
    diff = coef * (values[a] - values[b])
    out = np.zeros_like(values)
    np.add.at(out, a, diff)
    np.add.at(out, b, -diff)
    return out


def euclidean_gradient(A: PairedField, Atilde: PairedField, V: Optional[VelocityField], h: float,
                       transport: Optional[Pair] = None) -> Pair:
    """Partial derivatives of E_h in each node value, per phase."""
    _check_h(h)
    if transport is None:
        transport = transport_source(Atilde, V)
    out = []
    for k, (mesh, a, at) in enumerate(((A.grid.plus, A.plus, Atilde.plus),
                                        (A.grid.minus, A.minus, Atilde.minus))):
        g = _phase_dirichlet_gradient(a, mesh) + (2.0 / h) * mesh.volume[:, None, None] * (a - at)
        if transport is not None:
            g += 2.0 * mesh.volume[:, None, None] * transport[k]
        out.append(g)
    return out[0], out[1]


def body_gradient(A: PairedField, euclid: Pair) -> Pair:
    """antisym(A^T E) per node: the first variation along A exp(eps W) is <G, W>."""
    return (alg.antisym(alg.transpose(A.plus) @ euclid[0]),
            alg.antisym(alg.transpose(A.minus) @ euclid[1]))


def riemannian_gradient(A: PairedField, Atilde: PairedField, V: Optional[VelocityField], h: float,
                        project_interface: bool = True) -> Pair:
    """Body-frame gradient; interface pairs projected onto the admissible cone."""
    if A.orthogonality_residual_max() > 1e-8:
        raise ManifoldError("gradient needs a manifold-valid field",
                            residual=A.orthogonality_residual_max())
    gp, gm = body_gradient(A, euclidean_gradient(A, Atilde, V, h))
    if project_interface:
        k = A.grid.n_interface
        gp[:k], gm[:k] = admissible_direction_project(gp[:k], gm[:k], A.axes)
    return gp, gm


def first_variation(A: PairedField, Atilde: PairedField, V: Optional[VelocityField], h: float,
                    W_plus: np.ndarray, W_minus: np.ndarray) -> float:
    """d/d(eps) of E_h(A exp(eps W)) at eps = 0, assembled from the Euclidean gradient."""
    ep, em = euclidean_gradient(A, Atilde, V, h)
    return float(np.sum(alg.frob_inner(ep, A.plus @ W_plus)) + np.sum(alg.frob_inner(em, A.minus @ W_minus)))


def euler_lagrange_residual(A: PairedField, Atilde: PairedField, V: Optional[VelocityField], h: float,
                            testset: TestLibrary, skip_pair_tol: float = 1e-6) -> float:
    """max over the library of |weak Euler-Lagrange form(W)| / ||W||_L2.

    The weak form is half the first variation (the energy carries the factor
    2 of |grad A|^2 differentiated). Interface pairs whose minimal-pair
    residual exceeds ``skip_pair_tol`` are excluded from the admissibility
    check and the count is logged.
    """
    require_same_grid(A.grid, testset.grid)
    gp, gm = body_gradient(A, euclidean_gradient(A, Atilde, V, h))
    pair_residual, _ = A.pair_residuals()
    bad_pairs = pair_residual > skip_pair_tol
    if np.any(bad_pairs):
        logger.warning("skipping %d interface pairs with minimal-pair residual above %.1e",
                       int(np.sum(bad_pairs)), skip_pair_tol)
    worst = 0.0
    for tf in testset:
        norm = tf.l2_norm(A.grid)
        if norm == 0.0:
            raise AdmissibilityError("test field vanishes identically", label=tf.label)
        wp, wm = tf.interface_values(A.grid, A.n)
        violation = v4_violation(wp, wm, A.axes)
        violation = np.where(bad_pairs, 0.0, violation)
        if np.any(violation > TOL_TEST_V4 * max(1.0, float(np.max(alg.frob_norm(wp))))):
            raise AdmissibilityError("test field jump has a V4 component at the interface",
                                     label=tf.label, violation=float(np.max(violation)),
                                     node=int(np.argmax(violation)))
        form = np.sum(alg.frob_inner(gp[tf.plus_index], tf.plus_values))
        form += np.sum(alg.frob_inner(gm[tf.minus_index], tf.minus_values))
        worst = max(worst, abs(0.5 * float(form)) / norm)
    return worst


def gradient_dual_norm(G: Pair, A: PairedField, axis_gradient: Optional[np.ndarray] = None) -> float:
    """sqrt(sum |G_i|^2 / mu_i) with interface pairs weighted by mu+ + mu-."""
    grid = A.grid
    k = grid.n_interface
    sq = np.sum(alg.frob_inner(G[0][k:], G[0][k:]) / grid.plus.volume[k:])
    sq += np.sum(alg.frob_inner(G[1][k:], G[1][k:]) / grid.minus.volume[k:])
    mu_pair = grid.plus.volume[:k] + grid.minus.volume[:k]
    sq += np.sum(alg.frob_inner(G[0][:k], G[0][:k]) / mu_pair)
    if axis_gradient is not None:
        sq += np.sum(np.sum(axis_gradient ** 2, axis=1) / mu_pair)
    return float(np.sqrt(sq))


def energy_difference(A_new: PairedField, A_old: PairedField, Atilde: PairedField, h: float,
                      transport: Optional[Pair] = None) -> float:
    """E_h(A_new) - E_h(A_old) assembled from the increment.

    Every term is written as <new - old, new + old - ...>, so the result keeps
    relative accuracy when the two fields are close and the energies are not.
    """
    _check_h(h)
    total = 0.0
    phases = ((A_new.grid.plus, A_new.plus, A_old.plus, Atilde.plus),
              (A_new.grid.minus, A_new.minus, A_old.minus, Atilde.minus))
    for k, (mesh, new, old, at) in enumerate(phases):
        delta = new - old
        a, b = mesh.edges[:, 0], mesh.edges[:, 1]
        d_delta = delta[b] - delta[a]
        d_sum = (new[b] - new[a]) + (old[b] - old[a])
        total += float(np.sum(mesh.edge_weight / mesh.edge_length ** 2 * alg.frob_inner(d_delta, d_sum)))
        total += float(np.sum(mesh.volume * alg.frob_inner(delta, (new - at) + (old - at)))) / h
        if transport is not None:
            total += 2.0 * float(np.sum(mesh.volume * alg.frob_inner(transport[k], delta)))
    return total
