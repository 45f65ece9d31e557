"""
Randomized oracles for the matrix algebra behind the interface condition:
the V1..V5 splitting, tangent and normal spaces of O(n), and the four
equivalent forms of the Neumann jump for a minimal pair.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from src.core.errors import ManifoldError
from src.core.matrix import algebra as alg
from src.utils.helpers import VERIFY_STREAM, seed_stream

logger = logging.getLogger(__name__)

TOL_HOLD = 1e-12
AMPLIFICATION = 10.0
TOL_PAIR = 1e-8


@dataclass
class ConditionVerdict:
    holds: bool
    residual: float

    def to_dict(self) -> Dict[str, Any]:
        return {"holds": bool(self.holds), "residual": float(self.residual)}


@dataclass
class EquivalenceReport:
    conditions: Dict[str, ConditionVerdict]
    W: Optional[np.ndarray]
    consistent: bool
    axis: np.ndarray

    def to_dict(self) -> Dict[str, Any]:
        return {
            "conditions": {k: v.to_dict() for k, v in self.conditions.items()},
            "W": None if self.W is None else self.W.tolist(),
            "consistent": bool(self.consistent),
        }


@dataclass
class CheckReport:
    name: str
    n: int
    trials: int
    seed: int
    values: Dict[str, float] = field(default_factory=dict)
    bounds: Dict[str, float] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.values[k] <= self.bounds[k] for k in self.bounds)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name, "n": self.n, "trials": self.trials, "seed": self.seed,
            "values": {k: float(v) for k, v in self.values.items()},
            "bounds": {k: float(v) for k, v in self.bounds.items()},
            "extra": self.extra,
            "passed": self.passed,
        }


def _v4_defect(W: np.ndarray, axis: np.ndarray) -> float:
    """Distance of W from V4 relative to ``axis``."""
    return float(alg.frob_norm(W - alg.v_components(W, axis)[3]))


def check_equivalences(Aplus, Aminus, DnuPlus, DnuMinus, tol: float = TOL_HOLD,
                       amplification: float = AMPLIFICATION) -> EquivalenceReport:
    """Residuals of the four jump conditions at one minimal pair.

    M3 is tested in the body frame against the pair axis n; M4 against the
    spatial axis A+ n, since A- = (I - 2 m m^T) A+ with m = A+ n.
    """
    ap = alg.as_square(getattr(Aplus, "mat", Aplus), "Aplus")
    am = alg.as_square(getattr(Aminus, "mat", Aminus), "Aminus")
    dp = alg.as_square(DnuPlus, "DnuPlus")
    dm = alg.as_square(DnuMinus, "DnuMinus")
    residual, axis = alg.minimal_pair_residual(ap, am)
    if residual > TOL_PAIR:
        raise ManifoldError("(A+, A-) is not a minimal pair", residual=residual)
    scale = max(1.0, float(alg.frob_norm(dp)), float(alg.frob_norm(dm)))
    t = alg.transpose

    m1 = max(float(alg.frob_norm((t(ap) @ dp - t(dp) @ ap) - (t(am) @ dm - t(dm) @ am))),
             float(alg.frob_norm((ap @ t(dp) - dp @ t(ap)) - (am @ t(dm) - dm @ t(am)))))
    m2 = float(alg.frob_norm(dp - dm))
    w_plus, w_minus = t(ap) @ dp, t(am) @ dm
    m3 = max(float(alg.frob_norm(w_plus - w_minus)), _v4_defect(w_plus, axis))
    z_plus, z_minus = dp @ t(ap), dm @ t(am)
    m4 = max(float(alg.frob_norm(z_plus - z_minus)), _v4_defect(z_plus, ap @ axis))

    residuals = {"M1": m1 / scale, "M2": m2 / scale, "M3": m3 / scale, "M4": m4 / scale}
    conditions = {k: ConditionVerdict(v <= tol, v) for k, v in residuals.items()}
    any_holds = any(v.holds for v in conditions.values())
    any_fails = any(v.residual > amplification * tol for v in conditions.values())
    W = alg.antisym(w_plus) if conditions["M3"].holds else None
    return EquivalenceReport(conditions=conditions, W=W, consistent=not (any_holds and any_fails), axis=axis)


def _random_orthogonal(rng: np.random.Generator, n: int, det_sign: int = 1) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    q = q * np.sign(np.diag(r))[None, :]
    if np.sign(np.linalg.det(q)) != det_sign:
        q[:, 0] = -q[:, 0]
    return q


def _random_axis(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=n)
    return v / np.linalg.norm(v)


def random_v4(rng: np.random.Generator, axis: np.ndarray) -> np.ndarray:
    n = axis.shape[0]
    return alg.v_components(alg.antisym(rng.normal(size=(n, n))), axis)[3]


def check_v_perp(n_dim: int, trials: int = 1000, seed: int = 0) -> CheckReport:
    if n_dim < 2:
        raise ManifoldError("n must be at least 2", n=n_dim)
    report = CheckReport("v_perp", n_dim, trials, seed)
    dims = alg.v_dimensions(n_dim)
    expected = (1, n_dim - 1, n_dim - 1, (n_dim - 1) * (n_dim - 2) // 2, n_dim * (n_dim - 1) // 2)
    worst = {"reconstruction": 0.0, "orthogonality": 0.0, "antisymmetric_split": 0.0,
             "symmetric_split": 0.0, "projection_remark": 0.0, "basis_orthonormality": 0.0,
             "basis_membership": 0.0}
    basis_dims_ok = True
    for i in range(trials):
        rng = np.random.default_rng(seed_stream(seed, VERIFY_STREAM, i))
        axis = _random_axis(rng, n_dim)
        M = rng.normal(size=(n_dim, n_dim))
        parts = alg.v_components(M, axis)
        worst["reconstruction"] = max(worst["reconstruction"], float(alg.frob_norm(sum(parts) - M)))
        for a in range(5):
            for b in range(a + 1, 5):
                worst["orthogonality"] = max(worst["orthogonality"], abs(float(alg.frob_inner(parts[a], parts[b]))))
        X = alg.antisym(M)
        px = alg.v_components(X, axis)
        worst["antisymmetric_split"] = max(worst["antisymmetric_split"],
                                           float(alg.frob_norm(X - px[2] - px[3])),
                                           float(alg.frob_norm(px[0] + px[1] + px[4])))
        S = alg.sym(M)
        ps = alg.v_components(S, axis)
        worst["symmetric_split"] = max(worst["symmetric_split"],
                                       float(alg.frob_norm(S - ps[0] - ps[1] - ps[4])),
                                       float(alg.frob_norm(ps[2] + ps[3])))
        Y = random_v4(rng, axis)
        nn = np.outer(axis, axis)
        worst["projection_remark"] = max(worst["projection_remark"], abs(float(alg.frob_inner(nn @ S, Y))))
        if i < 5:
            for k in range(1, 6):
                basis = alg.v_basis(axis, k)
                basis_dims_ok &= len(basis) == dims[k - 1]
                if basis:
                    stack = np.array([b.ravel() for b in basis])
                    gram = stack @ stack.T
                    worst["basis_orthonormality"] = max(worst["basis_orthonormality"],
                                                        float(np.max(np.abs(gram - np.eye(len(basis))))))
                    for b in basis:
                        part = alg.v_components(b, axis)[k - 1]
                        worst["basis_membership"] = max(worst["basis_membership"], float(alg.frob_norm(b - part)))
    report.values.update(worst)
    report.bounds.update({k: 1e-12 for k in worst})
    report.values["dimension_mismatch"] = float(dims != expected or sum(dims) != n_dim ** 2 or not basis_dims_ok)
    report.bounds["dimension_mismatch"] = 0.0
    report.extra["dims"] = list(dims)
    return report


def check_tangent_normal(n_dim: int, trials: int = 1000, seed: int = 0, eps: float = 1e-3) -> CheckReport:
    if n_dim < 2:
        raise ManifoldError("n must be at least 2", n=n_dim)
    report = CheckReport("tangent_normal", n_dim, trials, seed)
    anti_basis = alg.antisymmetric_basis(n_dim)
    sym_basis = [np.outer(e, f) + np.outer(f, e)
                 for a, e in enumerate(np.eye(n_dim)) for f in np.eye(n_dim)[a:]]
    worst = {"normal_pairing": 0.0, "tangent_characterization": 0.0, "projection_idempotence": 0.0,
             "curve_drift": 0.0, "curve_velocity": 0.0, "basis_annihilation": 0.0}
    rank_defect = 0
    for i in range(trials):
        rng = np.random.default_rng(seed_stream(seed, VERIFY_STREAM, i))
        A = _random_orthogonal(rng, n_dim, det_sign=1 if i % 2 == 0 else -1)
        B = alg.sym(rng.normal(size=(n_dim, n_dim)))
        W = alg.antisym(rng.normal(size=(n_dim, n_dim)))
        X = A @ W
        normal = B @ A
        worst["normal_pairing"] = max(worst["normal_pairing"], abs(float(alg.frob_inner(normal, X))))
        worst["tangent_characterization"] = max(worst["tangent_characterization"],
                                                float(alg.frob_norm(alg.sym(A.T @ X))))
        P = alg.tangent_project(A, rng.normal(size=(n_dim, n_dim)))
        worst["projection_idempotence"] = max(worst["projection_idempotence"],
                                              float(alg.frob_norm(alg.tangent_project(A, P) - P)))
        alpha = A @ alg.expm_antisym(eps * (A.T @ X))
        worst["curve_drift"] = max(worst["curve_drift"], float(alg.orthogonality_residual(alpha)))
        ahead = A @ alg.expm_antisym(1e-6 * (A.T @ X))
        behind = A @ alg.expm_antisym(-1e-6 * (A.T @ X))
        velocity = (ahead - behind) / 2e-6
        worst["curve_velocity"] = max(worst["curve_velocity"],
                                      float(alg.frob_norm(velocity - X)) / max(1.0, float(alg.frob_norm(X))))
        if i < 20:
            tangent = np.array([(A @ E).ravel() for E in anti_basis])
            normals = np.array([(S @ A).ravel() for S in sym_basis])
            worst["basis_annihilation"] = max(worst["basis_annihilation"],
                                              float(np.max(np.abs(tangent @ normals.T))))
            full = np.vstack([tangent, normals])
            if (np.linalg.matrix_rank(tangent) != len(anti_basis)
                    or np.linalg.matrix_rank(normals) != len(sym_basis)
                    or np.linalg.matrix_rank(full) != n_dim * n_dim):
                rank_defect += 1
    report.values.update(worst)
    report.bounds.update({k: 1e-12 for k in worst})
    report.bounds["curve_drift"] = 1e-9
    report.bounds["curve_velocity"] = 1e-6
    report.values["rank_defect"] = float(rank_defect)
    report.bounds["rank_defect"] = 0.0
    report.extra["dims"] = [n_dim * (n_dim - 1) // 2, n_dim * (n_dim + 1) // 2]
    return report


def check_equivalence_graph(n_dim: int, trials: int = 1000, seed: int = 0) -> CheckReport:
    """Random minimal pairs with V4 (all conditions hold) or generic (all fail) normal derivatives."""
    report = CheckReport("equivalence_graph", n_dim, trials, seed)
    inconsistent = 0
    positive_missed = 0
    negative_missed = 0
    recovered = 0.0
    for i in range(trials):
        rng = np.random.default_rng(seed_stream(seed, VERIFY_STREAM, i))
        ap = _random_orthogonal(rng, n_dim)
        axis = _random_axis(rng, n_dim)
        am = ap @ alg.reflection(axis)
        if i % 2 == 0:
            W = random_v4(rng, axis)
        else:
            W = alg.antisym(rng.normal(size=(n_dim, n_dim)))
            W = W + alg.v_components(W, axis)[2]  # guarantee a nonzero V3 part
        rep = check_equivalences(ap, am, ap @ W, am @ W)
        inconsistent += not rep.consistent
        holds = [v.holds for v in rep.conditions.values()]
        if i % 2 == 0:
            positive_missed += not all(holds)
            if rep.W is not None:
                recovered = max(recovered, float(alg.frob_norm(rep.W - W)))
        else:
            negative_missed += any(holds) and float(alg.frob_norm(alg.v_components(W, axis)[2])) > 1e-6
    report.values.update({"inconsistent": float(inconsistent), "positive_missed": float(positive_missed),
                          "negative_missed": float(negative_missed), "recovered_W": recovered})
    report.bounds.update({"inconsistent": 0.0, "positive_missed": 0.0, "negative_missed": 0.0,
                          "recovered_W": 1e-12})
    return report


def run_suite(sizes: List[int], trials: int, seed: int) -> List[CheckReport]:
    reports = []
    for n in sizes:
        for check in (check_v_perp, check_tangent_normal, check_equivalence_graph):
            rep = check(n, trials, seed)
            logger.info("%s n=%d: %s", rep.name, n, "passed" if rep.passed else "FAILED")
            reports.append(rep)
    return reports
