"""
Small dense matrix algebra on O(n) and the axis-relative splitting V1..V5.

Every helper accepts a single ``(n, n)`` matrix or a stack ``(..., n, n)``;
fields on a grid are stored as stacks, so the flow code calls the batched
forms directly while the typed wrappers (``OrthogonalMatrix`` and friends)
serve single-matrix callers and the verification suite.
"""

from dataclasses import dataclass, field
from typing import List, Tuple, Union

import numpy as np
import scipy.linalg

from src.core.errors import DimensionError, ManifoldError, RankDeficientError

TOL_ORTH = 1e-10

ArrayLike = Union[np.ndarray, "OrthogonalMatrix"]


def _raw(a: ArrayLike) -> np.ndarray:
    if isinstance(a, OrthogonalMatrix):
        return a.mat
    return np.asarray(a, dtype=float)


def transpose(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


def sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + transpose(m))


def antisym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m - transpose(m))


def frob_inner(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Frobenius product X:Y over the trailing two axes."""
    return np.einsum("...ij,...ij->...", x, y)


def frob_norm(x: np.ndarray) -> np.ndarray:
    return np.sqrt(frob_inner(x, x))


def as_square(m, name: str = "matrix") -> np.ndarray:
    """Validate a square real matrix (or stack) with n >= 2 and finite entries."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim < 2 or arr.shape[-1] != arr.shape[-2]:
        raise DimensionError(f"{name} must be square", shape=arr.shape)
    if arr.shape[-1] < 2:
        raise DimensionError(f"{name} needs n >= 2", shape=arr.shape)
    if not np.all(np.isfinite(arr)):
        raise ManifoldError(f"{name} has non-finite entries")
    return arr


def _check_same_n(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1] or a.shape[-2] != b.shape[-2]:
        raise DimensionError("dimension mismatch", left=a.shape, right=b.shape)


def unit_axis(axis, n: int = None, tol: float = TOL_ORTH) -> np.ndarray:
    vec = np.asarray(axis, dtype=float)
    if n is not None and vec.shape[-1] != n:
        raise DimensionError("axis length does not match n", axis=vec.shape, n=n)
    norms = np.linalg.norm(vec, axis=-1)
    if np.any(np.abs(norms - 1.0) > tol):
        raise ManifoldError("axis is not a unit vector", norm=float(np.max(np.abs(norms - 1.0))))
    return vec


def orthogonality_residual(a: np.ndarray) -> np.ndarray:
    """||A^T A - I|| per matrix of the stack."""
    n = a.shape[-1]
    return frob_norm(transpose(a) @ a - np.eye(n))


@dataclass(frozen=True)
class OrthogonalMatrix:
    mat: np.ndarray
    det_sign: int

    def __post_init__(self):
        mat = as_square(self.mat, "orthogonal matrix")
        if mat.ndim != 2:
            raise DimensionError("OrthogonalMatrix holds one matrix", shape=mat.shape)
        if self.det_sign not in (1, -1):
            raise ManifoldError("det_sign must be +1 or -1", det_sign=self.det_sign)
        residual = float(orthogonality_residual(mat))
        if residual > TOL_ORTH:
            raise ManifoldError("matrix is not orthogonal", residual=residual)
        det = float(np.linalg.det(mat))
        if np.sign(det) != self.det_sign or abs(abs(det) - 1.0) > TOL_ORTH:
            raise ManifoldError("determinant does not match det_sign", det=det, det_sign=self.det_sign)
        object.__setattr__(self, "mat", mat)

    @classmethod
    def from_matrix(cls, mat) -> "OrthogonalMatrix":
        arr = as_square(mat)
        return cls(mat=arr, det_sign=1 if np.linalg.det(arr) > 0 else -1)

    @property
    def n(self) -> int:
        return self.mat.shape[0]


@dataclass(frozen=True)
class ReflectionMatrix:
    axis: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "axis", unit_axis(self.axis))

    @property
    def matrix(self) -> np.ndarray:
        return reflection(self.axis)

    def projection(self) -> np.ndarray:
        """(I - R)/2, the rank-one projection onto the axis."""
        return np.outer(self.axis, self.axis)


@dataclass(frozen=True)
class VSplit:
    axis: np.ndarray
    parts: Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    dims: Tuple[int, int, int, int, int] = field(default=None)

    def __post_init__(self):
        if self.dims is None:
            object.__setattr__(self, "dims", v_dimensions(len(self.axis)))

    def reconstruct(self) -> np.ndarray:
        return sum(self.parts)

    @property
    def v1(self) -> np.ndarray:
        return self.parts[0]

    @property
    def v2(self) -> np.ndarray:
        return self.parts[1]

    @property
    def v3(self) -> np.ndarray:
        return self.parts[2]

    @property
    def v4(self) -> np.ndarray:
        return self.parts[3]

    @property
    def v5(self) -> np.ndarray:
        return self.parts[4]


def reflection(axis: np.ndarray) -> np.ndarray:
    """I - 2 n (x) n, batched over leading axes of ``axis``."""
    axis = np.asarray(axis, dtype=float)
    n = axis.shape[-1]
    return np.eye(n) - 2.0 * axis[..., :, None] * axis[..., None, :]


def tangent_project(A: ArrayLike, X) -> np.ndarray:
    a = _raw(A)
    x = as_square(X, "X")
    _check_same_n(a, x)
    return a @ antisym(transpose(a) @ x)


def _expm_small(w: np.ndarray) -> np.ndarray:
    n = w.shape[-1]
    if n == 2:
        theta = w[..., 1, 0]
        c, s = np.cos(theta), np.sin(theta)
        out = np.empty(w.shape)
        out[..., 0, 0] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
        out[..., 1, 1] = c
        return out
    # Rodrigues for n = 3
    omega = np.stack([w[..., 2, 1], w[..., 0, 2], w[..., 1, 0]], axis=-1)
    theta = np.linalg.norm(omega, axis=-1)
    small = theta < 1e-4
    safe = np.where(small, 1.0, theta)
    t2 = theta * theta
    a = np.where(small, 1.0 - t2 / 6.0 + t2 * t2 / 120.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - t2 / 24.0 + t2 * t2 / 720.0, (1.0 - np.cos(safe)) / (safe * safe))
    return np.eye(3) + a[..., None, None] * w + b[..., None, None] * (w @ w)


def expm_antisym(W: np.ndarray, tol: float = TOL_ORTH) -> np.ndarray:
    """Batched exponential of antisymmetric matrices.

    Closed forms for n = 2, 3; scaling-and-squaring Pade (scipy) otherwise.
    """
    w = as_square(W, "W")
    asym = frob_norm(w + transpose(w))
    if np.any(asym > tol):
        raise ManifoldError("exponential needs an antisymmetric argument", asymmetry=float(np.max(asym)))
    if w.shape[-1] <= 3:
        return _expm_small(w)
    return scipy.linalg.expm(w)


def exp_antisym(W) -> OrthogonalMatrix:
    w = as_square(W, "W")
    if w.ndim != 2:
        raise DimensionError("exp_antisym takes one matrix; use expm_antisym for stacks", shape=w.shape)
    return OrthogonalMatrix(mat=expm_antisym(w), det_sign=1)


def nearest_orthogonal_batch(M: np.ndarray) -> np.ndarray:
    """Polar factor U of M = U P via SVD, for every matrix of the stack."""
    m = as_square(M, "M")
    u, s, vt = np.linalg.svd(m)
    if np.any(s[..., -1] <= 1e-12 * s[..., 0]):
        raise RankDeficientError(
            "matrix is rank deficient; nearest orthogonal matrix is ambiguous",
            smallest_singular_value=float(np.min(s[..., -1])),
        )
    return u @ vt


def nearest_orthogonal(M) -> OrthogonalMatrix:
    m = as_square(M, "M")
    if m.ndim != 2:
        raise DimensionError("nearest_orthogonal takes one matrix", shape=m.shape)
    q = nearest_orthogonal_batch(m)
    return OrthogonalMatrix(mat=q, det_sign=1 if np.linalg.det(m) > 0 else -1)


def v_dimensions(n: int) -> Tuple[int, int, int, int, int]:
    return (1, n - 1, n - 1, (n - 1) * (n - 2) // 2, n * (n - 1) // 2)


def v_components(M: np.ndarray, axis: np.ndarray) -> Tuple[np.ndarray, ...]:
    """Five orthogonal projections of M relative to ``axis`` (batched).

    With P = n n^T and Q = I - P: V1 = PMP, V2/V3 = sym/antisym of the
    off-diagonal blocks PMQ + QMP, V4/V5 = antisym/sym of QMQ.
    """
    m = np.asarray(M, dtype=float)
    nvec = np.asarray(axis, dtype=float)
    p = nvec[..., :, None] * nvec[..., None, :]
    q = np.eye(m.shape[-1]) - p
    v1 = p @ m @ p
    off = p @ m @ q + q @ m @ p
    block = q @ m @ q
    return v1, sym(off), antisym(off), antisym(block), sym(block)


def v_decompose(M, axis) -> VSplit:
    m = as_square(M, "M")
    nvec = unit_axis(axis, m.shape[-1])
    return VSplit(axis=nvec, parts=v_components(m, nvec))


def project_v4_complement(W, axis) -> np.ndarray:
    """Remove the V4 part of an antisymmetric W; what remains lies in V3."""
    w = as_square(W, "W")
    nvec = unit_axis(axis, w.shape[-1])
    return w - v_components(w, nvec)[3]


def householder_frame(axis) -> np.ndarray:
    """Orthogonal matrix whose first column is ``axis``.

    Reflects e1 onto the axis; the sign choice avoids cancellation and is
    fixed for a given input, so the frame is reproducible.
    """
    nvec = unit_axis(axis)
    n = nvec.shape[0]
    e1 = np.zeros(n)
    e1[0] = 1.0
    s = 1.0 if nvec[0] >= 0 else -1.0
    v = nvec + s * e1
    h = np.eye(n) - 2.0 * np.outer(v, v) / float(v @ v)
    frame = h.copy()
    frame[:, 0] = nvec
    return frame


def v_basis(axis, k: int) -> List[np.ndarray]:
    """Frobenius-orthonormal basis of V_k (k = 1..5) relative to ``axis``."""
    frame = householder_frame(axis)
    n = frame.shape[0]
    nvec, ells = frame[:, 0], [frame[:, j] for j in range(1, n)]
    r2 = 1.0 / np.sqrt(2.0)
    if k == 1:
        return [np.outer(nvec, nvec)]
    if k == 2:
        return [r2 * (np.outer(nvec, l) + np.outer(l, nvec)) for l in ells]
    if k == 3:
        return [r2 * (np.outer(nvec, l) - np.outer(l, nvec)) for l in ells]
    if k == 4:
        return [
            r2 * (np.outer(ells[i], ells[j]) - np.outer(ells[j], ells[i]))
            for i in range(n - 1) for j in range(i + 1, n - 1)
        ]
    if k == 5:
        basis = [np.outer(l, l) for l in ells]
        basis += [
            r2 * (np.outer(ells[i], ells[j]) + np.outer(ells[j], ells[i]))
            for i in range(n - 1) for j in range(i + 1, n - 1)
        ]
        return basis
    raise ValueError(f"no V component {k}")


def antisymmetric_basis(n: int) -> List[np.ndarray]:
    """Orthonormal basis of the antisymmetric n x n matrices."""
    basis = []
    r2 = 1.0 / np.sqrt(2.0)
    for i in range(n):
        for j in range(i + 1, n):
            e = np.zeros((n, n))
            e[j, i] = r2
            e[i, j] = -r2
            basis.append(e)
    return basis


def canonical_axis_sign(axes: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Flip each axis so its first coordinate with |c| > eps is positive."""
    axes = np.array(axes, dtype=float)
    flat = axes.reshape(-1, axes.shape[-1])
    significant = np.abs(flat) > eps
    first = np.argmax(significant, axis=1)
    lead = flat[np.arange(flat.shape[0]), first]
    flat *= np.where(lead < 0, -1.0, 1.0)[:, None]
    return flat.reshape(axes.shape)


def minimal_pair_residual_batch(plus: np.ndarray, minus: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Distance of each A+^T A- to the reflections, with the closest axis."""
    _check_same_n(plus, minus)
    n = plus.shape[-1]
    r = transpose(plus) @ minus
    s = sym(0.5 * (np.eye(n) - r))
    _, vecs = np.linalg.eigh(s)
    axes = canonical_axis_sign(vecs[..., :, -1])
    residual = frob_norm(r - reflection(axes))
    return residual, axes


def minimal_pair_residual(Aplus: ArrayLike, Aminus: ArrayLike) -> Tuple[float, np.ndarray]:
    plus = as_square(_raw(Aplus), "Aplus")
    minus = as_square(_raw(Aminus), "Aminus")
    residual, axis = minimal_pair_residual_batch(plus, minus)
    return float(residual), axis


def same_axis(a: np.ndarray, b: np.ndarray, tol: float) -> np.ndarray:
    """True where two unit axes agree up to sign."""
    return np.minimum(
        np.linalg.norm(a - b, axis=-1), np.linalg.norm(a + b, axis=-1)
    ) <= tol
