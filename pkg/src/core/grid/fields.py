"""Matrix-valued fields on two-phase grids, energies and initial data."""

import logging
from dataclasses import dataclass, replace
from typing import Dict, Optional, Sequence

import numpy as np

from src.core.errors import InfeasibleStartError, ManifoldError
from src.core.grid.domain import PhaseMesh, TwoPhaseGrid, require_same_grid
from src.core.matrix import algebra as alg

logger = logging.getLogger(__name__)

TOL_PAIR = 1e-8

CONSTANT_PAIR = "constant-pair"
SMOOTH_RANDOM = "smooth-random"
USER_FILE = "user-file"


@dataclass(frozen=True)
class MatrixField:
    grid: TwoPhaseGrid
    phase: str
    values: np.ndarray  # (N, n, n)

    @property
    def det_sign(self) -> int:
        return 1 if self.phase == "plus" else -1

    def manifold_residual(self) -> float:
        """Worst node violation of orthogonality or of the phase's determinant sign."""
        if self.values.shape[0] == 0:
            return 0.0
        orth = alg.orthogonality_residual(self.values)
        det = np.linalg.det(self.values)
        wrong_sign = np.where(np.sign(det) != self.det_sign, 1.0, 0.0)
        return float(np.max(np.maximum(orth, wrong_sign)))

    def is_manifold_valid(self, tol: float = alg.TOL_ORTH) -> bool:
        return self.manifold_residual() <= tol


@dataclass(frozen=True)
class VelocityField:
    """Unit-frame velocity components per structured axis, per phase."""
    plus: np.ndarray  # (N+, d)
    minus: np.ndarray  # (N-, d)

    def is_zero(self) -> bool:
        return not (np.any(self.plus) or np.any(self.minus))

    def sup_norm(self) -> float:
        return float(max(np.max(np.linalg.norm(self.plus, axis=1)),
                         np.max(np.linalg.norm(self.minus, axis=1))))


@dataclass(frozen=True)
class PairedField:
    grid: TwoPhaseGrid
    plus: np.ndarray  # (N+, n, n), det +1
    minus: np.ndarray  # (N-, n, n), det -1
    axes: np.ndarray  # (K, n), stored interface axis per pair

    @property
    def n(self) -> int:
        return self.plus.shape[-1]

    def phase(self, name: str) -> MatrixField:
        return MatrixField(self.grid, name, self.plus if name == "plus" else self.minus)

    def values(self, name: str) -> np.ndarray:
        return self.plus if name == "plus" else self.minus

    def canonical(self) -> "PairedField":
        """Minus interface values rebuilt as A+ (I - 2 n n^T) from the stored axes."""
        k = self.grid.n_interface
        minus = self.minus.copy()
        minus[:k] = self.plus[:k] @ alg.reflection(self.axes)
        return replace(self, minus=minus)

    def orthogonality_residual_max(self) -> float:
        return float(max(np.max(alg.orthogonality_residual(self.plus)),
                         np.max(alg.orthogonality_residual(self.minus))))

    def pair_residuals(self):
        k = self.grid.n_interface
        return alg.minimal_pair_residual_batch(self.plus[:k], self.minus[:k])

    def pair_residual_max(self) -> float:
        residual, _ = self.pair_residuals()
        return float(np.max(residual))

    def check_admissible(self, tol_orth: float = 1e-8, tol_pair: float = TOL_PAIR) -> None:
        """Raise unless manifold-valid with minimal pairs matching the stored axes."""
        for name in ("plus", "minus"):
            residual = self.phase(name).manifold_residual()
            if residual > tol_orth:
                raise InfeasibleStartError(f"{name} phase is not manifold-valid", residual=residual)
        residual, axes = self.pair_residuals()
        worst = float(np.max(residual))
        if worst > tol_pair:
            raise InfeasibleStartError("interface pairs are not minimal pairs", residual=worst,
                                       node=int(np.argmax(residual)))
        unit = np.abs(np.linalg.norm(self.axes, axis=1) - 1.0)
        if np.any(unit > tol_orth):
            raise InfeasibleStartError("stored interface axes are not unit vectors")
        mismatch = ~alg.same_axis(axes, self.axes, max(1e-6, 1e3 * tol_pair))
        if np.any(mismatch):
            raise InfeasibleStartError("stored axes disagree with the extracted axes",
                                       node=int(np.argmax(mismatch)))


def phase_dirichlet(values: np.ndarray, mesh: PhaseMesh) -> float:
    a, b = mesh.edges[:, 0], mesh.edges[:, 1]
    diff = values[b] - values[a]
    return float(np.sum(mesh.edge_weight / mesh.edge_length ** 2 * alg.frob_inner(diff, diff)))


def dirichlet_by_phase(F: PairedField) -> Dict[str, float]:
    return {"plus": phase_dirichlet(F.plus, F.grid.plus),
            "minus": phase_dirichlet(F.minus, F.grid.minus)}


def dirichlet_energy(F: PairedField) -> float:
    parts = dirichlet_by_phase(F)
    return parts["plus"] + parts["minus"]


def phase_l2_sq(a: np.ndarray, b: np.ndarray, mesh: PhaseMesh) -> float:
    diff = a - b
    return float(np.sum(mesh.volume * alg.frob_inner(diff, diff)))


def l2_distance_sq(F: PairedField, G: PairedField) -> float:
    require_same_grid(F.grid, G.grid)
    return phase_l2_sq(F.plus, G.plus, F.grid.plus) + phase_l2_sq(F.minus, G.minus, F.grid.minus)


def _fourier_features(coords: np.ndarray, rng: np.random.Generator, components: int,
                      modes: int = 4) -> np.ndarray:
    """Smooth random scalar fields (N, components) bounded by 1 in absolute value."""
    d = coords.shape[1]
    freq = rng.normal(0.0, 2.0, size=(components, modes, d))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(components, modes))
    amp = rng.uniform(-1.0, 1.0, size=(components, modes)) / modes
    arg = np.einsum("nd,cmd->ncm", coords, freq) + phase[None]
    return np.einsum("ncm,cm->nc", np.sin(arg), amp)


def _antisym_from(coeffs: np.ndarray, n: int) -> np.ndarray:
    basis = np.array(alg.antisymmetric_basis(n))
    return np.einsum("nc,cij->nij", coeffs, basis)


def constant_pair(grid: TwoPhaseGrid, n: int, axis: Optional[Sequence[float]] = None) -> PairedField:
    axis_vec = np.zeros(n)
    axis_vec[0] = 1.0
    if axis is not None:
        axis_vec = np.asarray(axis, dtype=float)
        axis_vec = axis_vec / np.linalg.norm(axis_vec)
    refl = alg.reflection(axis_vec)
    return PairedField(
        grid=grid,
        plus=np.broadcast_to(np.eye(n), (grid.plus.size, n, n)).copy(),
        minus=np.broadcast_to(refl, (grid.minus.size, n, n)).copy(),
        axes=np.broadcast_to(axis_vec, (grid.n_interface, n)).copy(),
    )


def smooth_random(grid: TwoPhaseGrid, n: int, seed_sequence: np.random.SeedSequence,
                  amplitude: float = 0.5, axis: Optional[Sequence[float]] = None) -> PairedField:
    """A+ = exp(W+), A- = exp(W+) R(n(x)) exp(d(x) W-), with smooth W+-, n and d = dist to the interface.

    The same smooth functions are evaluated at both copies of an interface
    node, so A- = A+ (I - 2 n n^T) holds there to rounding.
    """
    plus_seq, axis_seq, minus_seq = seed_sequence.spawn(3)
    m = n * (n - 1) // 2
    base_axis = np.zeros(n)
    base_axis[0] = 1.0
    if axis is not None:
        base_axis = np.asarray(axis, dtype=float) / np.linalg.norm(axis)
    tilt = min(amplitude, 0.9) / np.sqrt(n)

    def features(coords, seq, components):
        return _fourier_features(coords, np.random.default_rng(seq), components)

    def generator(coords):
        return _antisym_from(amplitude * features(coords, plus_seq, m), n)

    def axes_at(coords):
        vec = base_axis + tilt * features(coords, axis_seq, n)
        return vec / np.linalg.norm(vec, axis=1, keepdims=True)

    plus_coords = grid.plus.coords
    minus_coords = grid.minus.coords
    dist = np.abs(grid.minus.axis0_coordinate() - grid.minus.lines[0][0])
    plus = alg.expm_antisym(generator(plus_coords))
    outer = alg.expm_antisym(generator(minus_coords))
    inner = alg.expm_antisym(_antisym_from(
        amplitude * dist[:, None] * features(minus_coords, minus_seq, m), n))
    minus = outer @ alg.reflection(axes_at(minus_coords)) @ inner
    axes = axes_at(plus_coords[:grid.n_interface])
    return PairedField(grid=grid, plus=plus, minus=minus, axes=axes).canonical()


def make_initial(grid: TwoPhaseGrid, recipe: str, n: int,
                 seed_sequence: Optional[np.random.SeedSequence] = None,
                 amplitude: float = 0.5, axis: Optional[Sequence[float]] = None,
                 path: Optional[str] = None, tol_pair: float = TOL_PAIR) -> PairedField:
    """Initial data in the discrete admissible set for one of the supported recipes."""
    if recipe == CONSTANT_PAIR:
        field = constant_pair(grid, n, axis)
    elif recipe == SMOOTH_RANDOM:
        if seed_sequence is None:
            seed_sequence = np.random.SeedSequence(0)
        field = smooth_random(grid, n, seed_sequence, amplitude, axis)
    elif recipe == USER_FILE:
        from src.core.grid.snapshot import read_paired_field

        field = read_paired_field(path, grid)
        if field.n != n:
            raise InfeasibleStartError("snapshot matrix size differs from the configured n",
                                       snapshot_n=field.n, n=n)
    else:
        raise ManifoldError(f"unknown initial recipe '{recipe}'", recipe=recipe)
    field.check_admissible(tol_pair=tol_pair)
    logger.info("initial data '%s': n=%d, dirichlet=%.6e", recipe, n, dirichlet_energy(field))
    return field
