"""
Discrete test fields: spatial hat bumps times a basis of antisymmetric
matrices, plus interface pairs whose jump avoids V4.
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from src.core.grid.domain import PhaseMesh, TwoPhaseGrid
from src.core.matrix import algebra as alg


@dataclass(frozen=True)
class TestField:
    """A body-frame variation supported on a few nodes of each phase."""
    plus_index: np.ndarray
    plus_values: np.ndarray  # (len(plus_index), n, n)
    minus_index: np.ndarray
    minus_values: np.ndarray
    label: str = ""

    def l2_norm(self, grid: TwoPhaseGrid) -> float:
        sq = np.sum(grid.plus.volume[self.plus_index] * alg.frob_inner(self.plus_values, self.plus_values))
        sq += np.sum(grid.minus.volume[self.minus_index] * alg.frob_inner(self.minus_values, self.minus_values))
        return float(np.sqrt(sq))

    def dense(self, grid: TwoPhaseGrid, n: int) -> Tuple[np.ndarray, np.ndarray]:
        wp = np.zeros((grid.plus.size, n, n))
        wm = np.zeros((grid.minus.size, n, n))
        wp[self.plus_index] = self.plus_values
        wm[self.minus_index] = self.minus_values
        return wp, wm

    def interface_values(self, grid: TwoPhaseGrid, n: int) -> Tuple[np.ndarray, np.ndarray]:
        wp, wm = self.dense(grid, n)
        k = grid.n_interface
        return wp[:k], wm[:k]


@dataclass
class TestLibrary:
    grid: TwoPhaseGrid
    n: int
    fields: List[TestField] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.fields)

    def __iter__(self):
        return iter(self.fields)


def hat_profile(count: int, center: int, half_width: int) -> np.ndarray:
    i = np.arange(count)
    return np.maximum(0.0, 1.0 - np.abs(i - center) / (half_width + 1.0))


def _bump(mesh: PhaseMesh, centers: Sequence[int], half_width: int) -> Tuple[np.ndarray, np.ndarray]:
    """Tensor-product hat on the structured mesh; returns (node indices, values)."""
    profiles = []
    for axis, (count, center) in enumerate(zip(mesh.shape, centers)):
        prof = hat_profile(count, center, half_width)
        if mesh.periodic[axis]:
            prof = np.maximum(prof, hat_profile(count, center + count, half_width))
            prof = np.maximum(prof, hat_profile(count, center - count, half_width))
        profiles.append(prof)
    values = profiles[0]
    for prof in profiles[1:]:
        values = np.multiply.outer(values, prof)
    values = values.ravel()
    index = np.nonzero(values)[0]
    return index, values[index]


def _spread(count: int, k: int, start: int) -> List[int]:
    if count - start <= 1:
        return [start]
    return sorted(set(int(round(v)) for v in np.linspace(start, count - 2, k)))


def build_test_library(grid: TwoPhaseGrid, n: int, axes: Optional[np.ndarray] = None,
                       bumps_per_axis: int = 3, half_width: int = 2,
                       seed_sequence: Optional[np.random.SeedSequence] = None) -> TestLibrary:
    """Interior bumps in both phases and, when ``axes`` is given, interface pairs.

    Interior bumps avoid the interface nodes. An interface test uses the same
    bump on both sides with generator B, and the minus side subtracts the V3
    part of a random antisymmetric D at each pair, so W+ - W- lies in V3.
    """
    basis = alg.antisymmetric_basis(n)
    library = TestLibrary(grid=grid, n=n)
    for mesh in (grid.plus, grid.minus):
        centers0 = _spread(mesh.shape[0], bumps_per_axis, half_width + 1)
        others = [_spread(c, bumps_per_axis, 0) for c in mesh.shape[1:]]
        grids = np.meshgrid(centers0, *others, indexing="ij")
        for centers in zip(*(g.ravel() for g in grids)):
            index, values = _bump(mesh, centers, half_width)
            interior = index >= grid.n_interface
            index, values = index[interior], values[interior]
            if index.size == 0:
                continue
            for b, gen in enumerate(basis):
                vals = values[:, None, None] * gen
                empty_i, empty_v = np.zeros(0, dtype=int), np.zeros((0, n, n))
                if mesh.name == "plus":
                    tf = TestField(index, vals, empty_i, empty_v, f"plus{tuple(centers)}:{b}")
                else:
                    tf = TestField(empty_i, empty_v, index, vals, f"minus{tuple(centers)}:{b}")
                library.fields.append(tf)
    if axes is None:
        return library
    rng = np.random.default_rng(seed_sequence if seed_sequence is not None else 0)
    tangential = [_spread(c, bumps_per_axis, 0) for c in grid.plus.shape[1:]]
    grids = np.meshgrid([0], *tangential, indexing="ij")
    for centers in zip(*(g.ravel() for g in grids)):
        ip, vp = _bump(grid.plus, centers, half_width)
        im, vm = _bump(grid.minus, centers, half_width)
        for b, gen in enumerate(basis):
            wp = vp[:, None, None] * gen
            wm = vm[:, None, None] * gen
            d = alg.antisym(rng.normal(size=(n, n)))
            on_interface = im < grid.n_interface
            pair_axes = axes[im[on_interface]]
            jump = alg.v_components(np.broadcast_to(d, (pair_axes.shape[0], n, n)), pair_axes)[2]
            wm = wm.copy()
            wm[on_interface] -= vm[on_interface, None, None] * jump
            library.fields.append(TestField(ip, wp, im, wm, f"interface{tuple(centers)}:{b}"))
    return library


@dataclass(frozen=True)
class SpaceTimeTestField:
    """Psi(x, t) = chi(t) * phi(x) * generator, evaluated in cartesian coordinates.

    ``phi`` maps an (N, d) coordinate array to N values; ``chi`` maps a time to
    a scalar and must vanish at t = 0 and t = T. With ``jump`` set, the minus
    interface nodes subtract chi * phi * (V3 part of ``jump``) taken against
    the spatial pair axis, so Psi+ - Psi- is a nonzero V3 matrix there.
    """
    phi: Callable[[np.ndarray], np.ndarray]
    chi: Callable[[float], float]
    generator: np.ndarray
    jump: Optional[np.ndarray] = None

    def evaluate(self, coords: np.ndarray, t: float) -> np.ndarray:
        return (self.chi(t) * self.phi(coords))[:, None, None] * self.generator

    def evaluate_phases(self, grid: TwoPhaseGrid, t: float,
                        spatial_axes: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Psi on both phases; ``spatial_axes`` (A+ n per pair) is needed when ``jump`` is set."""
        psi_plus = self.evaluate(grid.plus.coords, t)
        psi_minus = self.evaluate(grid.minus.coords, t)
        k = grid.n_interface
        if self.jump is None or k == 0:
            return psi_plus, psi_minus
        n = psi_minus.shape[-1]
        scale = self.chi(t) * self.phi(grid.minus.coords[:k])
        v3 = alg.v_components(np.broadcast_to(np.asarray(self.jump, dtype=float), (k, n, n)), spatial_axes)[2]
        psi_minus = psi_minus.copy()
        psi_minus[:k] -= scale[:, None, None] * v3
        return psi_plus, psi_minus


def sine_window(T: float) -> Callable[[float], float]:
    """sin^2(pi t / T): zero with zero slope at both ends of (0, T)."""
    return lambda t: float(np.sin(np.pi * t / T) ** 2)


def gaussian_bump(center: Sequence[float], width: float) -> Callable[[np.ndarray], np.ndarray]:
    c = np.asarray(center, dtype=float)

    def phi(coords: np.ndarray) -> np.ndarray:
        r2 = np.sum((coords - c[None, :]) ** 2, axis=1)
        return np.exp(-r2 / (2.0 * width ** 2))

    return phi


def compact_bump(center: Sequence[float], radius: float) -> Callable[[np.ndarray], np.ndarray]:
    """C^1 bump (1 - r^2/R^2)^2 supported in the ball of the given radius."""
    c = np.asarray(center, dtype=float)

    def phi(coords: np.ndarray) -> np.ndarray:
        r2 = np.sum((coords - c[None, :]) ** 2, axis=1) / radius ** 2
        return np.where(r2 < 1.0, (1.0 - r2) ** 2, 0.0)

    return phi
