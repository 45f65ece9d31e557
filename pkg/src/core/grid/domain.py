"""
Structured two-phase grids.

Each phase is a tensor grid whose axis 0 runs along the interface normal and
starts on the interface, so the first ``n_interface`` nodes of both phases are
the duplicated interface locations, paired by index. Axis 0 is x (1D), y
(2D box) or r (polar disk); axis 1, when present, is x or theta.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.core.errors import GeometryError, GridMismatchError

FLAT_BOX = "FlatBox"
POLAR_DISK = "PolarDisk"


@dataclass(frozen=True)
class PhaseMesh:
    name: str
    coords: np.ndarray  # (N, d) cartesian
    volume: np.ndarray  # (N,)
    edges: np.ndarray  # (E, 2)
    edge_weight: np.ndarray  # (E,)
    edge_length: np.ndarray  # (E,)
    shape: Tuple[int, ...]
    lines: Tuple[np.ndarray, ...]  # coordinate values per structured axis
    periodic: Tuple[bool, ...]
    metric: Tuple[np.ndarray, ...]  # per-node factor turning d/d(line) into a unit-frame derivative

    @property
    def size(self) -> int:
        return self.coords.shape[0]

    def axis0_coordinate(self) -> np.ndarray:
        """Axis-0 coordinate of every node (x, y or r)."""
        return np.repeat(self.lines[0], int(np.prod(self.shape[1:], dtype=int)))


@dataclass(frozen=True)
class TwoPhaseGrid:
    geometry: str
    dim: int
    plus: PhaseMesh
    minus: PhaseMesh
    n_interface: int
    interface_area: np.ndarray
    interface_position: float
    analytic_volume: float
    params: Dict[str, Any] = field(default_factory=dict)

    @property
    def key(self) -> Tuple:
        return (self.geometry, self.dim, float(self.interface_position),
                tuple(sorted((k, float(v)) for k, v in self.params.items())))

    def phase(self, name: str) -> PhaseMesh:
        if name == "plus":
            return self.plus
        if name == "minus":
            return self.minus
        raise KeyError(name)

    @property
    def interface_index(self) -> np.ndarray:
        return np.arange(self.n_interface)

    def total_volume(self) -> float:
        return float(np.sum(self.plus.volume) + np.sum(self.minus.volume))

    def interface_coordinate(self) -> Optional[np.ndarray]:
        """Tangential coordinate of the interface nodes (None in 1D)."""
        if self.dim == 1:
            return None
        return self.plus.lines[1]

    def header(self) -> Dict[str, Any]:
        out = {"geometry": self.geometry, "dim": self.dim,
               "interface_position": float(self.interface_position)}
        out.update(self.params)
        return out


def same_grid(a: TwoPhaseGrid, b: TwoPhaseGrid) -> bool:
    return a is b or a.key == b.key


def require_same_grid(a: TwoPhaseGrid, b: TwoPhaseGrid) -> None:
    if not same_grid(a, b):
        raise GridMismatchError("fields live on different grids", left=a.key, right=b.key)


def trapezoid_weights(line: np.ndarray) -> np.ndarray:
    spacing = np.abs(np.diff(line))
    w = np.zeros(line.shape[0])
    w[:-1] += 0.5 * spacing
    w[1:] += 0.5 * spacing
    return w


def _axis_edges(shape: Tuple[int, ...], axis: int, periodic: bool) -> np.ndarray:
    index = np.arange(int(np.prod(shape))).reshape(shape)
    if periodic:
        b = np.roll(index, -1, axis=axis)
        a = index
    else:
        a = np.take(index, np.arange(shape[axis] - 1), axis=axis)
        b = np.take(index, np.arange(1, shape[axis]), axis=axis)
    return np.stack([a.ravel(), b.ravel()], axis=1)


def _line_phase_1d(name: str, line: np.ndarray) -> PhaseMesh:
    spacing = np.abs(np.diff(line))
    edges = _axis_edges((line.size,), 0, False)
    return PhaseMesh(
        name=name,
        coords=line[:, None].copy(),
        volume=trapezoid_weights(line),
        edges=edges,
        edge_weight=spacing.copy(),
        edge_length=spacing.copy(),
        shape=(line.size,),
        lines=(line,),
        periodic=(False,),
        metric=(np.ones(line.size),),
    )


def _box_phase_2d(name: str, normal: np.ndarray, tangent: np.ndarray) -> PhaseMesh:
    shape = (normal.size, tangent.size)
    wn, wt = trapezoid_weights(normal), trapezoid_weights(tangent)
    yy, xx = np.meshgrid(normal, tangent, indexing="ij")
    coords = np.stack([xx.ravel(), yy.ravel()], axis=1)
    e0 = _axis_edges(shape, 0, False)
    e1 = _axis_edges(shape, 1, False)
    dn = np.abs(np.diff(normal))
    dt = np.abs(np.diff(tangent))
    # axis-0 edges: length dn[i], transverse weight wt[j]
    i0, j0 = np.unravel_index(e0[:, 0], shape)
    i1, j1 = np.unravel_index(e1[:, 0], shape)
    len0, len1 = dn[i0], dt[j1]
    return PhaseMesh(
        name=name,
        coords=coords,
        volume=np.outer(wn, wt).ravel(),
        edges=np.concatenate([e0, e1]),
        edge_weight=np.concatenate([len0 * wt[j0], len1 * wn[i1]]),
        edge_length=np.concatenate([len0, len1]),
        shape=shape,
        lines=(normal, tangent),
        periodic=(False, False),
        metric=(np.ones(coords.shape[0]), np.ones(coords.shape[0])),
    )


def _polar_phase(name: str, radii: np.ndarray, n_theta: int) -> PhaseMesh:
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    dtheta = 2.0 * np.pi / n_theta
    shape = (radii.size, n_theta)
    wr = trapezoid_weights(radii)
    rr, tt = np.meshgrid(radii, theta, indexing="ij")
    coords = np.stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()], axis=1)
    e0 = _axis_edges(shape, 0, False)
    e1 = _axis_edges(shape, 1, True)
    i0a, _ = np.unravel_index(e0[:, 0], shape)
    i0b, _ = np.unravel_index(e0[:, 1], shape)
    i1, _ = np.unravel_index(e1[:, 0], shape)
    dr = np.abs(radii[i0b] - radii[i0a])
    r_mid = 0.5 * (radii[i0a] + radii[i0b])
    arc = radii[i1] * dtheta
    return PhaseMesh(
        name=name,
        coords=coords,
        volume=(np.outer(radii * wr, np.full(n_theta, dtheta))).ravel(),
        edges=np.concatenate([e0, e1]),
        edge_weight=np.concatenate([r_mid * dtheta * dr, arc * wr[i1]]),
        edge_length=np.concatenate([dr, arc]),
        shape=shape,
        lines=(radii, theta),
        periodic=(False, True),
        metric=(np.ones(coords.shape[0]), 1.0 / rr.ravel()),
    )


def flat_box(dim: int = 1, half_width: float = 1.0, nodes_per_phase: int = 33,
             transverse_nodes: Optional[int] = None, interface_offset: float = 0.0) -> TwoPhaseGrid:
    """Box (-L, L)^d with interface {x_d = s}; the (+) phase is x_d > s."""
    L = float(half_width)
    s = float(interface_offset)
    if nodes_per_phase < 2:
        raise GeometryError("need at least two nodes per phase", nodes_per_phase=nodes_per_phase)
    if not -L < s < L:
        raise GeometryError("interface must lie inside the box", interface=s, half_width=L)
    plus_line = np.linspace(s, L, nodes_per_phase)
    minus_line = np.linspace(s, -L, nodes_per_phase)
    params = {"half_width": L, "nodes_per_phase": nodes_per_phase}
    if dim == 1:
        return TwoPhaseGrid(
            geometry=FLAT_BOX, dim=1,
            plus=_line_phase_1d("plus", plus_line),
            minus=_line_phase_1d("minus", minus_line),
            n_interface=1,
            interface_area=np.ones(1),
            interface_position=s,
            analytic_volume=2.0 * L,
            params=params,
        )
    if dim != 2:
        raise GeometryError("box grids support dim 1 or 2", dim=dim)
    if transverse_nodes is None:
        transverse_nodes = 2 * nodes_per_phase - 1
    tangent = np.linspace(-L, L, transverse_nodes)
    params["transverse_nodes"] = transverse_nodes
    return TwoPhaseGrid(
        geometry=FLAT_BOX, dim=2,
        plus=_box_phase_2d("plus", plus_line, tangent),
        minus=_box_phase_2d("minus", minus_line, tangent),
        n_interface=transverse_nodes,
        interface_area=trapezoid_weights(tangent),
        interface_position=s,
        analytic_volume=(2.0 * L) ** 2,
        params=params,
    )


def polar_disk(radius: float = 1.0, core_fraction: float = 0.05, interface_radius: float = 0.5,
               radial_nodes: int = 17, angular_nodes: int = 32) -> TwoPhaseGrid:
    """Annulus r_core < r < R; the (+) phase is the inside r < interface_radius."""
    R = float(radius)
    r_core = core_fraction * R
    rho = float(interface_radius)
    if not r_core < rho < R:
        raise GeometryError("interface radius must lie between the core and the outer radius",
                            interface_radius=rho, r_core=r_core, radius=R)
    plus_radii = np.linspace(rho, r_core, radial_nodes)
    minus_radii = np.linspace(rho, R, radial_nodes)
    dtheta = 2.0 * np.pi / angular_nodes
    return TwoPhaseGrid(
        geometry=POLAR_DISK, dim=2,
        plus=_polar_phase("plus", plus_radii, angular_nodes),
        minus=_polar_phase("minus", minus_radii, angular_nodes),
        n_interface=angular_nodes,
        interface_area=np.full(angular_nodes, rho * dtheta),
        interface_position=rho,
        analytic_volume=float(np.pi * (R * R - r_core * r_core)),
        params={"radius": R, "core_fraction": core_fraction,
                "radial_nodes": radial_nodes, "angular_nodes": angular_nodes},
    )


def rebuild(grid: TwoPhaseGrid, interface_position: float) -> TwoPhaseGrid:
    """Same resolution and geometry, interface moved to ``interface_position``."""
    p = grid.params
    if grid.geometry == POLAR_DISK:
        return polar_disk(p["radius"], p["core_fraction"], interface_position,
                          p["radial_nodes"], p["angular_nodes"])
    return flat_box(grid.dim, p["half_width"], p["nodes_per_phase"],
                    p.get("transverse_nodes"), interface_position)


def frame_gradient(values: np.ndarray, mesh: PhaseMesh) -> List[np.ndarray]:
    """Unit-frame derivatives of a nodal field along each structured axis.

    Centered differences inside, one-sided at non-periodic ends, wrap-around
    on periodic axes.
    """
    shaped = values.reshape(mesh.shape + values.shape[1:])
    out = []
    for axis, (line, periodic, metric) in enumerate(zip(mesh.lines, mesh.periodic, mesh.metric)):
        if periodic:
            step = line[1] - line[0]
            d = (np.roll(shaped, -1, axis=axis) - np.roll(shaped, 1, axis=axis)) / (2.0 * step)
        else:
            d = np.gradient(shaped, line, axis=axis)
        d = d.reshape(values.shape)
        out.append(d * metric.reshape((-1,) + (1,) * (values.ndim - 1)))
    return out
