"""
Minimizing movements for the harmonic map heat flow into a sphere on a flat
torus: E_h(u~; u) = sum_e w/l^2 |u_b - u_a|^2 + (c/h) |u - u~|^2_L2, unit
vectors at every node.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from src.config.settings import StepConfig
from src.core.errors import FlowError, ManifoldError, SnapshotFormatError, StagnationError
from src.core.grid.domain import PhaseMesh, _axis_edges
from src.core.grid.snapshot import LineReader, encode_rows
from src.models.trace import SPHERE_COLUMNS, FlowTrace, SphereTraceRow, StepResult, EnergyBreakdown

logger = logging.getLogger(__name__)

SPHERE_MAGIC = "# sphere-field v1"
TOL_NORM = 1e-12
NOISE_FACTOR = 64.0


def periodic_grid(dim: int = 1, nodes: int = 64, period: float = 1.0) -> PhaseMesh:
    """Uniform flat torus [0, period)^dim."""
    if dim not in (1, 2):
        raise FlowError("torus grids support dim 1 or 2", dim=dim)
    line = np.linspace(0.0, period, nodes, endpoint=False)
    step = period / nodes
    shape = (nodes,) * dim
    if dim == 1:
        coords = line[:, None].copy()
    else:
        xx, yy = np.meshgrid(line, line, indexing="ij")
        coords = np.stack([xx.ravel(), yy.ravel()], axis=1)
    edges = np.concatenate([_axis_edges(shape, axis, True) for axis in range(dim)])
    size = coords.shape[0]
    return PhaseMesh(
        name="torus",
        coords=coords,
        volume=np.full(size, step ** dim),
        edges=edges,
        edge_weight=np.full(edges.shape[0], step ** dim),
        edge_length=np.full(edges.shape[0], step),
        shape=shape,
        lines=(line,) * dim,
        periodic=(True,) * dim,
        metric=(np.ones(size),) * dim,
    )


@dataclass(frozen=True)
class SphereField:
    grid: PhaseMesh
    values: np.ndarray  # (N, L) unit vectors

    @property
    def target_dim(self) -> int:
        return self.values.shape[1]

    def norm_deviation(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.values, axis=1) - 1.0)))


def normalize(values: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(values, axis=1, keepdims=True)
    if np.any(norms < 1e-12):
        raise ManifoldError("cannot project a vanishing vector onto the sphere")
    return values / norms


def constant_sphere(grid: PhaseMesh, target_dim: int) -> SphereField:
    values = np.zeros((grid.size, target_dim))
    values[:, -1] = 1.0
    return SphereField(grid, values)


def smooth_random_sphere(grid: PhaseMesh, target_dim: int, seed_sequence: np.random.SeedSequence,
                         amplitude: float = 1.0, modes: int = 3) -> SphereField:
    """Normalized e_L + amplitude * (random trigonometric polynomial of low integer frequency)."""
    rng = np.random.default_rng(seed_sequence)
    period = grid.lines[0][-1] + (grid.lines[0][1] - grid.lines[0][0])
    d = grid.coords.shape[1]
    freq = rng.integers(-modes, modes + 1, size=(target_dim, modes, d))
    phase = rng.uniform(0.0, 2.0 * np.pi, size=(target_dim, modes))
    amp = rng.uniform(-1.0, 1.0, size=(target_dim, modes)) / modes
    arg = 2.0 * np.pi * np.einsum("nd,lmd->nlm", grid.coords, freq) / period + phase[None]
    values = np.einsum("nlm,lm->nl", np.sin(arg), amp) * amplitude
    values[:, -1] += 1.0
    return SphereField(grid, normalize(values))


def sphere_dirichlet(u: SphereField) -> float:
    mesh = u.grid
    a, b = mesh.edges[:, 0], mesh.edges[:, 1]
    diff = u.values[b] - u.values[a]
    return float(np.sum(mesh.edge_weight / mesh.edge_length ** 2 * np.sum(diff * diff, axis=1)))


def sphere_energy(u: SphereField, utilde: SphereField, h: float, proximity: float = 2.0) -> EnergyBreakdown:
    if not h > 0:
        raise FlowError("time step must be positive", h=h)
    diff = u.values - utilde.values
    dirichlet = sphere_dirichlet(u)
    prox = proximity / h * float(np.sum(u.grid.volume * np.sum(diff * diff, axis=1)))
    return EnergyBreakdown(dirichlet=dirichlet, proximity=prox, transport=0.0, total=dirichlet + prox)


def neg_laplacian(values: np.ndarray, mesh: PhaseMesh) -> np.ndarray:
    """-Delta_d u with sum_i mu_i u_i . (-Delta_d u)_i equal to the edge Dirichlet sum."""
    a, b = mesh.edges[:, 0], mesh.edges[:, 1]
    coef = (mesh.edge_weight / mesh.edge_length ** 2)[:, None]
    diff = coef * (values[a] - values[b])
    out = np.zeros_like(values)
    np.add.at(out, a, diff)
    np.add.at(out, b, -diff)
    return out / mesh.volume[:, None]


def _tangent(values: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    return vectors - np.sum(vectors * values, axis=1, keepdims=True) * values


def _gradient(u: np.ndarray, utilde: np.ndarray, mesh: PhaseMesh, h: float, c: float) -> np.ndarray:
    """Tangential part of the nodal gradient divided by the node mass."""
    full = 2.0 * neg_laplacian(u, mesh) + (2.0 * c / h) * (u - utilde)
    return _tangent(u, full)


def _difference(new: np.ndarray, old: np.ndarray, utilde: np.ndarray, mesh: PhaseMesh,
                h: float, c: float) -> float:
    delta = new - old
    a, b = mesh.edges[:, 0], mesh.edges[:, 1]
    coef = mesh.edge_weight / mesh.edge_length ** 2
    dd = delta[b] - delta[a]
    ds = (new[b] - new[a]) + (old[b] - old[a])
    total = float(np.sum(coef * np.sum(dd * ds, axis=1)))
    total += c / h * float(np.sum(mesh.volume * np.sum(delta * ((new - utilde) + (old - utilde)), axis=1)))
    return total


def sphere_el_residual(u: SphereField, utilde: SphereField, h: float, proximity: float = 2.0) -> float:
    """max_i |-Delta u + (c/h)(u - u~) - lambda u| with the multiplier
    lambda = u . (-Delta u) + c (1 - u . u~)/h."""
    lap = neg_laplacian(u.values, u.grid)
    lam = np.sum(u.values * lap, axis=1) + proximity * (1.0 - np.sum(u.values * utilde.values, axis=1)) / h
    res = lap + proximity / h * (u.values - utilde.values) - lam[:, None] * u.values
    return float(np.max(np.linalg.norm(res, axis=1)))


def sphere_minimize_step(utilde: SphereField, h: float, cfg: Optional[StepConfig] = None,
                         proximity: float = 2.0) -> StepResult:
    """Projected descent with nearest-point renormalization, warm-started at u~."""
    cfg = cfg or StepConfig()
    if utilde.norm_deviation() > 1e-8:
        raise ManifoldError("warm start is not sphere-valued", deviation=utilde.norm_deviation())
    mesh = utilde.grid
    start = normalize(utilde.values)
    before = sphere_energy(SphereField(mesh, start), SphereField(mesh, start), h, proximity)
    u = start
    grad = _gradient(u, start, mesh, h, proximity)
    sq = float(np.sum(np.sum(grad * grad, axis=1) * mesh.volume))
    iterations = 0
    last = None
    accepted_any = False
    while iterations < cfg.max_iters and np.sqrt(sq) > cfg.tol_grad:
        slope = -sq
        tau = cfg.first_step(h) if last is None else cfg.optimism * 2.0 * last / slope
        found = None
        for _ in range(cfg.max_halvings):
            trial = normalize(u - tau * grad)
            change = _difference(trial, u, start, mesh, h, proximity)
            if change <= cfg.armijo * tau * slope:
                found = (trial, change)
                break
            tau *= cfg.backtrack
        if found is None:
            if np.sqrt(sq) <= np.sqrt(NOISE_FACTOR * np.finfo(float).eps * max(1.0, before.total)):
                break
            raise StagnationError("line search failed after %d halvings" % cfg.max_halvings,
                                  iteration=iterations, grad_norm=float(np.sqrt(sq)), step=tau)
        u, last = found
        accepted_any = True
        iterations += 1
        grad = _gradient(u, start, mesh, h, proximity)
        sq = float(np.sum(np.sum(grad * grad, axis=1) * mesh.volume))
    out = SphereField(mesh, u)
    after = sphere_energy(out, SphereField(mesh, start), h, proximity)
    return StepResult(field=out, iterations=iterations, final_grad_norm=float(np.sqrt(sq)),
                      energy_before=before, energy_after=after, descent_accepted=accepted_any)


@dataclass
class SphereHistory:
    h: float
    proximity: float
    lam: float = 0.9
    fields: List[SphereField] = field(default_factory=list)
    diagnostics: Dict[str, float] = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.fields) - 1

    def evaluate(self, which: str, t: float) -> np.ndarray:
        if t == 0.0:
            return self.fields[0].values
        horizon = self.steps * self.h
        if not 0.0 < t <= horizon * (1.0 + 1e-12):
            raise FlowError("time outside the computed horizon", t=t, horizon=horizon)
        m = min(max(int(np.ceil(t / self.h - 1e-9)) - 1, 0), self.steps - 1)
        theta = min(max((t - m * self.h) / self.h, 0.0), 1.0)
        a0, a1 = self.fields[m].values, self.fields[m + 1].values
        if which == "constant":
            return a1
        if which == "linear":
            return a0 + theta * (a1 - a0)
        if which == "lambda":
            return a0 + min(theta / (1.0 - self.lam), 1.0) * (a1 - a0)
        raise FlowError(f"unknown interpolant '{which}'", which=which)

    def gap(self) -> float:
        mesh = self.fields[0].grid
        total = 0.0
        for m in range(self.steps):
            diff = self.fields[m + 1].values - self.fields[m].values
            total += self.h / 3.0 * float(np.sum(mesh.volume * np.sum(diff * diff, axis=1)))
        return total


def run_sphere_flow(u0: SphereField, T: float, N: int, cfg: Optional[StepConfig] = None,
                    proximity: float = 2.0, lam: float = 0.9,
                    on_step: Optional[Callable[[int, SphereTraceRow], None]] = None
                    ) -> Tuple[SphereHistory, FlowTrace]:
    if N < 2 or not T > 0:
        raise FlowError("need T > 0 and N >= 2", T=T, N=N)
    h = T / N
    history = SphereHistory(h=h, proximity=proximity, lam=lam, fields=[u0])
    trace = FlowTrace(columns=SPHERE_COLUMNS)
    d0 = sphere_dirichlet(u0)
    row = SphereTraceRow(0, 0.0, d0, d0, 0.0, u0.norm_deviation(), 0.0)
    trace.append(row)
    if on_step:
        on_step(0, row)
    current = u0
    attachment = 0.0
    for m in range(N):
        try:
            result = sphere_minimize_step(current, h, cfg, proximity)
        except FlowError as e:
            raise e.with_details(step=m)
        nxt = result.field
        diff = nxt.values - current.values
        kinetic = float(np.sum(nxt.grid.volume * np.sum(diff * diff, axis=1))) / h
        el = sphere_el_residual(nxt, current, h, proximity)
        row = SphereTraceRow(m + 1, (m + 1) * h, sphere_dirichlet(nxt), result.energy_after.total,
                             kinetic, nxt.norm_deviation(), el)
        trace.append(row)
        history.fields.append(nxt)
        if d0 > 1e-24:
            drift = nxt.values - u0.values
            attachment = max(attachment, float(np.sum(nxt.grid.volume * np.sum(drift * drift, axis=1)))
                             / ((m + 1) * h * d0))
        logger.info("sphere step %d/%d: dirichlet=%.6e el=%.2e iterations=%d",
                    m + 1, N, row.E_dirichlet, el, result.iterations)
        if on_step:
            on_step(m + 1, row)
        current = nxt
    gap = history.gap()
    history.diagnostics.update({
        "gap": gap,
        "gap_constant": gap / (h * h * T * d0) if d0 > 1e-24 else 0.0,
        "attachment_C": attachment,
        "dirichlet_initial": d0,
    })
    return history, trace


def wedge(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Components a_i b_j - a_j b_i over i < j, batched over the leading axis."""
    i, j = np.triu_indices(a.shape[-1], k=1)
    return a[..., i] * b[..., j] - a[..., j] * b[..., i]


def wedge_residual(history: SphereHistory, phi: Callable[[np.ndarray, float], np.ndarray],
                   pairing: str = "interpolant", points: int = 3) -> np.ndarray:
    """Assembled c d_t u~ ^ (F phi) + (grad F ^ F) . grad phi over space-time.

    ``phi(coords, t)`` returns nodal values; F is u^{m+1} for the
    "interpolant" pairing and the linear interpolant for "linear".
    """
    mesh = history.fields[0].grid
    x, w = leggauss(points)
    nodes, weights = 0.5 * (x + 1.0), 0.5 * w
    a, b = mesh.edges[:, 0], mesh.edges[:, 1]
    coef = mesh.edge_weight / mesh.edge_length ** 2
    L = history.fields[0].target_dim
    total = np.zeros(L * (L - 1) // 2)
    for m in range(history.steps):
        u0, u1 = history.fields[m].values, history.fields[m + 1].values
        rate = (u1 - u0) / history.h
        for theta, weight in zip(nodes, weights):
            t = (m + theta) * history.h
            if pairing == "interpolant":
                F = u1
            elif pairing == "linear":
                F = u0 + theta * (u1 - u0)
            else:
                raise FlowError(f"unknown pairing '{pairing}'", pairing=pairing)
            values = phi(mesh.coords, t)
            mass = history.proximity * np.sum(mesh.volume[:, None] * values[:, None] * wedge(rate, F), axis=0)
            stiff = np.sum((coef * (values[b] - values[a]))[:, None] * wedge(F[b] - F[a], F[b]), axis=0)
            total += history.h * weight * (mass + stiff)
    return total


def encode_sphere_field(u: SphereField) -> str:
    mesh = u.grid
    step = mesh.lines[0][1] - mesh.lines[0][0]
    lines = [
        SPHERE_MAGIC,
        f"dim {len(mesh.shape)}",
        f"nodes {mesh.shape[0]}",
        f"period {format(float(step * mesh.shape[0]), '.17g')}",
        f"L {u.target_dim}",
        f"values {mesh.size}",
        *encode_rows(u.values),
    ]
    return "\n".join(lines) + "\n"


def decode_sphere_field(text: str) -> SphereField:
    reader = LineReader(text)
    if reader.next("header") != SPHERE_MAGIC:
        raise SnapshotFormatError(f"missing '{SPHERE_MAGIC}' header", line=reader.line_no)
    try:
        dim = int(reader.keyword("dim"))
        nodes = int(reader.keyword("nodes"))
        period = float(reader.keyword("period"))
        L = int(reader.keyword("L"))
    except ValueError:
        raise SnapshotFormatError("dim, nodes, period and L must be numbers", line=reader.line_no)
    grid = periodic_grid(dim, nodes, period)
    count = reader.section("values")
    if count != grid.size:
        raise SnapshotFormatError(f"torus has {grid.size} nodes, header says {count}", line=reader.line_no)
    values = reader.block(count, L, "values")
    return SphereField(grid, values)


def write_sphere_field(u: SphereField, path: str) -> None:
    with open(path, "w") as f:
        f.write(encode_sphere_field(u))


def read_sphere_field(path: str) -> SphereField:
    with open(path, "r") as f:
        return decode_sphere_field(f.read())
