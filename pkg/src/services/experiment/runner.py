import logging
import os
import time
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.config.settings import RunConfig
from src.core.errors import ConfigError, FlowError
from src.core.flow.engine import FlowEngine
from src.core.flow.interpolants import lambda_pair_statistics
from src.core.functional.test_fields import SpaceTimeTestField, gaussian_bump, sine_window
from src.core.functional.weak_forms import weak_neumann_residual
from src.core.grid.domain import POLAR_DISK, TwoPhaseGrid, flat_box, polar_disk
from src.core.grid.fields import PairedField, make_initial
from src.core.matrix import algebra as alg
from src.core.motion.diffeo import PRESCRIBED_POINT, InterfaceMotion, build_diffeos, verify_diffeo_bounds
from src.core.sphere.toy import constant_sphere, periodic_grid, run_sphere_flow, smooth_random_sphere, wedge_residual
from src.models.trace import InvariantVerdict, RunSummary
from src.services.snapshot.manager import SnapshotManager
from src.services.verification.checks import run_suite
from src.utils.helpers import INITIAL_STREAM, LIBRARY_STREAM, loglog_slope, seed_stream

logger = logging.getLogger(__name__)

TOL_ORTH_FINAL = 1e-8
TOL_PAIR_FINAL = 1e-12
SLACK = 1e-10
GAP_SLOPE_MIN = 0.8
C_TILDE_RATIO_MAX = 2.0
TREND_FLOOR = 1e-10
SWEEP_PARAMS = ("N", "seed", "lambda")
ROW_CONSTANTS = ("gap", "C_tilde", "attachment_C", "weak_neumann_residual", "weak_neumann_linear",
                 "wedge_residual", "wedge_residual_linear")


def interface_position(config: RunConfig) -> float:
    if config.grid.geometry == POLAR_DISK:
        return config.motion.r0
    if config.motion.kind == PRESCRIBED_POINT:
        return float(config.motion.point_coeffs[0])
    return config.grid.interface_offset


def build_grid(config: RunConfig) -> TwoPhaseGrid:
    g = config.grid
    position = interface_position(config)
    if g.geometry == POLAR_DISK:
        return polar_disk(g.radius, g.core_fraction, position, g.radial_nodes, g.angular_nodes)
    return flat_box(g.dim, g.half_width, g.nodes_per_phase, g.transverse_nodes, position)


def build_motion(config: RunConfig) -> InterfaceMotion:
    m = config.motion
    return InterfaceMotion(kind=m.kind, r0=m.r0, point_coeffs=tuple(m.point_coeffs),
                           profile_width=m.profile_width, position0=interface_position(config))


def motion_domain(grid: TwoPhaseGrid) -> Tuple[float, float]:
    p = grid.params
    if grid.geometry == POLAR_DISK:
        return p["radius"] * p["core_fraction"], p["radius"]
    return -p["half_width"], p["half_width"]


def interface_test_field(grid: TwoPhaseGrid, n: int, T: float) -> SpaceTimeTestField:
    """Smooth antisymmetric test field centred on an interface point, switched off at t = 0 and T.

    The minus side carries a V3 jump at the interface pairs.
    """
    if grid.geometry == POLAR_DISK:
        center = [grid.interface_position, 0.0]
        width = 0.25 * grid.interface_position
    elif grid.dim == 1:
        center = [grid.interface_position]
        width = 0.25 * grid.params["half_width"]
    else:
        center = [0.0, grid.interface_position]
        width = 0.25 * grid.params["half_width"]
    basis = alg.antisymmetric_basis(n)
    generator = np.sqrt(2.0) * basis[0]
    jump = np.sqrt(2.0) * basis[-1]
    return SpaceTimeTestField(gaussian_bump(center, width), sine_window(T), generator, jump)


def _verdict(name: str, value: float, bound: float) -> InvariantVerdict:
    value = float(value)
    return InvariantVerdict(name, bool(np.isfinite(value) and value <= bound), value, float(bound))


def non_increasing(values: Sequence[Optional[float]], floor: float = TREND_FLOOR) -> Optional[bool]:
    """True when each value is at most its predecessor or already below ``floor``; None with < 2 values."""
    vals = [float(v) for v in values if v is not None]
    if len(vals) < 2:
        return None
    return all(b <= a or b <= floor for a, b in zip(vals, vals[1:]))


def refinement_verdicts(mode: str, rows: Sequence[Dict[str, Any]]) -> Tuple[Dict[str, bool], Dict[str, float]]:
    """Trend checks of an N sweep, taken from the coarsest step to the finest.

    Weak residuals use the linear pairing, whose value shrinks with h.
    Returns (verdicts, measured values).
    """
    verdicts: Dict[str, bool] = {}
    measured: Dict[str, float] = {}
    rows = sorted(rows, key=lambda r: -r["h"])
    if mode in ("fixed", "moving"):
        trend = non_increasing([r.get("weak_neumann_linear") for r in rows])
        if trend is not None:
            verdicts["weak_neumann_decreasing"] = trend
    if mode == "sphere":
        trend = non_increasing([r.get("wedge_residual_linear") for r in rows])
        if trend is not None:
            verdicts["wedge_decreasing"] = trend
    if mode == "moving":
        c_tilde = [r["C_tilde"] for r in rows if r.get("C_tilde")]
        if len(c_tilde) > 1:
            measured["c_tilde_ratio"] = max(c_tilde) / min(c_tilde)
            verdicts["c_tilde_stable"] = measured["c_tilde_ratio"] <= C_TILDE_RATIO_MAX
    return verdicts, measured


class ExperimentRunner:
    """Runs one configuration end to end and writes its trace, snapshots and summary."""

    def __init__(self, config: RunConfig, run_dir: Optional[str] = None):
        self.config = config
        default = config.output.name or f"{config.mode}_seed{config.seed}"
        self.run_dir = run_dir or os.path.join(config.output.root, default)
        self.manager = SnapshotManager(self.run_dir, config.output.snapshot_every)

    def _print_header(self) -> None:
        cfg = self.config
        print(f"🕐 Started at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
        print("=" * 60)
        print(f"🧭 Mode: {cfg.mode}")
        print(f"🎲 Seed: {cfg.seed}")
        if cfg.mode == "verify":
            print(f"📐 Sizes: {cfg.verify.dims()}  trials: {cfg.verify.trials}")
        elif cfg.mode == "sphere":
            s = cfg.sphere
            print(f"🌐 Torus: dim={s.dim} nodes={s.nodes} period={s.period}  target S^{s.target_dim - 1}")
            print(f"⏳ T={cfg.flow.T}  N={cfg.flow.N}  h={cfg.flow.h:.4g}")
        else:
            print(f"🧩 Grid: {cfg.grid.geometry} dim={cfg.grid.dim}  n={cfg.initial.n}  initial={cfg.initial.recipe}")
            print(f"🌀 Motion: {cfg.motion.kind}")
            print(f"⏳ T={cfg.flow.T}  N={cfg.flow.N}  h={cfg.flow.h:.4g}  lambda={cfg.flow.lam}")
        print(f"📂 Output: {self.run_dir}")
        print("=" * 60)

    def _print_footer(self, summary: RunSummary, started: float) -> None:
        elapsed = time.time() - started
        print()
        print("📊 Invariants:")
        for v in summary.invariants:
            mark = "✅" if v.passed else "❌"
            print(f"   {mark} {v.name}: {v.value:.3e} (bound {v.bound:.3e})")
        if summary.constants:
            print("📏 Constants:")
            for key, value in summary.constants.items():
                print(f"   {key} = {value:.6g}")
        print(f"⏱️  Processing time: {int(elapsed // 60)}m {elapsed % 60:.1f}s")
        print(f"🕐 Completed at: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
        print("=" * 60)

    def run(self) -> RunSummary:
        started = time.time()
        self._print_header()
        mode = self.config.mode
        if mode == "verify":
            summary = self._run_verify()
        elif mode == "sphere":
            summary = self._run_sphere()
        else:
            summary = self._run_flow()
        summary.extra["elapsed_seconds"] = time.time() - started
        path = self.manager.save_summary(summary)
        print(f"   📄 Summary saved: {path}")
        self._print_footer(summary, started)
        return summary

    def _progress(self, total: int):
        def report(m: int, row) -> None:
            if m == 0:
                print(f"🚀 [{m:4d}/{total}] dirichlet={row.dirichlet:.6e}")
                return
            print(f"📈 [{m:4d}/{total}] ({100.0 * m / total:5.1f}%) dirichlet={row.dirichlet:.6e} "
                  f"kinetic={row.kinetic_increment:.3e} el={row.el_residual:.2e}")
        return report

    def _run_flow(self) -> RunSummary:
        cfg = self.config
        grid = build_grid(cfg)
        motion = build_motion(cfg)
        A0 = make_initial(grid, cfg.initial.recipe, cfg.initial.n, seed_stream(cfg.seed, INITIAL_STREAM),
                          cfg.initial.amplitude, cfg.initial.axis, cfg.initial.path)
        N = cfg.flow.N

        def save(m: int, field: PairedField) -> None:
            if self.manager.wants_snapshot(m, N):
                self.manager.save_field(m, field)

        engine = FlowEngine(cfg.flow, cfg.stepper, motion=motion, margin=cfg.motion.margin,
                            library_seed=seed_stream(cfg.seed, LIBRARY_STREAM),
                            on_step=self._progress(N), on_field=save)
        print("🔄 Marching...")
        if cfg.mode == "fixed":
            interpolants, trace = engine.run_fixed(A0)
        else:
            interpolants, trace = engine.run_moving(A0)
        print(f"   📄 Trace saved: {self.manager.save_trace(trace)}")

        history = interpolants.history
        diag = history.diagnostics
        h, T = cfg.flow.h, cfg.flow.T
        d0 = diag["dirichlet_initial"]
        last = trace.rows[-1]
        summary = RunSummary(mode=cfg.mode, seed=cfg.seed, config=cfg.to_dict())
        summary.final_energies = {"dirichlet": last.dirichlet, "dirichlet_plus": last.E_dirichlet_plus,
                                  "dirichlet_minus": last.E_dirichlet_minus, "total": last.E_total,
                                  "dirichlet_initial": d0}
        summary.add(_verdict("orthogonality_final", last.orth_residual_max, TOL_ORTH_FINAL))
        summary.add(_verdict("minimal_pair_final", last.pair_residual_max, TOL_PAIR_FINAL))
        summary.add(_verdict("el_residual_max", float(np.max(trace.column("el_residual"))), cfg.flow.tol_el))
        summary.add(_verdict("interpolant_gap_bound", diag["gap"] - 2.0 * T * h * d0, SLACK))

        stats = lambda_pair_statistics(interpolants)
        fraction = stats["fraction_of_spacetime_interface_exact"]
        summary.add(_verdict("lambda_exact_fraction", abs(fraction - cfg.flow.lam), 1.0 / N))

        psi = interface_test_field(A0.grid, A0.n, T)
        weak = weak_neumann_residual(history, psi)
        weak_linear = weak_neumann_residual(history, psi, pairing="linear")
        summary.constants.update({"gap": diag["gap"], "attachment_C": diag["attachment_C"],
                                  "C_tilde": diag["c_tilde"], "weak_neumann_residual": weak,
                                  "weak_neumann_linear": weak_linear,
                                  "lambda_exact_fraction": fraction,
                                  "off_plateau_pair_residual_max": stats["off_plateau_pair_residual_max"]})
        summary.extra.update({"iterations": diag["iterations"],
                              "final_grad_norm_max": diag["final_grad_norm_max"],
                              "transfer_errors": diag["transfer_errors"]})

        if cfg.mode == "fixed":
            summary.add(trace.energy_verdicts(slack=SLACK))
            summary.add(trace.monotone_verdict(slack=SLACK))
            summary.add(_verdict("initial_attachment", diag["attachment_C"], 1.0 + SLACK))
            summary.add(_verdict("weak_neumann_interpolant", weak, cfg.flow.tol_el))
        else:
            c_tilde = diag["c_tilde"]
            growth = float(np.max(trace.dirichlet())) - np.exp(c_tilde * T) * d0
            summary.add(_verdict("c_tilde_finite", 0.0 if np.isfinite(c_tilde) else np.inf, 0.0))
            summary.add(_verdict("weighted_dirichlet_bound", growth, SLACK * max(1.0, d0)))
            fam = build_diffeos(motion, h, T, domain=motion_domain(A0.grid), margin=cfg.motion.margin)
            report = verify_diffeo_bounds(fam)
            summary.constants.update({"C0": report.C0, "C1": report.C1, "C2": report.C2, "CJ": report.CJ,
                                      "h0": report.h0, "transfer_error_max": diag["transfer_error_max"],
                                      "kinetic_sum": float(np.sum(trace.kinetic()))})
            summary.extra["diffeo"] = report.to_dict()
            self.manager.save_report("diffeo.json", report.to_dict())
        return summary

    def _run_sphere(self) -> RunSummary:
        cfg = self.config
        s = cfg.sphere
        grid = periodic_grid(s.dim, s.nodes, s.period)
        if s.amplitude == 0.0:
            u0 = constant_sphere(grid, s.target_dim)
        else:
            u0 = smooth_random_sphere(grid, s.target_dim, seed_stream(cfg.seed, INITIAL_STREAM), s.amplitude)
        T, N, c = cfg.flow.T, cfg.flow.N, cfg.flow.proximity
        print("🔄 Marching...")
        history, trace = run_sphere_flow(u0, T, N, cfg.stepper, c, cfg.flow.lam, on_step=self._progress(N))
        for m, u in enumerate(history.fields):
            if self.manager.wants_snapshot(m, N):
                self.manager.save_sphere(m, u)
        print(f"   📄 Trace saved: {self.manager.save_trace(trace)}")

        diag = history.diagnostics
        d0 = diag["dirichlet_initial"]
        h = cfg.flow.h
        last = trace.rows[-1]
        summary = RunSummary(mode=cfg.mode, seed=cfg.seed, config=cfg.to_dict())
        summary.final_energies = {"dirichlet": last.E_dirichlet, "total": last.E_total, "dirichlet_initial": d0}
        summary.add(trace.energy_verdicts(scale=c, slack=SLACK))
        summary.add(trace.monotone_verdict(slack=SLACK))
        summary.add(_verdict("norm_deviation_max", float(np.max(trace.column("norm_deviation_max"))), 1e-12))
        summary.add(_verdict("el_residual_max", float(np.max(trace.column("el_residual"))), cfg.flow.tol_el))
        summary.add(_verdict("interpolant_gap_bound", diag["gap"] - 2.0 * T * h * d0, SLACK))
        summary.add(_verdict("initial_attachment", diag["attachment_C"], 1.0 / c + SLACK))

        period = s.period

        def phi(coords: np.ndarray, t: float) -> np.ndarray:
            return np.sin(np.pi * t / T) ** 2 * np.prod(np.cos(2.0 * np.pi * coords / period), axis=1)

        summary.constants.update({
            "gap": diag["gap"], "gap_constant": diag["gap_constant"], "attachment_C": diag["attachment_C"],
            "wedge_residual": float(np.max(np.abs(wedge_residual(history, phi)))),
            "wedge_residual_linear": float(np.max(np.abs(wedge_residual(history, phi, pairing="linear")))),
        })
        return summary

    def _run_verify(self) -> RunSummary:
        cfg = self.config
        print("🔍 Running algebra checks...")
        reports = run_suite(cfg.verify.dims(), cfg.verify.trials, cfg.seed)
        summary = RunSummary(mode=cfg.mode, seed=cfg.seed, config=cfg.to_dict())
        for rep in reports:
            mark = "✅" if rep.passed else "❌"
            print(f"   {mark} {rep.name} (n={rep.n}, {rep.trials} trials)")
            for key, bound in rep.bounds.items():
                summary.add(_verdict(f"{rep.name}.{key}[n={rep.n}]", rep.values[key], bound))
        data = {"seed": cfg.seed, "trials": cfg.verify.trials, "checks": [r.to_dict() for r in reports],
                "passed": all(r.passed for r in reports)}
        self.manager.save_report("verify.json", data)
        summary.extra["checks"] = [r.name for r in reports]
        return summary

    def sweep(self, param: str, values: Sequence[Any]) -> Dict[str, Any]:
        """Run the pipeline once per value; aggregate scaling diagnostics into sweep.json/sweep.csv."""
        if param not in SWEEP_PARAMS:
            raise ConfigError(f"cannot sweep '{param}'; use N, seed or lambda", key="sweep.param")
        if not values:
            raise ConfigError("sweep needs at least one value", key="sweep.values")
        rows: List[Dict[str, Any]] = []
        verdicts: List[Dict[str, bool]] = []
        report: Dict[str, Any] = {"param": param, "values": list(values), "mode": self.config.mode}
        print(f"🧪 Sweep over {param}: {', '.join(str(v) for v in values)}")
        for value in values:
            cfg = self.config.with_value(param, value).validate()
            entry = self.manager.entry(param, value)
            print()
            print(f"▶️  {param} = {value}")
            try:
                summary = ExperimentRunner(cfg, run_dir=entry.run_dir).run()
            except FlowError as e:
                report.update({"rows": rows, "aborted": e.to_dict(), "failed_value": value})
                self.manager.save_sweep(report, rows)
                raise
            logger.info("sweep %s=%s: %s", param, value, "passed" if summary.passed else "failed")
            verdicts.append({v.name: v.passed for v in summary.invariants})
            row = {"param": param, "value": value, "h": cfg.flow.h, "passed": summary.passed}
            row.update({k: summary.constants.get(k) for k in ROW_CONSTANTS})
            row["dirichlet_final"] = summary.final_energies.get("dirichlet")
            rows.append(row)

        report["rows"] = rows
        report["passed"] = all(r["passed"] for r in rows)
        if param == "N" and self.config.mode != "verify":
            slope = loglog_slope([r["h"] for r in rows], [r["gap"] or 0.0 for r in rows])
            report["gap_slope"] = slope
            if np.isfinite(slope):
                report["gap_slope_ok"] = slope >= GAP_SLOPE_MIN
                report["passed"] = report["passed"] and report["gap_slope_ok"]
            trends, measured = refinement_verdicts(self.config.mode, rows)
            report.update(measured)
            report.update(trends)
            report["passed"] = report["passed"] and all(trends.values())
        if param == "seed":
            report["verdicts_agree"] = all(v == verdicts[0] for v in verdicts)
            report["passed"] = report["passed"] and report["verdicts_agree"]
        paths = self.manager.save_sweep(report, rows)
        print()
        print(f"   📄 Sweep report: {paths['json']}")
        print(f"   📄 Sweep table: {paths['csv']}")
        print(f"{'✅' if report['passed'] else '❌'} Sweep {'passed' if report['passed'] else 'failed'}")
        return report
