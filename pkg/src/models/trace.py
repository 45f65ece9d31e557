from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Sequence
import csv
import io

import numpy as np


@dataclass(frozen=True)
class EnergyBreakdown:
    dirichlet: float
    proximity: float
    transport: float
    total: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class StepResult:
    field: Any  # PairedField or SphereField
    iterations: int
    final_grad_norm: float
    energy_before: EnergyBreakdown
    energy_after: EnergyBreakdown
    descent_accepted: bool


FLOW_COLUMNS = (
    "m", "t", "E_dirichlet_plus", "E_dirichlet_minus", "E_total", "kinetic_increment",
    "orth_residual_max", "pair_residual_max", "el_residual", "c_tilde_running", "jac_dev_max",
)

SPHERE_COLUMNS = (
    "m", "t", "E_dirichlet", "E_total", "kinetic_increment", "norm_deviation_max", "el_residual",
)


@dataclass
class TraceRow:
    m: int
    t: float
    E_dirichlet_plus: float
    E_dirichlet_minus: float
    E_total: float
    kinetic_increment: float
    orth_residual_max: float
    pair_residual_max: float
    el_residual: float
    c_tilde_running: float = 0.0
    jac_dev_max: float = 0.0

    @property
    def dirichlet(self) -> float:
        return self.E_dirichlet_plus + self.E_dirichlet_minus


@dataclass
class SphereTraceRow:
    m: int
    t: float
    E_dirichlet: float
    E_total: float
    kinetic_increment: float
    norm_deviation_max: float
    el_residual: float

    @property
    def dirichlet(self) -> float:
        return self.E_dirichlet


def _cell(value: Any) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


@dataclass
class InvariantVerdict:
    name: str
    passed: bool
    value: float
    bound: float

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "passed": bool(self.passed),
                "value": float(self.value), "bound": float(self.bound)}


@dataclass
class FlowTrace:
    """Per-step records m = 0..N; row 0 describes the initial data."""
    columns: Sequence[str] = FLOW_COLUMNS
    rows: List[Any] = field(default_factory=list)

    def append(self, row) -> None:
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def dirichlet(self) -> np.ndarray:
        return np.array([r.dirichlet for r in self.rows], dtype=float)

    def kinetic(self) -> np.ndarray:
        return self.column("kinetic_increment")

    def csv_text(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_cell(getattr(row, c)) for c in self.columns])
        return buffer.getvalue()

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as f:
            f.write(self.csv_text())

    @classmethod
    def from_csv(cls, path: str) -> "FlowTrace":
        with open(path, "r", newline="") as f:
            reader = csv.reader(f)
            header = tuple(next(reader))
            row_type = SphereTraceRow if header == SPHERE_COLUMNS else TraceRow
            names = [fl.name for fl in fields(row_type)]
            if tuple(header) != tuple(names):
                raise ValueError(f"unrecognized trace header: {','.join(header)}")
            trace = cls(columns=header)
            for record in reader:
                values = [int(record[0])] + [float(v) for v in record[1:]]
                trace.append(row_type(*values))
        return trace

    def energy_verdicts(self, scale: float = 1.0, slack: float = 1e-10) -> List[InvariantVerdict]:
        """Running energy inequality and the sup bound.

        For every M: sum_{m<=M} kinetic_m + dirichlet_M / scale <= dirichlet_0 / scale.
        ``scale`` is 1 for the matrix flow and the proximity coefficient for
        the sphere flow.
        """
        dirichlet = self.dirichlet()
        kinetic = self.kinetic()
        if dirichlet.size == 0:
            return []
        running = np.cumsum(kinetic) + dirichlet / scale
        worst = float(np.max(running - dirichlet[0] / scale))
        sup_excess = float(np.max(dirichlet) - dirichlet[0])
        return [
            InvariantVerdict("energy_inequality_running", worst <= slack, worst, slack),
            InvariantVerdict("dirichlet_sup_bound", sup_excess <= slack, sup_excess, slack),
        ]

    def monotone_verdict(self, slack: float = 1e-10) -> InvariantVerdict:
        dirichlet = self.dirichlet()
        rise = float(np.max(np.diff(dirichlet))) if dirichlet.size > 1 else 0.0
        return InvariantVerdict("dirichlet_non_increasing", rise <= slack, rise, slack)


@dataclass
class RunSummary:
    mode: str
    seed: int
    config: Dict[str, Any]
    final_energies: Dict[str, float] = field(default_factory=dict)
    constants: Dict[str, float] = field(default_factory=dict)
    invariants: List[InvariantVerdict] = field(default_factory=list)
    extra: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.invariants)

    def add(self, verdicts) -> None:
        if isinstance(verdicts, InvariantVerdict):
            verdicts = [verdicts]
        self.invariants.extend(verdicts)

    def failures(self) -> List[InvariantVerdict]:
        return [v for v in self.invariants if not v.passed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "config": self.config,
            "final_energies": {k: float(v) for k, v in self.final_energies.items()},
            "constants": {k: float(v) for k, v in self.constants.items()},
            "invariants": [v.to_dict() for v in self.invariants],
            "extra": self.extra,
            "passed": self.passed,
        }
