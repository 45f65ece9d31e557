import csv
import os
from typing import Any, Dict, List, Optional, Sequence

from src.core.grid.fields import PairedField
from src.core.grid.snapshot import read_paired_field, write_paired_field
from src.core.sphere.toy import SphereField, read_sphere_field, write_sphere_field
from src.models.trace import FlowTrace, RunSummary
from src.utils.helpers import ensure_directory, load_json, save_json

TRACE_FILE = "trace.csv"
SUMMARY_FILE = "summary.json"
SWEEP_JSON = "sweep.json"
SWEEP_CSV = "sweep.csv"
SNAPSHOT_DIR = "snapshots"


class SnapshotManager:
    """Owns one run directory: field snapshots, the trace CSV and JSON reports."""

    def __init__(self, run_dir: str, snapshot_every: int = 0):
        self.run_dir = run_dir
        self.snapshot_every = snapshot_every
        self.written: List[str] = []
        ensure_directory(run_dir)

    def path(self, *parts: str) -> str:
        return os.path.join(self.run_dir, *parts)

    def wants_snapshot(self, m: int, last: int) -> bool:
        """Initial and final steps always; every ``snapshot_every`` steps in between."""
        if m == 0 or m == last:
            return True
        return self.snapshot_every > 0 and m % self.snapshot_every == 0

    def snapshot_path(self, m: int, kind: str = "field") -> str:
        return self.path(SNAPSHOT_DIR, f"{kind}_{m:05d}.txt")

    def save_field(self, m: int, field: PairedField) -> str:
        path = self.snapshot_path(m)
        ensure_directory(os.path.dirname(path))
        write_paired_field(field, path)
        self.written.append(path)
        return path

    def save_sphere(self, m: int, u: SphereField) -> str:
        path = self.snapshot_path(m, "sphere")
        ensure_directory(os.path.dirname(path))
        write_sphere_field(u, path)
        self.written.append(path)
        return path

    @staticmethod
    def load_field(path: str, grid=None) -> PairedField:
        return read_paired_field(path, grid)

    @staticmethod
    def load_sphere(path: str) -> SphereField:
        return read_sphere_field(path)

    def save_trace(self, trace: FlowTrace) -> str:
        path = self.path(TRACE_FILE)
        trace.to_csv(path)
        return path

    def load_trace(self) -> FlowTrace:
        return FlowTrace.from_csv(self.path(TRACE_FILE))

    def save_summary(self, summary: RunSummary) -> str:
        path = self.path(SUMMARY_FILE)
        save_json(summary.to_dict(), path)
        return path

    def save_report(self, name: str, data: Dict[str, Any]) -> str:
        path = self.path(name)
        save_json(data, path)
        return path

    def load_report(self, name: str) -> Dict[str, Any]:
        return load_json(self.path(name))

    def entry(self, param: str, value: Any) -> "SnapshotManager":
        """Isolated subdirectory ``<param>_<value>/`` for one sweep entry."""
        return SnapshotManager(self.path(f"{param}_{value}"), self.snapshot_every)

    def save_sweep(self, report: Dict[str, Any], rows: Sequence[Dict[str, Any]],
                   columns: Optional[Sequence[str]] = None) -> Dict[str, str]:
        json_path = self.path(SWEEP_JSON)
        save_json(report, json_path)
        csv_path = self.path(SWEEP_CSV)
        if columns is None:
            columns = list(rows[0].keys()) if rows else []
        with open(csv_path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(row.get(c)) for c in columns])
        return {"json": json_path, "csv": csv_path}


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)
