"""
Text snapshot format for nodal fields.

    # two-phase-field v1
    geometry FlatBox
    dim 1
    n 2
    resolution {"half_width": 1.0, ...}
    phase plus 33
    <n*n entries, row-major, one node per line>
    phase minus 33
    ...
    axes 1
    <n entries per interface pair>

Entries carry 17 significant digits, so a write/read cycle is bit-exact.
"""

import json
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.core.errors import SnapshotFormatError
from src.core.grid.domain import FLAT_BOX, POLAR_DISK, TwoPhaseGrid, flat_box, polar_disk, same_grid
from src.core.grid.fields import PairedField

PAIRED_MAGIC = "# two-phase-field v1"


def format_row(values: np.ndarray) -> str:
    return " ".join(format(float(v), ".17g") for v in np.ravel(values))


def encode_rows(block: np.ndarray) -> List[str]:
    return [format_row(row) for row in block.reshape(block.shape[0], -1)]


class LineReader:
    """Sequential reader that remembers 1-based line numbers for diagnostics."""

    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    @property
    def line_no(self) -> int:
        return self.pos

    def next(self, what: str) -> str:
        while self.pos < len(self.lines):
            line = self.lines[self.pos].strip()
            self.pos += 1
            if line:
                return line
        raise SnapshotFormatError(f"unexpected end of file while reading {what}", line=self.pos + 1)

    def keyword(self, key: str) -> str:
        line = self.next(key)
        head, _, rest = line.partition(" ")
        if head != key:
            raise SnapshotFormatError(f"expected '{key}', found '{head}'", line=self.pos)
        return rest.strip()

    def section(self, key: str, label: Optional[str] = None) -> int:
        rest = self.keyword(key)
        parts = rest.split()
        if label is not None:
            if not parts or parts[0] != label:
                raise SnapshotFormatError(f"expected section '{key} {label}'", line=self.pos)
            parts = parts[1:]
        try:
            return int(parts[0])
        except (IndexError, ValueError):
            raise SnapshotFormatError(f"section '{key}' needs a node count", line=self.pos)

    def block(self, count: int, width: int, what: str) -> np.ndarray:
        out = np.empty((count, width))
        for i in range(count):
            line = self.next(what)
            fields = line.split()
            if len(fields) != width:
                raise SnapshotFormatError(f"{what}: expected {width} entries, found {len(fields)}",
                                          line=self.pos)
            try:
                out[i] = [float(v) for v in fields]
            except ValueError:
                raise SnapshotFormatError(f"{what}: non-numeric entry", line=self.pos)
            if not np.all(np.isfinite(out[i])):
                raise SnapshotFormatError(f"{what}: non-finite entry", line=self.pos)
        return out


def grid_from_header(geometry: str, dim: int, resolution: Dict) -> TwoPhaseGrid:
    position = resolution["interface_position"]
    if geometry == POLAR_DISK:
        return polar_disk(resolution["radius"], resolution["core_fraction"], position,
                          int(resolution["radial_nodes"]), int(resolution["angular_nodes"]))
    if geometry == FLAT_BOX:
        transverse = resolution.get("transverse_nodes")
        return flat_box(dim, resolution["half_width"], int(resolution["nodes_per_phase"]),
                        None if transverse is None else int(transverse), position)
    raise KeyError(geometry)


def encode_paired_field(field: PairedField) -> str:
    header = field.grid.header()
    geometry, dim = header.pop("geometry"), header.pop("dim")
    lines = [
        PAIRED_MAGIC,
        f"geometry {geometry}",
        f"dim {dim}",
        f"n {field.n}",
        "resolution " + json.dumps(header, sort_keys=True),
        f"phase plus {field.plus.shape[0]}",
        *encode_rows(field.plus),
        f"phase minus {field.minus.shape[0]}",
        *encode_rows(field.minus),
        f"axes {field.axes.shape[0]}",
        *encode_rows(field.axes),
    ]
    return "\n".join(lines) + "\n"


def _read_header(reader: LineReader, magic: str) -> Tuple[str, int, int, Dict]:
    first = reader.next("header")
    if first != magic:
        raise SnapshotFormatError(f"missing '{magic}' header", line=reader.line_no)
    geometry = reader.keyword("geometry")
    try:
        dim = int(reader.keyword("dim"))
        n = int(reader.keyword("n"))
    except ValueError:
        raise SnapshotFormatError("dim and n must be integers", line=reader.line_no)
    try:
        resolution = json.loads(reader.keyword("resolution"))
    except json.JSONDecodeError as e:
        raise SnapshotFormatError(f"resolution is not valid JSON ({e.msg})", line=reader.line_no)
    return geometry, dim, n, resolution


def decode_paired_field(text: str, grid: Optional[TwoPhaseGrid] = None) -> PairedField:
    reader = LineReader(text)
    geometry, dim, n, resolution = _read_header(reader, PAIRED_MAGIC)
    try:
        described = grid_from_header(geometry, dim, resolution)
    except (KeyError, TypeError, ValueError) as e:
        raise SnapshotFormatError(f"cannot build grid from header ({e})", line=5)
    if grid is None:
        grid = described
    elif not same_grid(grid, described):
        raise SnapshotFormatError("snapshot grid differs from the configured grid", line=5)
    count = reader.section("phase", "plus")
    if count != grid.plus.size:
        raise SnapshotFormatError(f"plus phase has {grid.plus.size} nodes, header says {count}",
                                  line=reader.line_no)
    plus = reader.block(count, n * n, "plus phase").reshape(count, n, n)
    count = reader.section("phase", "minus")
    if count != grid.minus.size:
        raise SnapshotFormatError(f"minus phase has {grid.minus.size} nodes, header says {count}",
                                  line=reader.line_no)
    minus = reader.block(count, n * n, "minus phase").reshape(count, n, n)
    count = reader.section("axes")
    if count != grid.n_interface:
        raise SnapshotFormatError(f"grid has {grid.n_interface} interface pairs, header says {count}",
                                  line=reader.line_no)
    axes = reader.block(count, n, "axes")
    return PairedField(grid=grid, plus=plus, minus=minus, axes=axes)


def read_paired_field(path: str, grid: Optional[TwoPhaseGrid] = None) -> PairedField:
    with open(path, "r") as f:
        return decode_paired_field(f.read(), grid)


def write_paired_field(field: PairedField, path: str) -> None:
    with open(path, "w") as f:
        f.write(encode_paired_field(field))
