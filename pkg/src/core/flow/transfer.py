"""
Pullback of a paired field through the step diffeomorphism onto the next grid.

A node at normal coordinate s on the new grid takes the value of the old
field at rho(s, t_{m+1}): chord interpolation along the old normal line of
the same tangential column, snapped back to the group by the polar factor.
Interface nodes map onto the interface and copy values and axes exactly.
"""

from typing import Tuple

import numpy as np

from src.core.errors import GeometryError
from src.core.grid.domain import PhaseMesh, TwoPhaseGrid
from src.core.grid.fields import PairedField
from src.core.matrix import algebra as alg
from src.core.motion.diffeo import DiffeoFamily

TOL_RANGE = 1e-10


def _line_position(line: np.ndarray, y: np.ndarray, step: int, phase: str) -> np.ndarray:
    """Fractional index of each y along a monotone coordinate line."""
    idx = np.arange(line.size, dtype=float)
    if line[0] > line[-1]:
        line, idx = line[::-1], idx[::-1]
    low, high = line[0], line[-1]
    outside = (y < low - TOL_RANGE) | (y > high + TOL_RANGE)
    if np.any(outside):
        worst = float(y[np.argmax(outside)])
        raise GeometryError("pulled-back node falls outside the previous grid", step=step,
                            phase=phase, coordinate=worst, low=float(low), high=float(high))
    return np.interp(np.clip(y, low, high), line, idx)


def _pull_phase(values: np.ndarray, source: PhaseMesh, target: PhaseMesh, fam: DiffeoFamily,
                m: int, n_interface: int) -> Tuple[np.ndarray, float]:
    columns = int(np.prod(target.shape[1:], dtype=int))
    s = target.axis0_coordinate()
    y = fam.map_coordinate(m, s, fam.time(m + 1))
    q = _line_position(source.lines[0], y, m, target.name)
    i0 = np.minimum(np.floor(q).astype(int), source.shape[0] - 2)
    w = q - i0
    col = np.tile(np.arange(columns), target.shape[0])
    lo = values[i0 * columns + col]
    hi = values[(i0 + 1) * columns + col]
    chord = (1.0 - w)[:, None, None] * lo + w[:, None, None] * hi
    out = chord.copy()
    inexact = (w != 0.0) & (w != 1.0)
    if np.any(inexact):
        out[inexact] = alg.nearest_orthogonal_batch(chord[inexact])
    out[:n_interface] = values[:n_interface]
    diff = out - chord
    diff[:n_interface] = 0.0
    err_sq = float(np.sum(target.volume * alg.frob_inner(diff, diff)))
    return out, err_sq


def pullback(field: PairedField, fam: DiffeoFamily, m: int, target: TwoPhaseGrid) -> Tuple[PairedField, float]:
    """Warm start on ``target`` (the grid at t_{m+1}) and the L2 snap-back distance."""
    if target.n_interface != field.grid.n_interface or target.plus.shape[1:] != field.grid.plus.shape[1:]:
        raise GeometryError("grids differ in tangential resolution", step=m)
    k = target.n_interface
    plus, err_plus = _pull_phase(field.plus, field.grid.plus, target.plus, fam, m, k)
    minus, err_minus = _pull_phase(field.minus, field.grid.minus, target.minus, fam, m, k)
    moved = PairedField(grid=target, plus=plus, minus=minus, axes=field.axes.copy())
    return moved, float(np.sqrt(err_plus + err_minus))
