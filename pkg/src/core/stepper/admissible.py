from typing import Tuple

import numpy as np

from src.core.matrix import algebra as alg


def admissible_direction_project(W_plus: np.ndarray, W_minus: np.ndarray,
                                 axis: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Remove the V4 part of W+ - W- relative to ``axis``, half from each side.

    Batched over leading axes. The result is the orthogonal projection of the
    pair onto {(W+, W-) : W+ - W- is orthogonal to V4}.
    """
    wp = np.asarray(W_plus, dtype=float)
    wm = np.asarray(W_minus, dtype=float)
    half = 0.5 * alg.v_components(wp - wm, axis)[3]
    return wp - half, wm + half


def v4_violation(W_plus: np.ndarray, W_minus: np.ndarray, axis: np.ndarray) -> np.ndarray:
    """Frobenius norm of the V4 component of W+ - W- per pair."""
    return alg.frob_norm(alg.v_components(np.asarray(W_plus) - np.asarray(W_minus), axis)[3])
