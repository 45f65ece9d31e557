import os
import json
import logging
import sys
from typing import Any, Dict, List

import numpy as np

INITIAL_STREAM = 0
VERIFY_STREAM = 1
LIBRARY_STREAM = 2


def ensure_directory(path: str) -> None:
    """Ensure that a directory exists, create if it doesn't."""
    if path:
        os.makedirs(path, exist_ok=True)


def load_json(file_path: str) -> Dict[str, Any]:
    """Load JSON data from file."""
    with open(file_path, 'r') as f:
        return json.load(f)


def save_json(data: Dict[str, Any], file_path: str, indent: int = 2) -> None:
    """Save data to JSON file."""
    ensure_directory(os.path.dirname(file_path))
    with open(file_path, 'w') as f:
        json.dump(data, f, indent=indent, default=_json_default)


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def seed_stream(seed: int, *key: int) -> np.random.SeedSequence:
    """Named random stream of the master seed.

    k = 0 initial data, k = 1 verification (trial i uses (1, i)), k = 2 test libraries.
    """
    return np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))


def parse_values(text: str) -> List[str]:
    """Split a comma separated CLI list, dropping blanks."""
    return [v.strip() for v in text.split(",") if v.strip()]


def loglog_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    if np.count_nonzero(keep) < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def setup_logging(verbose: bool = False) -> None:
    """Route library loggers to stderr once; DEBUG when verbose."""
    root = logging.getLogger()
    level = logging.DEBUG if verbose else logging.WARNING
    if not any(getattr(h, "_flow_handler", False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        handler._flow_handler = True
        root.addHandler(handler)
    root.setLevel(level)
