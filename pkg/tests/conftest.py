import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root so ``src`` is importable
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from src.config.settings import FlowConfig
from src.core.flow.engine import run_fixed
from src.core.grid.domain import flat_box, polar_disk
from src.core.grid.fields import smooth_random


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: refinement studies that run several flows")


@pytest.fixture
def rng():
    return np.random.default_rng(20240617)


@pytest.fixture(scope="session")
def line_grid():
    return flat_box(dim=1, half_width=1.0, nodes_per_phase=17)


@pytest.fixture(scope="session")
def box_grid():
    return flat_box(dim=2, half_width=1.0, nodes_per_phase=7, transverse_nodes=9)


@pytest.fixture(scope="session")
def disk_grid():
    return polar_disk(radius=1.0, core_fraction=0.05, interface_radius=0.8, radial_nodes=9, angular_nodes=12)


@pytest.fixture(scope="session")
def random_pair(line_grid):
    return smooth_random(line_grid, 2, np.random.SeedSequence(3), amplitude=0.5)


@pytest.fixture(scope="session")
def short_run(line_grid):
    """A0 and the result of a short fixed-interface flow on the 1D grid."""
    A0 = smooth_random(line_grid, 2, np.random.SeedSequence(7), amplitude=0.5)
    interpolants, trace = run_fixed(A0, FlowConfig(T=0.04, N=8))
    return A0, interpolants, trace


@pytest.fixture(scope="session")
def short_run_3(line_grid):
    """Same short flow with 3 x 3 values, where V4 at the interface is nontrivial."""
    A0 = smooth_random(line_grid, 3, np.random.SeedSequence(11), amplitude=0.5)
    interpolants, trace = run_fixed(A0, FlowConfig(T=0.04, N=8))
    return A0, interpolants, trace
