import numpy as np
import pytest

from src.core.errors import GeometryError, GridMismatchError, InfeasibleStartError, ManifoldError
from src.core.grid.domain import flat_box, polar_disk, rebuild, same_grid
from src.core.grid.fields import (constant_pair, dirichlet_by_phase, dirichlet_energy, l2_distance_sq,
                                  make_initial, smooth_random)


def test_flat_box_1d_layout(line_grid):
    assert line_grid.n_interface == 1
    assert line_grid.plus.coords[0, 0] == line_grid.minus.coords[0, 0] == 0.0
    assert line_grid.total_volume() == pytest.approx(line_grid.analytic_volume, rel=1e-14)
    assert np.all(line_grid.plus.coords[:, 0] >= 0.0)
    assert np.all(line_grid.minus.coords[:, 0] <= 0.0)


def test_flat_box_2d_volume(box_grid):
    assert box_grid.n_interface == 9
    assert box_grid.total_volume() == pytest.approx(4.0, rel=1e-13)
    assert box_grid.interface_area.sum() == pytest.approx(2.0, rel=1e-13)
    assert np.allclose(box_grid.plus.coords[:9], box_grid.minus.coords[:9])


def test_polar_disk_interface_nodes_coincide(disk_grid):
    k = disk_grid.n_interface
    assert k == 12
    assert np.allclose(disk_grid.plus.coords[:k], disk_grid.minus.coords[:k])
    assert np.allclose(np.linalg.norm(disk_grid.plus.coords[:k], axis=1), 0.8)


def test_invalid_geometries():
    with pytest.raises(GeometryError):
        flat_box(1, 1.0, 9, interface_offset=1.5)
    with pytest.raises(GeometryError):
        flat_box(3, 1.0, 9)
    with pytest.raises(GeometryError):
        polar_disk(1.0, 0.05, interface_radius=0.01)


def test_rebuild_moves_only_the_interface(disk_grid):
    moved = rebuild(disk_grid, 0.7)
    assert moved.interface_position == 0.7
    assert moved.plus.shape == disk_grid.plus.shape
    assert not same_grid(moved, disk_grid)
    assert same_grid(rebuild(disk_grid, 0.8), disk_grid)


def test_constant_pair_is_admissible_with_zero_energy(box_grid):
    A = constant_pair(box_grid, 3, axis=[0.0, 0.0, 2.0])
    A.check_admissible()
    assert dirichlet_energy(A) == 0.0
    assert np.allclose(A.axes, [0.0, 0.0, 1.0])


@pytest.mark.parametrize("n", [2, 3])
def test_smooth_random_is_admissible(line_grid, box_grid, disk_grid, n):
    for grid in (line_grid, box_grid, disk_grid):
        A = smooth_random(grid, n, np.random.SeedSequence(11), amplitude=0.5)
        A.check_admissible()
        assert A.pair_residual_max() <= 1e-12
        assert A.phase("plus").is_manifold_valid()
        assert A.phase("minus").is_manifold_valid()
        assert np.all(np.linalg.det(A.minus) < 0)
        assert dirichlet_energy(A) > 0.0


def test_smooth_random_is_seed_deterministic(line_grid):
    a = smooth_random(line_grid, 3, np.random.SeedSequence(5))
    b = smooth_random(line_grid, 3, np.random.SeedSequence(5))
    c = smooth_random(line_grid, 3, np.random.SeedSequence(6))
    assert np.array_equal(a.plus, b.plus) and np.array_equal(a.axes, b.axes)
    assert not np.array_equal(a.plus, c.plus)


def test_dirichlet_by_phase_sums(random_pair):
    parts = dirichlet_by_phase(random_pair)
    assert parts["plus"] + parts["minus"] == pytest.approx(dirichlet_energy(random_pair))


def test_l2_distance_requires_same_grid(random_pair, box_grid):
    assert l2_distance_sq(random_pair, random_pair) == 0.0
    with pytest.raises(GridMismatchError):
        l2_distance_sq(random_pair, constant_pair(box_grid, 2))


def test_non_minimal_pair_is_rejected(line_grid):
    A = constant_pair(line_grid, 2)
    broken = type(A)(grid=A.grid, plus=A.plus, minus=-A.plus.copy(), axes=A.axes)
    with pytest.raises(InfeasibleStartError):
        broken.check_admissible()


def test_make_initial_recipes(line_grid, tmp_path):
    from src.core.grid.snapshot import write_paired_field

    A = make_initial(line_grid, "smooth-random", 2, np.random.SeedSequence(1))
    path = str(tmp_path / "a.txt")
    write_paired_field(A, path)
    B = make_initial(line_grid, "user-file", 2, path=path)
    assert np.array_equal(A.plus, B.plus)
    with pytest.raises(InfeasibleStartError):
        make_initial(line_grid, "user-file", 3, path=path)
    with pytest.raises(ManifoldError):
        make_initial(line_grid, "checkerboard", 2)
