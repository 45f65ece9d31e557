import numpy as np
import pytest

from src.core.errors import SnapshotFormatError
from src.core.grid.fields import smooth_random
from src.core.grid.snapshot import PAIRED_MAGIC, decode_paired_field, encode_paired_field
from src.core.sphere.toy import decode_sphere_field, encode_sphere_field, periodic_grid, smooth_random_sphere


def test_paired_snapshot_is_bit_exact(disk_grid):
    A = smooth_random(disk_grid, 3, np.random.SeedSequence(4))
    B = decode_paired_field(encode_paired_field(A))
    assert np.array_equal(A.plus, B.plus)
    assert np.array_equal(A.minus, B.minus)
    assert np.array_equal(A.axes, B.axes)
    assert B.grid.key == A.grid.key


def test_snapshot_starts_with_magic(random_pair):
    text = encode_paired_field(random_pair)
    assert text.splitlines()[0] == PAIRED_MAGIC
    assert "phase plus 17" in text and "axes 1" in text


def test_missing_header_reports_line_one(random_pair):
    text = encode_paired_field(random_pair).replace(PAIRED_MAGIC, "# something else")
    with pytest.raises(SnapshotFormatError) as info:
        decode_paired_field(text)
    assert info.value.details["line"] == 1


def test_bad_entry_reports_its_line(random_pair):
    lines = encode_paired_field(random_pair).splitlines()
    lines[7] = "1.0 nan-ish 0.0 1.0"
    with pytest.raises(SnapshotFormatError) as info:
        decode_paired_field("\n".join(lines))
    assert info.value.details["line"] == 8


def test_truncated_snapshot(random_pair):
    lines = encode_paired_field(random_pair).splitlines()
    with pytest.raises(SnapshotFormatError):
        decode_paired_field("\n".join(lines[:-2]))


def test_node_count_mismatch(random_pair):
    text = encode_paired_field(random_pair).replace("phase plus 17", "phase plus 16")
    with pytest.raises(SnapshotFormatError):
        decode_paired_field(text)


def test_grid_mismatch_is_rejected(random_pair, box_grid):
    with pytest.raises(SnapshotFormatError):
        decode_paired_field(encode_paired_field(random_pair), grid=box_grid)


def test_sphere_snapshot_values_round_trip():
    u = smooth_random_sphere(periodic_grid(1, 24), 3, np.random.SeedSequence(2))
    v = decode_sphere_field(encode_sphere_field(u))
    assert np.array_equal(u.values, v.values)
    assert v.grid.shape == u.grid.shape
