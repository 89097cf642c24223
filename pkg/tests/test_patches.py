"""Tests for patch extraction and overlap-add reconstruction."""

import numpy as np
import pytest

from cosfuse import patches


def test_build_grid_exact_tiling():
    g = patches.build_grid(13, 13, n=7, p=1)
    assert g.row_offsets == (0, 6)
    assert g.col_offsets == (0, 6)
    assert (g.grid_rows, g.grid_cols) == (2, 2)


def test_build_grid_clamped_last_offset():
    g = patches.build_grid(12, 12, n=7, p=1)
    assert g.row_offsets == (0, 5)
    assert g.col_offsets == (0, 5)


def test_build_grid_single_patch():
    g = patches.build_grid(7, 7, n=7, p=1)
    assert (g.grid_rows, g.grid_cols) == (1, 1)
    assert g.row_offsets == (0,)


def test_build_grid_rejects_oversized_patch():
    with pytest.raises(ValueError):
        patches.build_grid(5, 9, n=7, p=1)


def test_build_grid_rejects_bad_overlap():
    with pytest.raises(ValueError):
        patches.build_grid(10, 10, n=4, p=4)
    with pytest.raises(ValueError):
        patches.build_grid(10, 10, n=4, p=-1)


def test_extract_constant_image():
    g = patches.build_grid(10, 8, n=3, p=1)
    out = patches.extract(np.full((8, 10), 4.5), g)
    assert len(out) == g.grid_rows * g.grid_cols
    for p in out:
        np.testing.assert_array_equal(p.data, np.full(9, 4.5))


def test_extract_indexing_on_ramp():
    img = np.arange(13 * 13, dtype=float).reshape(13, 13)
    g = patches.build_grid(13, 13, n=7, p=1)
    out = patches.extract(img, g)
    by_cell = {(p.grid_row, p.grid_col): p for p in out}
    assert by_cell[(0, 0)].data[0] == img[0, 0]
    assert by_cell[(1, 1)].data[0] == img[6, 6]
    # row-major vectorization inside the patch
    np.testing.assert_array_equal(by_cell[(0, 0)].data[:7], img[0, :7])


def test_extract_rejects_mismatched_image():
    g = patches.build_grid(10, 10, n=3, p=0)
    with pytest.raises(ValueError):
        patches.extract(np.zeros((9, 10)), g)


def test_overlap_add_single_patch_reshape():
    g = patches.build_grid(4, 4, n=4, p=1)
    data = np.arange(16, dtype=float)
    out = patches.overlap_add([patches.Patch(0, 0, data)], g)
    np.testing.assert_array_equal(out, data.reshape(4, 4))


def test_overlap_add_two_cover_average():
    # width 3, n=2, p=1: two patches share the middle column.
    g = patches.build_grid(3, 2, n=2, p=1)
    assert (g.grid_rows, g.grid_cols) == (1, 2)
    left = patches.Patch(0, 0, np.zeros(4))
    right = patches.Patch(0, 1, np.full(4, 2.0))
    out = patches.overlap_add([left, right], g)
    np.testing.assert_array_equal(out[:, 0], [0.0, 0.0])
    np.testing.assert_array_equal(out[:, 1], [1.0, 1.0])
    np.testing.assert_array_equal(out[:, 2], [2.0, 2.0])


def test_overlap_add_rejects_incomplete_list():
    g = patches.build_grid(6, 6, n=3, p=1)
    plist = patches.extract(np.zeros((6, 6)), g)
    with pytest.raises(ValueError):
        patches.overlap_add(plist[:-1], g)


def test_overlap_add_rejects_duplicates():
    g = patches.build_grid(3, 3, n=3, p=0)
    p = patches.Patch(0, 0, np.zeros(9))
    with pytest.raises(ValueError):
        patches.overlap_add([p, p], g)


@pytest.mark.parametrize("n", [5, 6, 7, 8, 9])
@pytest.mark.parametrize("p", [0, 1, 2])
def test_round_trip_identity(n, p):
    rng = np.random.default_rng(n * 10 + p)
    img = rng.uniform(0, 255, size=(23, 31))
    g = patches.build_grid(31, 23, n=n, p=p)
    out = patches.overlap_add(patches.extract(img, g), g)
    assert np.abs(out - img).max() <= 1e-12


@pytest.mark.parametrize("n,p", [(3, 0), (5, 2), (7, 1), (4, 3)])
def test_coverage_at_least_one(n, p):
    g = patches.build_grid(17, 11, n=n, p=p)
    counts = patches.cover_counts(g)
    assert counts.min() >= 1


def test_extract_is_linear():
    rng = np.random.default_rng(8)
    g = patches.build_grid(14, 12, n=5, p=2)
    i1 = rng.standard_normal((12, 14))
    i2 = rng.standard_normal((12, 14))
    a, b = 2.5, -1.25
    lhs = patches.extract_matrix(a * i1 + b * i2, g)
    rhs = a * patches.extract_matrix(i1, g) + b * patches.extract_matrix(i2, g)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_matrix_and_list_apis_agree():
    rng = np.random.default_rng(15)
    img = rng.uniform(0, 1, size=(9, 11))
    g = patches.build_grid(11, 9, n=4, p=1)
    P = patches.extract_matrix(img, g)
    plist = patches.extract(img, g)
    for idx, patch in enumerate(plist):
        np.testing.assert_array_equal(patch.data, P[:, idx])
    np.testing.assert_array_equal(
        patches.overlap_add(plist, g), patches.overlap_add_matrix(P, g))
