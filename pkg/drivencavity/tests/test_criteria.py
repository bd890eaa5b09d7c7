"""
Tests for the phase-diagram checks
"""
import numpy as np

from drivencavity.analysis.criteria import (
    has_interior_maximum,
    is_contiguous,
    is_parity_nonmonotone,
    largest_region,
    lobe_narrowing_violations,
    monotone_violations,
    mott_mask,
    region_extent,
)


def test_mott_mask_thresholds():
    densities = np.array([[1.0, 1.05, 1.2], [0.95, 0.5, 1.0]])
    variances = np.array([[0.1, 0.19, 0.1], [0.3, 0.1, 0.2]])
    expected = np.array([[True, True, False], [False, False, True]])
    assert np.array_equal(mott_mask(densities, variances), expected)


def test_nan_points_are_not_mott():
    mask = mott_mask(np.array([np.nan, 1.0]), np.array([0.0, np.nan]))
    assert not mask.any()


def test_largest_region_picks_biggest_component():
    mask = np.array([
        [1, 1, 0, 0],
        [1, 0, 0, 1],
        [0, 0, 0, 1],
        [0, 0, 0, 0],
    ], dtype=bool)
    region = largest_region(mask)
    assert region.sum() == 3
    assert region[0, 0] and region[1, 0] and not region[1, 3]
    assert not largest_region(np.zeros((2, 2), dtype=bool)).any()


def test_diagonal_neighbours_are_separate():
    mask = np.array([[1, 0], [0, 1]], dtype=bool)
    assert not is_contiguous(mask)
    assert is_contiguous(np.array([[1, 1], [0, 1]], dtype=bool))
    assert not is_contiguous(np.zeros((2, 2), dtype=bool))


def test_region_extent_per_drive_row():
    mask = np.array([[1, 0, 0], [1, 1, 0], [1, 1, 1]], dtype=bool)
    assert region_extent(mask).tolist() == [1, 2, 3]
    assert monotone_violations(region_extent(mask)) == 0


def test_lobe_narrows_toward_low_drive():
    assert lobe_narrowing_violations([2, 5, 6, 4, 0, 0, 0, 0]) == 0
    assert lobe_narrowing_violations([5, 2, 6, 4]) == 1
    assert lobe_narrowing_violations([0, 0, 0]) == 0
    assert lobe_narrowing_violations([]) == 0


def test_monotone_violations():
    assert monotone_violations([1.0, 2.0, 1.5, 3.0]) == 1
    assert monotone_violations([1.0, 2.0, 1.95, 3.0], tol=0.1) == 0
    assert monotone_violations([3.0, 2.0, 2.5], increasing=False) == 1
    assert monotone_violations([5.0]) == 0


def test_interior_maximum():
    assert has_interior_maximum([0.1, 0.5, 2.0, 0.8])
    assert not has_interior_maximum([0.1, 0.5, 2.0])
    assert not has_interior_maximum([2.0, 1.0, 0.5])
    assert has_interior_maximum([np.nan, 0.1, 1.0, 0.2])
    assert not has_interior_maximum([np.nan, 1.0, 0.2])


def test_parity_oscillations():
    assert is_parity_nonmonotone([1.0, 0.2, 0.4, 0.1])
    assert not is_parity_nonmonotone([1.0, 0.5, 0.25, 0.125])
    assert not is_parity_nonmonotone([1.0, 0.5, 0.51], tol=0.05)
