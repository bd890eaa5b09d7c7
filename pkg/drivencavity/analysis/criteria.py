"""
Qualitative checks on phase-diagram data: Mott regions, monotonicity, peaks
"""
from typing import Sequence
import logging

import numpy as np
from scipy import ndimage

logger = logging.getLogger(__name__)


def mott_mask(densities: np.ndarray, variances: np.ndarray, density_tol: float = 0.1,
              max_variance: float = 0.2) -> np.ndarray:
    """Grid points with density within 1 +/- density_tol and variance <= max_variance"""
    densities = np.asarray(densities, dtype=float)
    variances = np.asarray(variances, dtype=float)
    return (np.abs(densities - 1.0) <= density_tol) & (variances <= max_variance)


def largest_region(mask: np.ndarray) -> np.ndarray:
    """Largest 4-connected component of a boolean grid"""
    labels, count = ndimage.label(np.asarray(mask, dtype=bool))
    if count == 0:
        return np.zeros_like(mask, dtype=bool)
    sizes = ndimage.sum(np.ones_like(labels), labels, index=range(1, count + 1))
    return labels == (int(np.argmax(sizes)) + 1)


def is_contiguous(mask: np.ndarray) -> bool:
    """True when the marked points form a single nonempty 4-connected region"""
    _, count = ndimage.label(np.asarray(mask, dtype=bool))
    return count == 1


def region_extent(mask: np.ndarray) -> np.ndarray:
    """Number of marked hopping points per drive row (rows indexed by drive)"""
    return np.asarray(mask, dtype=bool).sum(axis=1)


def monotone_violations(values: Sequence[float], increasing: bool = True, tol: float = 0.0) -> int:
    """Count successive steps that go the wrong way by more than tol"""
    steps = np.diff(np.asarray(values, dtype=float))
    if not increasing:
        steps = -steps
    return int(np.count_nonzero(steps < -tol))


def has_interior_maximum(values: Sequence[float]) -> bool:
    """Maximum strictly inside the sequence, with a rise before it and a drop after it"""
    values = np.asarray(values, dtype=float)
    finite = np.isfinite(values)
    if np.count_nonzero(finite) < 3:
        return False
    values = values[finite]
    peak = int(np.argmax(values))
    return 0 < peak < len(values) - 1 and values[peak] > values[0] and values[peak] > values[-1]


def is_parity_nonmonotone(magnitudes: Sequence[float], tol: float = 0.0) -> bool:
    """True when the sequence is not monotone decreasing, i.e. it shows troughs"""
    return monotone_violations(magnitudes, increasing=False, tol=tol) > 0


def lobe_narrowing_violations(extent: Sequence[int]) -> int:
    """Rows at or below the widest row where the extent grows as the drive decreases"""
    extent = np.asarray(extent, dtype=float)
    if extent.size == 0 or not extent.any():
        return 0
    widest = int(np.argmax(extent))
    return monotone_violations(extent[:widest + 1], increasing=True)
