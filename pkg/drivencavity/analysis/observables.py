"""
Densities, number fluctuations, normalized coherences and the exponential
correlation-length fit. Every function accepts a DenseState or an MpdoState.
"""
from dataclasses import dataclass
from functools import singledispatch
from typing import Optional
import logging
import math

import numpy as np
import scipy.sparse as sp

from drivencavity.errors import CorrelationFitError, SiteIndexError, UndefinedCorrelationError
from drivencavity.lattice.fock import (
    LocalOperator,
    embed,
    local_annihilation,
    local_number,
    local_projector,
)
from drivencavity.models.schemas import LatticeSpec, ModelParams
from drivencavity.solvers.dense import CLIP_TOL, DenseState
from drivencavity.solvers.mpdo import MpdoState, local_expectation, two_point

logger = logging.getLogger(__name__)

# densities at or below this are treated as empty sites
ZERO_DENSITY = 1e-12
NOISE_FLOOR = 1e-8


def _spec(state) -> LatticeSpec:
    if not isinstance(state, (DenseState, MpdoState)):
        raise TypeError(f"Unsupported state type {type(state).__name__}")
    return state.spec


def _n_sites(state) -> int:
    return _spec(state).n_sites


def _check_site(state, j: int) -> None:
    if not 0 <= j < _n_sites(state):
        raise SiteIndexError(f"Site {j} outside 0..{_n_sites(state) - 1}")


@singledispatch
def expectation(state, op: LocalOperator, j: int) -> complex:
    """<op_j> = Tr(op_j rho)"""
    raise TypeError(f"Unsupported state type {type(state).__name__}")


@expectation.register
def _(state: DenseState, op: LocalOperator, j: int) -> complex:
    _check_site(state, j)
    embedded = embed(op, j, state.spec).matrix
    return complex(embedded.multiply(state.physical_rho.T).sum())


@expectation.register
def _(state: MpdoState, op: LocalOperator, j: int) -> complex:
    return local_expectation(state, op, j)


@singledispatch
def correlator(state, op_a: LocalOperator, i: int, op_b: LocalOperator, j: int) -> complex:
    """<A_i B_j>; for i == j the local product A B"""
    raise TypeError(f"Unsupported state type {type(state).__name__}")


@correlator.register
def _(state: DenseState, op_a: LocalOperator, i: int, op_b: LocalOperator, j: int) -> complex:
    _check_site(state, i)
    _check_site(state, j)
    if i == j:
        return expectation(state, op_a @ op_b, i)
    product = sp.csr_matrix(embed(op_a, i, state.spec).matrix @ embed(op_b, j, state.spec).matrix)
    return complex(product.multiply(state.physical_rho.T).sum())


@correlator.register
def _(state: MpdoState, op_a: LocalOperator, i: int, op_b: LocalOperator, j: int) -> complex:
    return two_point(state, op_a, i, op_b, j)


def density(state, j: int) -> float:
    """<n_j>"""
    return expectation(state, local_number(_spec(state).local_dim), j).real


def variance(state, j: int) -> float:
    """<n_j^2> - <n_j>^2, with round-off negatives clipped to zero"""
    n = local_number(_spec(state).local_dim)
    mean = expectation(state, n, j).real
    value = expectation(state, n @ n, j).real - mean ** 2
    if value < -CLIP_TOL:
        logger.warning("Negative number variance %.3e on site %d", value, j)
    return max(value, 0.0)


def level_populations(state, j: int) -> np.ndarray:
    """Local occupation probabilities p_m = <|m><m|_j>, m = 0..d-1"""
    d = _spec(state).local_dim
    return np.array([expectation(state, local_projector(m, d), j).real for m in range(d)])


def _densities_for(state, i: int, j: int):
    ni, nj = density(state, i), density(state, j)
    for site, value in ((i, ni), (j, nj)):
        if value <= ZERO_DENSITY:
            raise UndefinedCorrelationError(f"g-function undefined: density {value:.3e} on site {site}")
    return ni, nj


def g1(state, i: int, j: int) -> complex:
    """<a_i^dag a_j> / sqrt(<n_i><n_j>)"""
    _check_site(state, i)
    _check_site(state, j)
    ni, nj = _densities_for(state, i, j)
    if i == j:
        return complex(1.0)
    a = local_annihilation(_spec(state).local_dim)
    return correlator(state, a.dag, i, a, j) / math.sqrt(ni * nj)


def g2(state, i: int, j: int) -> float:
    """<a_i^dag a_j^dag a_j a_i> / (<n_i><n_j>)"""
    _check_site(state, i)
    _check_site(state, j)
    ni, nj = _densities_for(state, i, j)
    d = _spec(state).local_dim
    if i == j:
        a = local_annihilation(d)
        value = expectation(state, a.dag @ a.dag @ a @ a, i)
    else:
        n = local_number(d)
        value = correlator(state, n, i, n, j)
    if abs(value.imag) > CLIP_TOL * max(1.0, abs(value.real)):
        logger.warning("g2(%d, %d) has imaginary part %.3e", i, j, value.imag)
    return value.real / (ni * nj)


@dataclass(frozen=True)
class CorrelationRow:
    """g1(anchor, j) for every site; nan where a density vanishes"""
    anchor: int
    values: np.ndarray
    params: Optional[ModelParams] = None

    def magnitudes(self) -> np.ndarray:
        return np.abs(self.values)


@dataclass(frozen=True)
class FitResult:
    correlation_length: float
    amplitude: float
    rms_residual: float
    n_points: int
    success: bool = True


def correlation_row(state, anchor: Optional[int] = None, params: Optional[ModelParams] = None) -> CorrelationRow:
    """First-order coherence from the anchor site (middle site by default) to every site"""
    if anchor is None:
        anchor = _spec(state).middle_site
    _check_site(state, anchor)
    values = np.full(_n_sites(state), np.nan + 0j, dtype=complex)
    for j in range(_n_sites(state)):
        try:
            values[j] = g1(state, anchor, j)
        except UndefinedCorrelationError:
            pass
    return CorrelationRow(anchor, values, params)


def g2_row(state, anchor: Optional[int] = None) -> np.ndarray:
    if anchor is None:
        anchor = _spec(state).middle_site
    _check_site(state, anchor)
    values = np.full(_n_sites(state), np.nan)
    for j in range(_n_sites(state)):
        try:
            values[j] = g2(state, anchor, j)
        except UndefinedCorrelationError:
            pass
    return values


def fit_correlation_length(row: CorrelationRow, noise_floor: float = NOISE_FLOOR,
                           free_amplitude: bool = True) -> FitResult:
    """Least-squares fit of log|g1| = log A - |j - j0| / lambda, anchor excluded.

    With ``free_amplitude=False`` the amplitude is pinned to 1. Data that do
    not decay give lambda = inf and ``success=False``.
    """
    magnitudes = row.magnitudes()
    sites = np.arange(len(magnitudes))
    mask = (sites != row.anchor) & np.isfinite(magnitudes) & (magnitudes > noise_floor)
    if np.count_nonzero(mask) < 3:
        raise CorrelationFitError(
            f"Only {np.count_nonzero(mask)} sites above the noise floor {noise_floor:g}; need 3"
        )
    x = np.abs(sites[mask] - row.anchor).astype(float)
    y = np.log(magnitudes[mask])
    if free_amplitude:
        slope, intercept = np.polyfit(x, y, 1)
    else:
        slope, intercept = float(x @ y / (x @ x)), 0.0
    rms = float(np.sqrt(np.mean((y - (intercept + slope * x)) ** 2)))
    n_points = int(x.size)
    if slope >= 0:
        return FitResult(math.inf, float(np.exp(intercept)), rms, n_points, success=False)
    return FitResult(float(-1.0 / slope), float(np.exp(intercept)), rms, n_points)
