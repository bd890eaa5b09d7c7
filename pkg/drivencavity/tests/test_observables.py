"""
Tests for densities, variances, coherences and the correlation-length fit
"""
import math

import numpy as np
import pytest

from drivencavity.analysis.observables import (
    CorrelationRow,
    correlation_row,
    density,
    fit_correlation_length,
    g1,
    g2,
    g2_row,
    level_populations,
    variance,
)
from drivencavity.errors import CorrelationFitError, SiteIndexError, UndefinedCorrelationError
from drivencavity.models.schemas import LatticeSpec
from drivencavity.solvers.dense import DenseState, fock_product_state, product_state
from drivencavity.solvers.mpdo import init_mott, init_product, init_vacuum
from drivencavity.tests.conftest import random_density_matrix

SPEC = LatticeSpec(n_sites=3, local_dim=3)


def _fock(level):
    local = np.zeros((3, 3), dtype=complex)
    local[level, level] = 1.0
    return local


@pytest.mark.parametrize("state", [fock_product_state(SPEC, 0), init_vacuum(SPEC)])
def test_vacuum(state):
    assert density(state, 1) == pytest.approx(0.0)
    assert variance(state, 1) == pytest.approx(0.0)
    with pytest.raises(UndefinedCorrelationError):
        g1(state, 0, 1)
    with pytest.raises(UndefinedCorrelationError):
        g2(state, 1, 1)


@pytest.mark.parametrize("state", [fock_product_state(SPEC, 1), init_mott(SPEC)])
def test_mott_product(state):
    assert density(state, 2) == pytest.approx(1.0)
    assert variance(state, 2) == pytest.approx(0.0, abs=1e-12)
    assert g1(state, 1, 1) == 1.0
    assert abs(g1(state, 0, 2)) == pytest.approx(0.0, abs=1e-12)
    assert g2(state, 1, 1) == pytest.approx(0.0, abs=1e-12)
    assert g2(state, 0, 2) == pytest.approx(1.0)


def test_site_out_of_range():
    with pytest.raises(SiteIndexError):
        density(fock_product_state(SPEC, 1), 3)
    with pytest.raises(SiteIndexError):
        g1(init_mott(SPEC), 0, 5)


def test_unsupported_state_type():
    for observable in (density, variance, level_populations):
        with pytest.raises(TypeError, match="Unsupported state type"):
            observable(object(), 0)
    with pytest.raises(TypeError):
        g1(object(), 0, 1)
    with pytest.raises(TypeError):
        correlation_row(object())


def test_correlation_bounds_and_symmetry(rng):
    spec = LatticeSpec(n_sites=3, local_dim=2)
    for _ in range(5):
        state = DenseState(random_density_matrix(8, rng), spec)
        for i in range(3):
            for j in range(3):
                assert abs(g1(state, i, j)) <= 1.0 + 1e-12
                assert abs(g1(state, i, j) - np.conj(g1(state, j, i))) <= 1e-10
                assert abs(g2(state, i, j) - g2(state, j, i)) <= 1e-10
                assert g2(state, i, j) >= -1e-12


def test_variance_matches_number_distribution(rng):
    state = DenseState(random_density_matrix(27, rng), SPEC)
    for j in range(3):
        p = level_populations(state, j)
        levels = np.arange(3)
        expected = p @ levels ** 2 - (p @ levels) ** 2
        assert p.sum() == pytest.approx(1.0)
        assert variance(state, j) == pytest.approx(expected, abs=1e-12)


def test_backends_agree_on_product_states(rng):
    locals_ = [random_density_matrix(3, rng) for _ in range(3)]
    dense = product_state(SPEC, locals_)
    mpdo = init_product(SPEC, locals_)
    for j in range(3):
        assert density(mpdo, j) == pytest.approx(density(dense, j), abs=1e-12)
        assert variance(mpdo, j) == pytest.approx(variance(dense, j), abs=1e-12)
        assert np.allclose(level_populations(mpdo, j), level_populations(dense, j), atol=1e-12)
        for i in range(3):
            assert abs(g1(mpdo, i, j) - g1(dense, i, j)) <= 1e-12
            assert g2(mpdo, i, j) == pytest.approx(g2(dense, i, j), abs=1e-12)


def test_rows_mark_empty_sites_with_nan():
    state = product_state(SPEC, [_fock(0), _fock(1), _fock(2)])
    row = correlation_row(state)
    assert row.anchor == 1
    assert math.isnan(row.values[0].real)
    assert row.values[1] == 1.0
    g2s = g2_row(state)
    assert math.isnan(g2s[0])
    assert g2s[2] == pytest.approx(1.0)


def _row(values, anchor=5):
    return CorrelationRow(anchor, np.asarray(values, dtype=complex))


def test_fit_recovers_exact_exponential():
    sites = np.arange(11)
    fit = fit_correlation_length(_row(np.exp(-np.abs(sites - 5) / 2.0)))
    assert fit.success
    assert fit.correlation_length == pytest.approx(2.0, abs=1e-9)
    assert fit.amplitude == pytest.approx(1.0, abs=1e-9)
    assert fit.n_points == 10
    assert fit.rms_residual == pytest.approx(0.0, abs=1e-12)


def test_fit_separates_amplitude():
    sites = np.arange(11)
    fit = fit_correlation_length(_row(0.5 * np.exp(-np.abs(sites - 5) / 3.0)))
    assert fit.correlation_length == pytest.approx(3.0, abs=1e-9)
    assert fit.amplitude == pytest.approx(0.5, abs=1e-9)


def test_fit_with_unit_amplitude():
    sites = np.arange(11)
    fit = fit_correlation_length(_row(np.exp(-np.abs(sites - 5) / 2.0)), free_amplitude=False)
    assert fit.correlation_length == pytest.approx(2.0, abs=1e-9)
    assert fit.amplitude == 1.0


@pytest.mark.parametrize("length", [0.5, 1.0, 2.0, 5.0])
def test_fit_tolerates_small_noise(rng, length):
    sites = np.arange(11)
    noise = 1.0 + rng.uniform(-0.01, 0.01, size=11)
    fit = fit_correlation_length(_row(np.exp(-np.abs(sites - 5) / length) * noise))
    assert fit.correlation_length == pytest.approx(length, rel=0.05)


def test_fit_needs_three_points():
    values = np.full(11, np.nan)
    values[5], values[6], values[7] = 1.0, 0.5, 0.25
    with pytest.raises(CorrelationFitError):
        fit_correlation_length(_row(values))
    values = np.zeros(11)
    values[5] = 1.0
    with pytest.raises(CorrelationFitError):
        fit_correlation_length(_row(values))


def test_fit_flags_non_decaying_data():
    sites = np.arange(11)
    fit = fit_correlation_length(_row(np.exp(np.abs(sites - 5) / 4.0)))
    assert not fit.success
    assert math.isinf(fit.correlation_length)


def test_fit_uses_magnitudes_of_oscillating_rows():
    sites = np.arange(11)
    values = np.exp(-np.abs(sites - 5) / 2.0) * np.exp(1j * np.pi * sites)
    fit = fit_correlation_length(_row(values))
    assert fit.correlation_length == pytest.approx(2.0, abs=1e-9)
