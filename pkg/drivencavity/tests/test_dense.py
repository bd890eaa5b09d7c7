"""
Tests for the exact steady-state solver and RK4 evolution
"""
import math
import time

import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp

from drivencavity.analysis.observables import density, level_populations, variance
from drivencavity.errors import DegenerateSteadyStateError, DimensionBudgetError, UnstableStepError
from drivencavity.lattice.model import build_liouvillian
from drivencavity.models.schemas import Boundary, DenseSolverOptions, LatticeSpec, ModelParams
from drivencavity.solvers.dense import (
    DenseState,
    SolveMethod,
    evolve,
    fock_product_state,
    maximally_mixed_state,
    residual,
    smallest_singular_values,
    steady_state,
)

SINGLE = LatticeSpec(n_sites=1, local_dim=3)


def test_vacuum_without_drive():
    params = ModelParams.resonant(100.0, (0.1, 1.0))
    state, report = steady_state(build_liouvillian(SINGLE, params))
    expected = np.zeros((3, 3))
    expected[0, 0] = 1.0
    assert np.allclose(state.rho, expected, atol=1e-12)
    assert report.method == SolveMethod.NULL_SPACE
    assert report.residual <= 1e-10


def test_saturated_single_site():
    params = ModelParams.resonant(100.0, (0.1, 1.0), drive=20.0)
    state, report = steady_state(build_liouvillian(SINGLE, params))
    assert density(state, 0) == pytest.approx(1.0, abs=0.02)
    assert variance(state, 0) == pytest.approx(1.0 / 6.0, abs=0.02)
    assert np.allclose(level_populations(state, 0), [1 / 12, 10 / 12, 1 / 12], atol=0.02)
    assert len(report.singular_values) == 2
    assert report.singular_values[0] < 1e-10 < report.singular_values[1]


def test_saturation_improves_with_drive():
    errors = []
    for drive in (5.0, 10.0, 20.0):
        params = ModelParams.resonant(100.0, (0.1, 1.0), drive=drive)
        state, _ = steady_state(build_liouvillian(SINGLE, params))
        errors.append(abs(level_populations(state, 0)[1] - 10 / 12))
    assert errors[2] < errors[0]


def test_steady_state_invariants():
    spec = LatticeSpec(n_sites=2, local_dim=3)
    params = ModelParams(delta=-1.0, interaction=2.0, hopping=0.3, drive=0.8, gammas=(0.2, 1.0))
    liouvillian = build_liouvillian(spec, params)
    state, report = steady_state(liouvillian)
    assert residual(liouvillian, state) <= 1e-10
    assert state.trace == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(state.rho, state.rho.conj().T, atol=1e-10)
    assert state.eigenvalues.min() >= -1e-8


def test_residual_cases():
    spec = LatticeSpec(n_sites=1, local_dim=3)
    decay = build_liouvillian(spec, ModelParams(gammas=(0.1, 1.0)))
    assert residual(decay, fock_product_state(spec, 0)) == 0.0
    driven = build_liouvillian(spec, ModelParams(drive=1.0, gammas=(0.1, 1.0)))
    assert residual(driven, maximally_mixed_state(spec)) > 0.0


def test_translation_invariance_on_ring():
    spec = LatticeSpec(n_sites=3, boundary=Boundary.PERIODIC, local_dim=3)
    params = ModelParams.resonant(6.0, (0.1, 1.0), hopping=0.4, drive=1.5)
    state, _ = steady_state(build_liouvillian(spec, params))
    densities = [density(state, j) for j in range(3)]
    assert max(densities) - min(densities) <= 1e-9


def test_mott_point_of_phase_diagram():
    spec = LatticeSpec(n_sites=3, boundary=Boundary.PERIODIC, local_dim=4)
    params = ModelParams.resonant(100.0, (0.1, 1.0, 10.0), hopping=0.1, drive=5.0)
    opts = DenseSolverOptions(check_uniqueness=False)
    state, report = steady_state(build_liouvillian(spec, params), opts)
    assert report.residual <= 1e-10
    assert density(state, 1) == pytest.approx(1.0, abs=0.1)
    assert variance(state, 1) <= 0.2
    assert state.eigenvalues.min() >= -1e-8


def test_dimension_budget():
    spec = LatticeSpec(n_sites=3, local_dim=3)
    params = ModelParams(gammas=(0.1, 1.0))
    with pytest.raises(DimensionBudgetError):
        steady_state(build_liouvillian(spec, params), DenseSolverOptions(max_liouville_dim=100))


def test_degenerate_generator_is_reported():
    spec = LatticeSpec(n_sites=1, local_dim=2)
    with pytest.raises(DegenerateSteadyStateError) as excinfo:
        steady_state(build_liouvillian(spec, ModelParams(gammas=(0.0,))))
    assert len(excinfo.value.singular_values) == 2
    assert excinfo.value.singular_values[1] <= 1e-12


def test_evolve_zero_time_returns_input():
    spec = LatticeSpec(n_sites=1, local_dim=3)
    state = fock_product_state(spec, 1)
    assert evolve(state, build_liouvillian(spec, ModelParams(gammas=(0.1, 1.0))), 0.0, 0.01) is state


def test_amplitude_damping_evolution():
    spec = LatticeSpec(n_sites=1, local_dim=2)
    state = evolve(fock_product_state(spec, 1), build_liouvillian(spec, ModelParams(gammas=(1.0,))), 1.0, 0.001)
    assert state.rho[1, 1].real == pytest.approx(math.exp(-1.0), abs=1e-8)


def test_long_evolution_reaches_steady_state():
    spec = LatticeSpec(n_sites=2, local_dim=3)
    params = ModelParams(delta=-1.0, interaction=2.0, hopping=0.3, drive=0.8, gammas=(1.0, 2.0))
    liouvillian = build_liouvillian(spec, params)
    steady, _ = steady_state(liouvillian)
    evolved = evolve(fock_product_state(spec, 0), liouvillian, 60.0, 0.01)
    assert np.max(np.abs(evolved.rho - steady.rho)) <= 1e-6


def test_unstable_step_detected():
    spec = LatticeSpec(n_sites=1, local_dim=3)
    params = ModelParams.resonant(100.0, (0.1, 1.0), drive=20.0)
    with pytest.raises(UnstableStepError):
        evolve(fock_product_state(spec, 0), build_liouvillian(spec, params), 10.0, 1.0)


def test_evolve_rejects_bad_arguments():
    spec = LatticeSpec(n_sites=1, local_dim=2)
    liouvillian = build_liouvillian(spec, ModelParams(gammas=(1.0,)))
    with pytest.raises(ValueError):
        evolve(fock_product_state(spec, 0), liouvillian, 1.0, 0.0)
    with pytest.raises(ValueError):
        evolve(fock_product_state(spec, 0), liouvillian, -1.0, 0.1)


def test_physical_rho_clips_small_negative_eigenvalues():
    spec = LatticeSpec(n_sites=1, local_dim=2)
    state = DenseState(np.diag([1.0 + 1e-9, -1e-9]).astype(complex), spec)
    assert state.physical_rho[1, 1] == pytest.approx(0.0, abs=1e-15)
    assert state.eigenvalues.min() < 0


def test_dense_singular_values_match_svd(rng):
    n = 30
    matrix = sp.csr_matrix(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    assert np.allclose(smallest_singular_values(matrix, 2), np.sort(la.svdvals(matrix.toarray()))[:2])


def test_lu_floor_bounds_second_singular_value():
    spec = LatticeSpec(n_sites=2, local_dim=3)
    params = ModelParams(delta=-1.0, interaction=2.0, hopping=0.3, drive=0.8, gammas=(0.2, 1.0))
    liouvillian = build_liouvillian(spec, params)
    _, exact = steady_state(liouvillian, DenseSolverOptions(svd_dim_limit=1024))
    _, factored = steady_state(liouvillian, DenseSolverOptions(svd_dim_limit=1))
    assert factored.singular_values[0] <= 1e-9
    assert 0.0 < factored.singular_values[1] <= exact.singular_values[1] * (1 + 1e-8)


def test_degenerate_generator_is_reported_above_dense_limit():
    spec = LatticeSpec(n_sites=1, local_dim=2)
    with pytest.raises(DegenerateSteadyStateError) as excinfo:
        steady_state(build_liouvillian(spec, ModelParams(gammas=(0.0,))), DenseSolverOptions(svd_dim_limit=1))
    assert excinfo.value.singular_values[1] == 0.0


def test_uniqueness_check_on_mott_lobe_point_is_fast():
    spec = LatticeSpec(n_sites=3, boundary=Boundary.PERIODIC, local_dim=4)
    params = ModelParams.resonant(100.0, (0.1, 1.0, 10.0), hopping=0.0, drive=1.0)
    start = time.perf_counter()
    _, report = steady_state(build_liouvillian(spec, params))
    elapsed = time.perf_counter() - start
    assert report.method == SolveMethod.NULL_SPACE
    assert 0.0 < report.singular_values[1] <= 0.3
    assert elapsed < 30.0
