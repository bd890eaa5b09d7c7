"""
Tests for the MPDO representation and Trotterized relaxation
"""
import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse.linalg as spla

from drivencavity.analysis.observables import density, g1, g2, variance
from drivencavity.errors import CheckpointError, SiteIndexError, UnsupportedBoundaryError
from drivencavity.lattice.fock import local_annihilation, local_number, unvectorize, vectorize
from drivencavity.lattice.model import build_liouvillian
from drivencavity.models.schemas import Boundary, DenseSolverOptions, LatticeSpec, ModelParams, MpdoOptions
from drivencavity.solvers.dense import evolve, fock_product_state, product_state, steady_state
from drivencavity.solvers.mpdo import (
    init_mott,
    init_product,
    init_vacuum,
    load_checkpoint,
    local_expectation,
    local_expectations,
    mpdo_to_dense,
    mpdo_trace,
    relax_to_steady,
    save_checkpoint,
    trotter_step,
    two_point,
)
from drivencavity.tests.conftest import random_density_matrix


def _evolve(state, params, dt, t_final):
    for _ in range(int(round(t_final / dt))):
        state = trotter_step(state, params, dt)
    return state


def test_vacuum_initial_state(chain3):
    state = init_vacuum(chain3, max_bond=8, cutoff=1e-10)
    assert mpdo_trace(state) == pytest.approx(1.0)
    assert state.bond_dims == [1, 1]
    assert np.allclose(local_expectations(state, local_number(3)), 0.0)
    assert all(t.shape[1] == 9 for t in state.tensors)


def test_invalid_bond_dimension(chain3):
    with pytest.raises(ValueError):
        init_vacuum(chain3, max_bond=0)


def test_dark_state_is_fixed_point(chain3):
    params = ModelParams.resonant(20.0, (0.1, 1.0))
    state = _evolve(init_vacuum(chain3), params, 0.05, 1.0)
    dense = mpdo_to_dense(state)
    expected = fock_product_state(chain3, 0).rho
    assert np.allclose(dense.rho, expected, atol=1e-12)
    assert state.bond_dims == [1, 1]


def test_product_states_match_dense_contraction(chain3, rng):
    locals_ = [random_density_matrix(3, rng) for _ in range(3)]
    mpdo = init_product(chain3, locals_)
    dense = product_state(chain3, locals_)
    assert np.allclose(mpdo_to_dense(mpdo).rho, dense.rho, atol=1e-12)
    a = local_annihilation(3)
    for j in range(3):
        assert local_expectation(mpdo, local_number(3), j) == pytest.approx(
            np.trace(dense.rho @ _embed_dense(local_number(3).matrix, j)), abs=1e-12
        )
    value = two_point(mpdo, a.dag, 0, a, 2)
    expected = np.trace(dense.rho @ _embed_dense(a.dag.matrix, 0) @ _embed_dense(a.matrix, 2))
    assert value == pytest.approx(expected, abs=1e-12)


def _embed_dense(op, j, n=3, d=3):
    out = np.ones((1, 1))
    for site in range(n):
        out = np.kron(out, op if site == j else np.eye(d))
    return out


def test_mott_state_has_no_coherence(chain3):
    state = init_mott(chain3)
    a = local_annihilation(3)
    assert two_point(state, a.dag, 0, a, 2) == 0.0
    assert local_expectation(state, local_number(3), 1) == pytest.approx(1.0)


def test_site_range_checked(chain3):
    state = init_vacuum(chain3)
    with pytest.raises(SiteIndexError):
        local_expectation(state, local_number(3), 3)
    with pytest.raises(SiteIndexError):
        two_point(state, local_number(3), 0, local_number(3), -1)


def test_uncoupled_sites_follow_single_site_dynamics(fig3_params):
    spec = LatticeSpec(n_sites=3, local_dim=3)
    params = fig3_params.at_point(5.0, 0.0)
    state = _evolve(init_vacuum(spec), params, 0.01, 1.0)
    single = LatticeSpec(n_sites=1, local_dim=3)
    generator = build_liouvillian(single, params).matrix.toarray()
    rho = unvectorize(la.expm(generator) @ vectorize(fock_product_state(single, 0).rho), 3)
    n = local_number(3).matrix
    expected = np.trace(rho @ n).real
    assert state.bond_dims == [1, 1]
    for j in range(3):
        assert local_expectation(state, n, j).real == pytest.approx(expected, abs=1e-8)


def test_matches_dense_evolution(chain3, gentle_params):
    state = _evolve(init_vacuum(chain3, max_bond=64, cutoff=1e-12), gentle_params, 0.01, 2.0)
    exact = evolve(fock_product_state(chain3, 0), build_liouvillian(chain3, gentle_params), 2.0, 0.01)
    assert np.max(np.abs(mpdo_to_dense(state).rho - exact.rho)) <= 5e-4
    for j in range(3):
        assert density(state, j) == pytest.approx(density(exact, j), abs=5e-4)


def test_trotter_error_is_second_order(chain3, gentle_params):
    t_final = 1.0
    liouvillian = build_liouvillian(chain3, gentle_params)
    start = vectorize(fock_product_state(chain3, 0).rho)
    exact = unvectorize(spla.expm_multiply(liouvillian.matrix.tocsc() * t_final, start), 27)
    errors = []
    for dt in (0.02, 0.01):
        state = _evolve(init_vacuum(chain3, max_bond=64, cutoff=1e-14), gentle_params, dt, t_final)
        errors.append(np.linalg.norm(mpdo_to_dense(state).rho - exact))
    assert 3.0 <= errors[0] / errors[1] <= 5.0


def test_trace_and_hermiticity_during_evolution(chain3, fig3_params):
    state = init_vacuum(chain3)
    n = local_number(3)
    for _ in range(50):
        state = trotter_step(state, fig3_params, 0.01)
        assert mpdo_trace(state) == pytest.approx(1.0, abs=1e-12)
        assert state.trace_drift <= 1e-6
        assert np.max(np.abs(local_expectations(state, n).imag)) <= 1e-8


def test_bond_limit_is_flagged(chain3):
    params = ModelParams.resonant(2.0, (0.1, 1.0), hopping=1.0, drive=2.0)
    state = _evolve(init_vacuum(chain3, max_bond=1, cutoff=0.0), params, 0.05, 0.5)
    assert state.bond_overflow
    assert 0.0 < state.truncation_error <= 1.0
    assert max(state.bond_dims) == 1


def test_trotter_step_rejects_nonpositive_dt(chain3, gentle_params):
    with pytest.raises(ValueError):
        trotter_step(init_vacuum(chain3), gentle_params, 0.0)


def test_relax_without_drive_converges_after_two_quiet_windows(chain3):
    params = ModelParams.resonant(20.0, (0.1, 1.0), hopping=0.5)
    opts = MpdoOptions(dt=0.1, sample_interval=1.0, t_max=50.0)
    state, report = relax_to_steady(chain3, params, opts)
    assert report.converged
    assert report.t_reached == pytest.approx(2.0)
    assert report.observable_drift <= 1e-12
    assert np.allclose(local_expectations(state, local_number(3)), 0.0)


def test_relax_uncoupled_matches_single_site_steady_state(fig3_params):
    spec = LatticeSpec(n_sites=3, local_dim=3)
    params = fig3_params.at_point(5.0, 0.0)
    opts = MpdoOptions(dt=0.1, drift_tol=1e-8, t_max=1000.0)
    state, report = relax_to_steady(spec, params, opts)
    assert report.converged
    single = LatticeSpec(n_sites=1, local_dim=3)
    exact, _ = steady_state(build_liouvillian(single, params))
    for j in range(3):
        assert density(state, j) == pytest.approx(density(exact, 0), abs=1e-6)
        assert variance(state, j) == pytest.approx(variance(exact, 0), abs=1e-6)


def test_bond_check_with_uncapped_bonds(chain3, gentle_params):
    opts = MpdoOptions(dt=0.05, sample_interval=1.0, t_max=3.0, max_bond=16, bond_check=True, bond_check_tol=1e-4)
    _, report = relax_to_steady(chain3, gentle_params, opts)
    assert report.bond_check_tol == 1e-4
    assert report.bond_check_change <= 1e-12
    assert report.bond_check_passed


def test_bond_check_detects_a_tight_cap(chain3, gentle_params):
    opts = MpdoOptions(dt=0.05, sample_interval=1.0, t_max=3.0, max_bond=1, bond_check=True, bond_check_tol=1e-12)
    _, report = relax_to_steady(chain3, gentle_params, opts)
    assert report.bond_check_change > 1e-6
    assert report.bond_check_passed is False


def test_bond_check_is_off_by_default(chain3, gentle_params):
    _, report = relax_to_steady(chain3, gentle_params, MpdoOptions(dt=0.05, t_max=1.0))
    assert report.bond_check_change is None
    assert report.bond_check_passed is None


def test_relax_requires_open_chain(gentle_params):
    spec = LatticeSpec(n_sites=3, boundary=Boundary.PERIODIC, local_dim=3)
    with pytest.raises(UnsupportedBoundaryError):
        relax_to_steady(spec, gentle_params)


def test_checkpoint_round_trip(tmp_path, chain3, gentle_params):
    state = _evolve(init_vacuum(chain3), gentle_params, 0.05, 0.5)
    path = save_checkpoint(tmp_path / "state.npz", state, gentle_params, 0.5)
    loaded, params, t, previous, below = load_checkpoint(path)
    assert params == gentle_params
    assert t == 0.5
    assert previous is None and below == 0
    assert loaded.center == state.center
    for a, b in zip(loaded.tensors, state.tensors):
        assert np.array_equal(a, b)


def test_missing_checkpoint(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "absent.npz")


def test_resumed_run_continues_identically(tmp_path, chain3, gentle_params):
    base = dict(dt=0.05, sample_interval=1.0, drift_tol=1e-12, checkpoint_every=1.0)
    full, _ = relax_to_steady(chain3, gentle_params, MpdoOptions(t_max=4.0, **base))

    path = tmp_path / "run.npz"
    relax_to_steady(chain3, gentle_params, MpdoOptions(t_max=2.0, **base), checkpoint_path=path)
    resumed, report = relax_to_steady(
        chain3, gentle_params, MpdoOptions(t_max=4.0, **base), checkpoint_path=path, resume=True
    )
    assert report.t_reached == pytest.approx(4.0)
    n = local_number(3)
    assert np.allclose(local_expectations(resumed, n), local_expectations(full, n), atol=1e-10)


def test_checkpoint_from_other_run_rejected(tmp_path, chain3, gentle_params):
    path = save_checkpoint(tmp_path / "other.npz", init_vacuum(chain3), gentle_params, 1.0)
    other = gentle_params.at_point(2.0, 0.1)
    with pytest.raises(CheckpointError):
        relax_to_steady(chain3, other, MpdoOptions(t_max=2.0), checkpoint_path=path, resume=True)


@pytest.mark.slow
@pytest.mark.parametrize("drive, hopping", [(5.0, 0.1), (5.0, 0.5), (5.0, 1.0)])
def test_steady_state_matches_dense_oracle(chain3, fig3_params, drive, hopping):
    params = fig3_params.at_point(drive, hopping)
    opts = MpdoOptions(dt=0.01, drift_tol=1e-7, t_max=2000.0, cutoff=1e-12)
    state, report = relax_to_steady(chain3, params, opts)
    assert report.converged
    exact, _ = steady_state(build_liouvillian(chain3, params), DenseSolverOptions())
    for i in range(3):
        assert density(state, i) == pytest.approx(density(exact, i), abs=1e-3)
        assert variance(state, i) == pytest.approx(variance(exact, i), abs=1e-3)
        for j in range(3):
            assert abs(g1(state, i, j) - g1(exact, i, j)) <= 1e-3
            assert g2(state, i, j) == pytest.approx(g2(exact, i, j), abs=1e-3)
