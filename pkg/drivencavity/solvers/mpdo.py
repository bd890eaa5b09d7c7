"""
Matrix-product density operators and second-order Trotterized Lindblad
evolution (TEBD on the vectorized density matrix) for open chains.

Each site tensor has shape (left bond, d*d, right bond); the middle index is
the column-stacked local superindex s = ket + d*bra. The chain is kept in
mixed canonical form around ``center`` so that every bond truncation is an
SVD of the full two-site block in an orthonormal environment.

Tensor algebra runs on numpy's BLAS; bitwise reproducibility of pinned test
outputs assumes a single BLAS thread (OMP_NUM_THREADS=1).
"""
from dataclasses import dataclass, replace
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union
import json
import logging
import math

import numpy as np
import scipy.linalg as la

from drivencavity.config import settings
from drivencavity.errors import (
    CavityError,
    CheckpointError,
    DimensionBudgetError,
    DimensionMismatchError,
    SiteIndexError,
    UnsupportedBoundaryError,
)
from drivencavity.lattice.fock import (
    LocalOperator,
    dual_vector,
    local_annihilation,
    local_number,
    vectorize,
)
from drivencavity.lattice.model import bond_superoperator, check_compatible, local_liouvillian
from drivencavity.models.schemas import InitialState, LatticeSpec, ModelParams, MpdoOptions
from drivencavity.solvers.dense import DenseState

logger = logging.getLogger(__name__)

OperatorLike = Union[LocalOperator, np.ndarray]


@dataclass
class MpdoState:
    """Vectorized density matrix as a tensor train"""
    tensors: List[np.ndarray]
    spec: LatticeSpec
    max_bond: int
    cutoff: float
    center: int = 0
    # diagnostics of the most recent Trotter sweep
    truncation_error: float = 0.0
    bond_overflow: bool = False
    trace_drift: float = 0.0

    @property
    def super_dim(self) -> int:
        return self.spec.local_dim ** 2

    @property
    def bond_dims(self) -> List[int]:
        return [t.shape[2] for t in self.tensors[:-1]]

    def copy(self) -> "MpdoState":
        return replace(self, tensors=list(self.tensors))


@dataclass
class ConvergenceReport:
    """Outcome of a relaxation run"""
    converged: bool
    t_reached: float
    observable_drift: float
    final_truncation_error: float
    bond_overflow: bool = False
    max_bond_used: int = 1
    steps: int = 0
    # largest change of the checked observables when the bond cap is doubled
    bond_check_change: Optional[float] = None
    bond_check_tol: Optional[float] = None

    @property
    def bond_check_passed(self) -> Optional[bool]:
        if self.bond_check_change is None:
            return None
        return self.bond_check_change < self.bond_check_tol


@dataclass(frozen=True)
class TrotterGates:
    """Exponentiated generators for one second-order step"""
    onsite: np.ndarray
    bond_half: np.ndarray


def _as_matrix(op: OperatorLike) -> np.ndarray:
    return op.matrix if isinstance(op, LocalOperator) else np.asarray(op)


def init_product(spec: LatticeSpec, local_rhos: Sequence[np.ndarray], max_bond: Optional[int] = None,
                 cutoff: Optional[float] = None) -> MpdoState:
    """Product state of the given per-site density matrices, all bonds of dimension 1"""
    if len(local_rhos) != spec.n_sites:
        raise DimensionMismatchError(f"{len(local_rhos)} local states for {spec.n_sites} sites")
    d = spec.local_dim
    tensors = []
    for local in local_rhos:
        local = np.asarray(local, dtype=complex)
        if local.shape != (d, d):
            raise DimensionMismatchError(f"Local state of shape {local.shape} for local_dim {d}")
        tensors.append(vectorize(local).reshape(1, d * d, 1).copy())
    return MpdoState(
        tensors=tensors,
        spec=spec,
        max_bond=settings.max_bond if max_bond is None else max_bond,
        cutoff=settings.svd_cutoff if cutoff is None else cutoff,
    )


def init_fock(spec: LatticeSpec, level: int, max_bond: Optional[int] = None,
              cutoff: Optional[float] = None) -> MpdoState:
    local = np.zeros((spec.local_dim, spec.local_dim), dtype=complex)
    local[level, level] = 1.0
    return init_product(spec, [local] * spec.n_sites, max_bond, cutoff)


def init_vacuum(spec: LatticeSpec, max_bond: Optional[int] = None, cutoff: Optional[float] = None) -> MpdoState:
    """|0><0| on every site"""
    if max_bond is not None and max_bond < 1:
        raise ValueError(f"max_bond must be at least 1, got {max_bond}")
    return init_fock(spec, 0, max_bond, cutoff)


def init_mott(spec: LatticeSpec, max_bond: Optional[int] = None, cutoff: Optional[float] = None) -> MpdoState:
    """|1><1| on every site; a faster start deep inside the Mott region"""
    return init_fock(spec, 1, max_bond, cutoff)


# -- canonical form and gates -------------------------------------------------

def _move_center(state: MpdoState, target: int) -> None:
    tensors = state.tensors
    while state.center < target:
        c = state.center
        left, s, right = tensors[c].shape
        q, r = la.qr(tensors[c].reshape(left * s, right), mode="economic")
        tensors[c] = q.reshape(left, s, q.shape[1])
        tensors[c + 1] = np.tensordot(r, tensors[c + 1], axes=(1, 0))
        state.center += 1
    while state.center > target:
        c = state.center
        left, s, right = tensors[c].shape
        q, r = la.qr(tensors[c].reshape(left, s * right).conj().T, mode="economic")
        tensors[c] = q.conj().T.reshape(q.shape[1], s, right)
        tensors[c - 1] = np.tensordot(tensors[c - 1], r.conj().T, axes=(2, 0))
        state.center -= 1


def _svd(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    try:
        return la.svd(matrix, full_matrices=False, lapack_driver="gesdd")
    except la.LinAlgError:
        logger.debug("gesdd failed, retrying SVD with gesvd")
        return la.svd(matrix, full_matrices=False, lapack_driver="gesvd")


def _apply_bond(state: MpdoState, i: int, gate: np.ndarray) -> Tuple[float, bool]:
    """Apply a two-site gate on (i, i+1) and re-split; returns (discarded weight, overflow)"""
    _move_center(state, i)
    first, second = state.tensors[i], state.tensors[i + 1]
    left, s, _ = first.shape
    right = second.shape[2]
    theta = np.tensordot(first, second, axes=(2, 0))
    theta = np.tensordot(gate, theta, axes=([2, 3], [1, 2])).transpose(2, 0, 1, 3)
    u, sv, vh = _svd(theta.reshape(left * s, s * right))

    norm2 = float(np.sum(sv ** 2))
    above = int(np.count_nonzero(sv > state.cutoff * sv[0])) if sv[0] > 0 else 1
    keep = max(1, min(above, state.max_bond))
    discarded = float(np.sum(sv[keep:] ** 2)) / norm2 if norm2 > 0 else 0.0

    state.tensors[i] = u[:, :keep].reshape(left, s, keep)
    state.tensors[i + 1] = (sv[:keep, None] * vh[:keep]).reshape(keep, s, right)
    state.center = i + 1
    return discarded, above > state.max_bond


def _apply_onsite(state: MpdoState, gate: np.ndarray) -> None:
    """Apply a single-site gate to every site, each while it holds the center"""
    n = state.spec.n_sites
    order = range(n) if state.center <= n // 2 else range(n - 1, -1, -1)
    for j in order:
        _move_center(state, j)
        state.tensors[j] = np.tensordot(gate, state.tensors[j], axes=(1, 1)).transpose(1, 0, 2)


@lru_cache(maxsize=16)
def trotter_gates(params: ModelParams, d: int, dt: float) -> TrotterGates:
    """Full on-site step and half bond step for a given time step"""
    onsite = la.expm(local_liouvillian(params, d) * dt)
    bond = la.expm(bond_superoperator(params, d) * (0.5 * dt))
    return TrotterGates(onsite=onsite, bond_half=bond.reshape(d * d, d * d, d * d, d * d))


def trotter_step(state: MpdoState, params: ModelParams, dt: float) -> MpdoState:
    """One symmetric step: even and odd bond half-steps, on-site full step, bonds in reverse.

    The result is renormalized to unit trace; the trace deviation before
    renormalization is kept in ``trace_drift``.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    d = state.spec.local_dim
    gates = trotter_gates(params, d, float(dt))
    new = state.copy()
    new.truncation_error = 0.0
    new.bond_overflow = False

    n = state.spec.n_sites
    bonds = list(range(0, n - 1, 2)) + list(range(1, n - 1, 2)) if params.hopping != 0.0 else []
    for i in bonds:
        _record(new, *_apply_bond(new, i, gates.bond_half))
    _apply_onsite(new, gates.onsite)
    for i in reversed(bonds):
        _record(new, *_apply_bond(new, i, gates.bond_half))

    tr = mpdo_trace(new)
    if not np.isfinite(tr) or abs(tr) < 1e-300:
        raise CavityError(f"MPDO trace became {tr}; the state cannot be renormalized")
    new.trace_drift = abs(tr - 1.0)
    new.tensors[new.center] = new.tensors[new.center] / tr
    return new


def _record(state: MpdoState, discarded: float, overflow: bool) -> None:
    state.truncation_error = max(state.truncation_error, discarded)
    state.bond_overflow = state.bond_overflow or overflow


# -- contractions ------------------------------------------------------------

def _transfer(tensor: np.ndarray, vector: np.ndarray) -> np.ndarray:
    return np.tensordot(tensor, vector, axes=(1, 0))


def _check_site(state: MpdoState, j: int) -> None:
    if not 0 <= j < state.spec.n_sites:
        raise SiteIndexError(f"Site {j} outside 0..{state.spec.n_sites - 1}")


def _contract(state: MpdoState, vectors: Dict[int, np.ndarray]) -> complex:
    identity = dual_vector(np.eye(state.spec.local_dim))
    env = np.ones(1, dtype=complex)
    for j, tensor in enumerate(state.tensors):
        env = env @ _transfer(tensor, vectors.get(j, identity))
    return complex(env[0])


def mpdo_trace(state: MpdoState) -> complex:
    """Tr(rho): contraction with the vectorized identity on every site"""
    return _contract(state, {})


def local_expectation(state: MpdoState, op: OperatorLike, j: int) -> complex:
    """Tr(op_j rho) / Tr(rho)"""
    _check_site(state, j)
    return _contract(state, {j: dual_vector(_as_matrix(op))}) / mpdo_trace(state)


def two_point(state: MpdoState, op_a: OperatorLike, i: int, op_b: OperatorLike, j: int) -> complex:
    """Tr(A_i B_j rho) / Tr(rho); for i == j the local product A B is used"""
    _check_site(state, i)
    _check_site(state, j)
    a, b = _as_matrix(op_a), _as_matrix(op_b)
    if i == j:
        return local_expectation(state, a @ b, i)
    return _contract(state, {i: dual_vector(a), j: dual_vector(b)}) / mpdo_trace(state)


def _environments(state: MpdoState) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    identity = dual_vector(np.eye(state.spec.local_dim))
    n = state.spec.n_sites
    left = [np.ones(1, dtype=complex)]
    for tensor in state.tensors:
        left.append(left[-1] @ _transfer(tensor, identity))
    right = [np.ones(1, dtype=complex)]
    for tensor in reversed(state.tensors):
        right.append(_transfer(tensor, identity) @ right[-1])
    right.reverse()
    assert len(left) == len(right) == n + 1
    return left, right


def local_expectations(state: MpdoState, op: OperatorLike) -> np.ndarray:
    """<op_j> on every site from one pair of environment sweeps"""
    left, right = _environments(state)
    vector = dual_vector(_as_matrix(op))
    trace = left[-1][0]
    return np.array([
        left[j] @ _transfer(tensor, vector) @ right[j + 1] for j, tensor in enumerate(state.tensors)
    ]) / trace


def neighbour_coherences(state: MpdoState) -> np.ndarray:
    """<a_j^dag a_{j+1}> for every bond"""
    left, right = _environments(state)
    a = local_annihilation(state.spec.local_dim).matrix
    va, vadag = dual_vector(a), dual_vector(a.conj().T)
    trace = left[-1][0]
    values = [
        left[j] @ _transfer(state.tensors[j], vadag) @ _transfer(state.tensors[j + 1], va) @ right[j + 2]
        for j in range(state.spec.n_sites - 1)
    ]
    return np.array(values, dtype=complex) / trace


def tracked_observables(state: MpdoState) -> np.ndarray:
    """Real vector of site densities and nearest-neighbour coherences used for convergence"""
    densities = local_expectations(state, local_number(state.spec.local_dim)).real
    coherences = neighbour_coherences(state)
    return np.concatenate([densities, coherences.real, coherences.imag])


def checked_observables(state: MpdoState) -> np.ndarray:
    """Tracked observables plus on-site second moments, compared by the bond-dimension check"""
    n = local_number(state.spec.local_dim)
    return np.concatenate([tracked_observables(state), local_expectations(state, n @ n).real])


def bond_dimension_change(spec: LatticeSpec, params: ModelParams, opts: MpdoOptions, state: MpdoState,
                          initial: Optional[MpdoState] = None) -> float:
    """Largest change of the checked observables when the relaxation is repeated with twice the bond cap"""
    doubled_bond = 2 * state.max_bond
    doubled_opts = opts.model_copy(update={"max_bond": doubled_bond, "bond_check": False, "checkpoint_every": None})
    doubled_initial = None if initial is None else replace(initial.copy(), max_bond=doubled_bond)
    logger.info("Repeating relaxation with max_bond=%d", doubled_bond)
    doubled, _ = relax_to_steady(spec, params, doubled_opts, initial=doubled_initial)
    return float(np.max(np.abs(checked_observables(doubled) - checked_observables(state))))


def mpdo_to_dense(state: MpdoState) -> DenseState:
    """Contract the full density matrix (small lattices only)"""
    d, n = state.spec.local_dim, state.spec.n_sites
    dim = d ** n
    if dim > settings.dense_dim_limit:
        raise DimensionBudgetError(f"Refusing dense conversion with D={dim}")
    full = state.tensors[0]
    for tensor in state.tensors[1:]:
        full = np.tensordot(full, tensor, axes=(-1, 0))
    # superindex s = ket + d*bra, so a C-order split gives (bra, ket) per site
    full = full.reshape([d, d] * n)
    perm = [2 * j + 1 for j in range(n)] + [2 * j for j in range(n)]
    rho = full.transpose(perm).reshape(dim, dim)
    return DenseState(rho / np.trace(rho), state.spec)


# -- checkpoints -------------------------------------------------------------

def save_checkpoint(path: Union[str, Path], state: MpdoState, params: ModelParams, t: float,
                    previous: Optional[np.ndarray] = None, below: int = 0) -> Path:
    """Write all site tensors, lattice, parameters and elapsed time to one .npz archive"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "spec": state.spec.model_dump(mode="json"),
        "params": params.model_dump(mode="json"),
        "t": t,
        "center": state.center,
        "max_bond": state.max_bond,
        "cutoff": state.cutoff,
        "below": below,
        "n_tensors": len(state.tensors),
    }
    arrays = {f"tensor_{j}": tensor for j, tensor in enumerate(state.tensors)}
    arrays["previous"] = np.zeros(0) if previous is None else np.asarray(previous)
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    with open(path, "wb") as f:
        np.savez_compressed(f, **arrays)
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[MpdoState, ModelParams, float, Optional[np.ndarray], int]:
    """Inverse of save_checkpoint"""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            tensors = [np.array(data[f"tensor_{j}"]) for j in range(meta["n_tensors"])]
            previous = np.array(data["previous"])
    except (KeyError, ValueError, OSError) as e:
        raise CheckpointError(f"Unreadable checkpoint {path}: {e}")
    spec = LatticeSpec.model_validate(meta["spec"])
    params = ModelParams.model_validate(meta["params"])
    state = MpdoState(tensors, spec, meta["max_bond"], meta["cutoff"], center=meta["center"])
    return state, params, float(meta["t"]), (previous if previous.size else None), int(meta["below"])


# -- relaxation ----------------------------------------------------------------

def relax_to_steady(spec: LatticeSpec, params: ModelParams, opts: Optional[MpdoOptions] = None,
                    initial: Optional[MpdoState] = None, checkpoint_path: Optional[Union[str, Path]] = None,
                    resume: bool = False) -> Tuple[MpdoState, ConvergenceReport]:
    """Evolve until the tracked observables stop drifting.

    Observables are sampled every ``sample_interval`` starting at t=0; the run
    is converged once the drift per unit time stays below ``drift_tol`` for
    two consecutive windows. The last state is returned either way.
    """
    if opts is None:
        opts = MpdoOptions()
    if spec.is_periodic:
        raise UnsupportedBoundaryError("MPDO evolution supports open chains only")
    check_compatible(spec, params)

    t_start, previous, below = 0.0, None, 0
    if resume and checkpoint_path is not None and Path(checkpoint_path).exists():
        state, saved_params, t_start, previous, below = load_checkpoint(checkpoint_path)
        if saved_params != params or state.spec != spec:
            raise CheckpointError(f"Checkpoint {checkpoint_path} belongs to a different run")
        logger.info("Resuming MPDO run from t=%.4f", t_start)
    elif initial is not None:
        state = initial
    elif opts.initial == InitialState.MOTT:
        state = init_mott(spec, opts.max_bond, opts.cutoff)
    else:
        state = init_vacuum(spec, opts.max_bond, opts.cutoff)

    dt = opts.dt
    steps_per_sample = max(1, round(opts.sample_interval / dt))
    window = steps_per_sample * dt
    steps_per_checkpoint = None
    if opts.checkpoint_every is not None and checkpoint_path is not None:
        steps_per_checkpoint = max(1, round(opts.checkpoint_every / window)) * steps_per_sample
    if previous is None:
        previous = tracked_observables(state)

    total_steps = max(0, math.ceil((opts.t_max - t_start) / dt - 1e-9))
    drift = math.inf
    converged = False
    overflow = False
    max_bond_used = max(state.bond_dims, default=1)
    step = 0
    t = t_start
    while step < total_steps:
        state = trotter_step(state, params, dt)
        step += 1
        t = t_start + step * dt
        overflow = overflow or state.bond_overflow
        max_bond_used = max(max_bond_used, max(state.bond_dims, default=1))
        if step % steps_per_sample:
            continue
        current = tracked_observables(state)
        drift = float(np.max(np.abs(current - previous))) / window
        previous = current
        below = below + 1 if drift < opts.drift_tol else 0
        logger.debug("t=%.3f drift=%.3e max_bond=%d trunc=%.2e", t, drift, max_bond_used, state.truncation_error)
        if below >= 2:
            converged = True
            break
        if steps_per_checkpoint and step % steps_per_checkpoint == 0:
            save_checkpoint(checkpoint_path, state, params, t, previous, below)

    if overflow:
        logger.warning("Bond dimension limit %d was reached with singular values above cutoff", state.max_bond)
    report = ConvergenceReport(
        converged=converged,
        t_reached=t,
        observable_drift=drift,
        final_truncation_error=state.truncation_error,
        bond_overflow=overflow,
        max_bond_used=max_bond_used,
        steps=step,
    )
    logger.info("MPDO relaxation %s at t=%.2f (drift %.2e)", "converged" if converged else "stopped", t, drift)
    if opts.bond_check:
        change = bond_dimension_change(spec, params, opts, state, initial)
        report = replace(report, bond_check_change=change, bond_check_tol=opts.bond_check_tol)
        if not report.bond_check_passed:
            logger.warning("Doubling max_bond changed observables by %.3e (tol %.1e)", change, opts.bond_check_tol)
    return state, report
