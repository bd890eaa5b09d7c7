"""
Exact steady states and time evolution for small lattices
"""
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Optional, Sequence, Tuple
import logging
import math
import time

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from drivencavity.errors import (
    DegenerateSteadyStateError,
    DimensionBudgetError,
    DimensionMismatchError,
    UnstableStepError,
)
from drivencavity.lattice.fock import unvectorize, vectorize
from drivencavity.lattice.model import Liouvillian
from drivencavity.models.schemas import DenseSolverOptions, LatticeSpec

logger = logging.getLogger(__name__)

# eigenvalues of rho in [-CLIP_TOL, 0) are set to zero before observables are taken
CLIP_TOL = 1e-8


class SolveMethod(str, Enum):
    NULL_SPACE = "null-space"
    TIME_MARCH = "time-march"


@dataclass(frozen=True)
class DenseState:
    """Full density matrix of a small lattice"""
    rho: np.ndarray
    spec: LatticeSpec

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return la.eigvalsh(0.5 * (self.rho + self.rho.conj().T))

    @cached_property
    def physical_rho(self) -> np.ndarray:
        """Hermitized density matrix with eigenvalues in [-1e-8, 0) clipped to zero"""
        herm = 0.5 * (self.rho + self.rho.conj().T)
        values, vectors = la.eigh(herm)
        if values.min() < -CLIP_TOL:
            logger.warning("Density matrix has eigenvalue %.3e below the clipping window", values.min())
        clipped = np.where((values < 0) & (values >= -CLIP_TOL), 0.0, values)
        return (vectors * clipped) @ vectors.conj().T


@dataclass
class SolveReport:
    """Diagnostics of a dense steady-state solve"""
    residual: float
    method: SolveMethod
    iterations: int
    wall_time: float
    singular_values: Tuple[float, ...] = field(default_factory=tuple)


def product_state(spec: LatticeSpec, local_rhos: Sequence[np.ndarray]) -> DenseState:
    """Kronecker product of per-site density matrices, site 0 leftmost"""
    if len(local_rhos) != spec.n_sites:
        raise DimensionMismatchError(f"{len(local_rhos)} local states for {spec.n_sites} sites")
    rho = np.ones((1, 1), dtype=complex)
    for local in local_rhos:
        local = np.asarray(local, dtype=complex)
        if local.shape != (spec.local_dim, spec.local_dim):
            raise DimensionMismatchError(f"Local state of shape {local.shape} for local_dim {spec.local_dim}")
        rho = np.kron(rho, local)
    return DenseState(rho, spec)


def fock_product_state(spec: LatticeSpec, level: int = 0) -> DenseState:
    """|level><level| on every site"""
    local = np.zeros((spec.local_dim, spec.local_dim), dtype=complex)
    local[level, level] = 1.0
    return product_state(spec, [local] * spec.n_sites)


def maximally_mixed_state(spec: LatticeSpec) -> DenseState:
    dim = spec.hilbert_dim
    return DenseState(np.eye(dim, dtype=complex) / dim, spec)


def residual(liouvillian: Liouvillian, state: DenseState) -> float:
    """||L vec(rho)||_2"""
    if liouvillian.hilbert_dim != state.dim:
        raise DimensionMismatchError(f"Liouvillian for D={liouvillian.hilbert_dim}, state has D={state.dim}")
    return float(np.linalg.norm(liouvillian.matrix @ vectorize(state.rho)))


def _normalized(rho: np.ndarray) -> np.ndarray:
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def smallest_singular_values(matrix: sp.spmatrix, k: int = 2) -> Tuple[float, ...]:
    """k smallest singular values of a sparse square matrix, by dense SVD"""
    values = la.svdvals(matrix.toarray())
    return tuple(float(s) for s in np.sort(values)[:k])


def constrained_singular_floor(lu: spla.SuperLU, n: int) -> float:
    """Smallest singular value of the trace-constrained matrix, from its LU factors.

    The constrained matrix is a rank-one update of L, so this value is a lower
    bound on the second smallest singular value of L. It is zero exactly when
    L has a traceless null vector.
    """
    inverse = spla.LinearOperator(
        (n, n),
        matvec=lu.solve,
        rmatvec=lambda x: lu.solve(x, trans="H"),
        dtype=complex,
    )
    largest = spla.svds(inverse, k=1, return_singular_vectors=False)
    return 1.0 / float(np.max(largest))


def uniqueness_values(matrix: sp.spmatrix, lu: Optional[spla.SuperLU], vec: np.ndarray,
                      dense_limit: int) -> Tuple[float, float]:
    """(smallest, second smallest) singular value of L, the second as a lower bound above dense_limit"""
    n = matrix.shape[0]
    if n <= dense_limit or n <= 3:
        return smallest_singular_values(matrix, 2)
    smallest = float(np.linalg.norm(matrix @ vec) / np.linalg.norm(vec))
    if lu is None:
        return smallest, 0.0
    return smallest, constrained_singular_floor(lu, n)


def _rk4_step(matrix: sp.csr_matrix, vec: np.ndarray, h: float) -> np.ndarray:
    k1 = matrix @ vec
    k2 = matrix @ (vec + 0.5 * h * k1)
    k3 = matrix @ (vec + 0.5 * h * k2)
    k4 = matrix @ (vec + h * k3)
    return vec + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_stable(vec: np.ndarray, trace_row: np.ndarray, trace0: complex, dt: float) -> None:
    if not np.all(np.isfinite(vec)):
        raise UnstableStepError(f"Integration diverged at dt={dt}; use a smaller time step")
    drift = abs(trace_row @ vec - trace0)
    if drift > 1e-3:
        raise UnstableStepError(f"Trace drifted by {drift:.3e} at dt={dt}; use a smaller time step")
    # Frobenius norm of a density matrix is at most its trace
    if np.linalg.norm(vec) > 1.5 * abs(trace0):
        raise UnstableStepError(f"Purity bound violated at dt={dt}; use a smaller time step")


def _trace_row(dim: int) -> np.ndarray:
    row = np.zeros(dim * dim, dtype=complex)
    row[np.arange(dim) * (dim + 1)] = 1.0
    return row


def evolve(state: DenseState, liouvillian: Liouvillian, t_final: float, dt: float) -> DenseState:
    """Fixed-step RK4 integration of vec(rho); trace renormalized on output only"""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if t_final < 0:
        raise ValueError(f"t_final must be nonnegative, got {t_final}")
    if liouvillian.hilbert_dim != state.dim:
        raise DimensionMismatchError(f"Liouvillian for D={liouvillian.hilbert_dim}, state has D={state.dim}")
    if t_final == 0:
        return state
    n_steps = max(1, math.ceil(t_final / dt - 1e-9))
    h = t_final / n_steps
    matrix = liouvillian.matrix
    trace_row = _trace_row(state.dim)
    vec = vectorize(state.rho).astype(complex)
    trace0 = trace_row @ vec
    check_every = max(1, n_steps // 100)
    for step in range(1, n_steps + 1):
        vec = _rk4_step(matrix, vec, h)
        if step % check_every == 0 or step == n_steps:
            _check_stable(vec, trace_row, trace0, dt)
    rho = unvectorize(vec, state.dim)
    return DenseState(rho / np.trace(rho), state.spec)


def _time_march(liouvillian: Liouvillian, opts: DenseSolverOptions) -> Tuple[np.ndarray, int]:
    """Integrate from the maximally mixed state until the residual drops below tol"""
    dim = liouvillian.hilbert_dim
    matrix = liouvillian.matrix
    trace_row = _trace_row(dim)
    vec = vectorize(np.eye(dim, dtype=complex) / dim)
    n_steps = math.ceil(opts.march_t_max / opts.march_dt)
    for step in range(1, n_steps + 1):
        vec = _rk4_step(matrix, vec, opts.march_dt)
        if step % 100 == 0:
            _check_stable(vec, trace_row, 1.0, opts.march_dt)
            if np.linalg.norm(matrix @ vec) <= opts.tol:
                return vec, step
    return vec, n_steps


def steady_state(liouvillian: Liouvillian, opts: Optional[DenseSolverOptions] = None) -> Tuple[DenseState, SolveReport]:
    """Null vector of L with unit trace.

    One row of L (redundant because the identity is a left null vector) is
    replaced by the trace constraint and the system is solved directly.
    If the direct solve fails or misses the tolerance, the state is obtained
    by time marching instead. The LU factors of the constrained system are
    reused for the uniqueness check on large lattices.
    """
    if opts is None:
        opts = DenseSolverOptions()
    n = liouvillian.dim
    dim = liouvillian.hilbert_dim
    if n > opts.max_liouville_dim:
        raise DimensionBudgetError(f"Liouville dimension {n} exceeds dense budget {opts.max_liouville_dim}")

    start = time.perf_counter()
    matrix = liouvillian.matrix.tocsr()
    keep = np.ones(n)
    keep[0] = 0.0
    diagonal = np.arange(dim) * (dim + 1)
    trace_constraint = sp.csr_matrix(
        (np.ones(dim, dtype=complex), (np.zeros(dim, dtype=int), diagonal)), shape=(n, n)
    )
    constrained = (sp.diags(keep) @ matrix + trace_constraint).tocsc()
    rhs = np.zeros(n, dtype=complex)
    rhs[0] = 1.0

    method = SolveMethod.NULL_SPACE
    iterations = 1
    vec = None
    lu = None
    try:
        lu = spla.splu(constrained)
        vec = lu.solve(rhs)
    except (RuntimeError, la.LinAlgError) as e:
        logger.debug("Direct steady-state solve failed: %s", e)
        lu = None
        vec = None

    rho = None
    res = math.inf
    if vec is not None and np.all(np.isfinite(vec)):
        rho = _normalized(unvectorize(vec, dim))
        res = float(np.linalg.norm(matrix @ vectorize(rho)))

    if rho is None or res > opts.tol:
        logger.info("Direct solve residual %.3e above tol %.1e, falling back to time marching", res, opts.tol)
        method = SolveMethod.TIME_MARCH
        vec, iterations = _time_march(liouvillian, opts)
        rho = _normalized(unvectorize(vec, dim))
        res = float(np.linalg.norm(matrix @ vectorize(rho)))
        if res > opts.tol:
            raise DegenerateSteadyStateError(
                f"No steady state within tolerance: residual {res:.3e} > {opts.tol:.1e}",
                uniqueness_values(matrix, lu, vectorize(rho), opts.svd_dim_limit),
            )

    singular_values: Tuple[float, ...] = ()
    if opts.check_uniqueness:
        singular_values = uniqueness_values(matrix, lu, vectorize(rho), opts.svd_dim_limit)
        scale = max(abs(matrix).max(), 1.0)
        if singular_values[1] <= opts.degeneracy_tol * scale:
            raise DegenerateSteadyStateError(
                f"Steady state is not unique: second smallest singular value {singular_values[1]:.3e}",
                singular_values,
            )

    wall_time = time.perf_counter() - start
    logger.debug("Steady state: method=%s residual=%.3e wall=%.3fs", method.value, res, wall_time)
    state = DenseState(rho, liouvillian.spec)
    return state, SolveReport(res, method, iterations, wall_time, singular_values)
