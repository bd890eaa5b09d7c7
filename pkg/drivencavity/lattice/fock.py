"""
Truncated Fock-space operators and their embedding into the lattice space.

Tensor products put site 0 leftmost (slowest-varying index). Vectorization of
density matrices is column stacking: vec(rho)[i + D*j] = rho[i, j].
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict

import numpy as np
import scipy.sparse as sp

from drivencavity.config import settings
from drivencavity.errors import (
    DimensionBudgetError,
    DimensionMismatchError,
    InvalidDimensionError,
    InvalidLevelError,
    SiteIndexError,
)
from drivencavity.models.schemas import LatticeSpec


@dataclass(frozen=True)
class LocalOperator:
    """Single-site d x d operator"""
    matrix: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def dag(self) -> "LocalOperator":
        return LocalOperator(self.matrix.conj().T)

    def __matmul__(self, other: "LocalOperator") -> "LocalOperator":
        return LocalOperator(self.matrix @ other.matrix)


@dataclass(frozen=True)
class LatticeOperator:
    """Sparse D x D operator on the full lattice, D = d**N"""
    matrix: sp.csr_matrix
    spec: LatticeSpec

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def to_dense(self, max_dim: int = None) -> np.ndarray:
        """Dense copy, refused above the configured size guard"""
        if max_dim is None:
            max_dim = settings.dense_dim_limit
        if self.dim > max_dim:
            raise DimensionBudgetError(
                f"Refusing dense conversion of a {self.dim}x{self.dim} operator (limit {max_dim})"
            )
        return self.matrix.toarray()


def _check_dim(d: int) -> None:
    if d < 2:
        raise InvalidDimensionError(f"Local dimension must be at least 2, got {d}")


def local_annihilation(d: int) -> LocalOperator:
    """Truncated annihilation operator with <m-1|a|m> = sqrt(m)"""
    _check_dim(d)
    return LocalOperator(np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1).astype(complex))


def local_creation(d: int) -> LocalOperator:
    return local_annihilation(d).dag


def local_number(d: int) -> LocalOperator:
    """Number operator diag(0, 1, ..., d-1)"""
    _check_dim(d)
    return LocalOperator(np.diag(np.arange(d, dtype=float)).astype(complex))


def local_identity(d: int) -> LocalOperator:
    _check_dim(d)
    return LocalOperator(np.eye(d, dtype=complex))


def local_projector(level: int, d: int) -> LocalOperator:
    """|level><level|"""
    _check_dim(d)
    if not 0 <= level < d:
        raise InvalidLevelError(f"Level {level} outside 0..{d - 1}")
    matrix = np.zeros((d, d), dtype=complex)
    matrix[level, level] = 1.0
    return LocalOperator(matrix)


def local_jump(m: int, d: int) -> LocalOperator:
    """Cascade jump operator kappa_m = |m><m+1|"""
    _check_dim(d)
    if not 0 <= m <= d - 2:
        raise InvalidLevelError(f"Jump level m={m} outside 0..{d - 2}")
    matrix = np.zeros((d, d), dtype=complex)
    matrix[m, m + 1] = 1.0
    return LocalOperator(matrix)


def embed(op: LocalOperator, site: int, spec: LatticeSpec) -> LatticeOperator:
    """I x ... x op (at site) x ... x I, site 0 leftmost"""
    if not 0 <= site < spec.n_sites:
        raise SiteIndexError(f"Site {site} outside 0..{spec.n_sites - 1}")
    if op.dim != spec.local_dim:
        raise DimensionMismatchError(
            f"Operator dimension {op.dim} does not match local_dim {spec.local_dim}"
        )
    d = spec.local_dim
    left = sp.identity(d ** site, dtype=complex, format="csr")
    right = sp.identity(d ** (spec.n_sites - site - 1), dtype=complex, format="csr")
    local = sp.csr_matrix(op.matrix)
    local.eliminate_zeros()
    matrix = sp.kron(sp.kron(left, local, format="csr"), right, format="csr")
    return LatticeOperator(matrix, spec)


def lattice_identity(spec: LatticeSpec) -> LatticeOperator:
    return LatticeOperator(sp.identity(spec.hilbert_dim, dtype=complex, format="csr"), spec)


@lru_cache(maxsize=32)
def lattice_ladder(spec: LatticeSpec) -> Dict[str, tuple]:
    """Cached embedded a_j, a_j^dag and n_j for every site"""
    d = spec.local_dim
    a = local_annihilation(d)
    n = local_number(d)
    return {
        "a": tuple(embed(a, j, spec).matrix for j in range(spec.n_sites)),
        "adag": tuple(embed(local_creation(d), j, spec).matrix for j in range(spec.n_sites)),
        "n": tuple(embed(n, j, spec).matrix for j in range(spec.n_sites)),
    }


def vectorize(matrix: np.ndarray) -> np.ndarray:
    """Column-stacked vec(rho)"""
    return np.asarray(matrix).reshape(-1, order="F")


def unvectorize(vector: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(vector).reshape((dim, dim), order="F")


def dual_vector(matrix: np.ndarray) -> np.ndarray:
    """Vector w with w . vec(rho) = Tr(matrix rho)"""
    return vectorize(np.asarray(matrix).T)


def left_super(matrix) -> sp.csr_matrix:
    """Superoperator of rho -> A rho"""
    dim = matrix.shape[0]
    return sp.kron(sp.identity(dim, dtype=complex), sp.csr_matrix(matrix), format="csr")


def right_super(matrix) -> sp.csr_matrix:
    """Superoperator of rho -> rho A"""
    dim = matrix.shape[0]
    return sp.kron(sp.csr_matrix(matrix).T, sp.identity(dim, dtype=complex), format="csr")
