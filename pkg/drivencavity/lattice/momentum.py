"""
Momentum-mode picture of the periodic chain.

Modes are b_k = N^-1/2 sum_n exp(-2 pi i n k / N) a_n. In this basis the
hopping is diagonal, the drive pairs k with -k mod N and the interaction
becomes U/(2N) times a sum over momentum-conserving index tuples.
"""
from dataclasses import dataclass
from itertools import product
from typing import List, Tuple
import logging
import math

import numpy as np
import pandas as pd
import scipy.sparse as sp

from drivencavity.errors import ModeIndexError, UnsupportedBoundaryError
from drivencavity.lattice.fock import LatticeOperator, lattice_ladder
from drivencavity.lattice.model import build_hamiltonian, check_compatible
from drivencavity.models.schemas import Boundary, LatticeSpec, ModelParams

logger = logging.getLogger(__name__)


def _cosine(k: int, n_sites: int) -> float:
    """cos(2 pi k / N), exactly 0 and +-1 where those are the true values"""
    q = min(k, n_sites - k)
    if q == 0:
        return 1.0
    if 2 * q == n_sites:
        return -1.0
    if 4 * q == n_sites:
        return 0.0
    return math.cos(2.0 * math.pi * q / n_sites)


def mode_detuning(k: int, n_sites: int, delta: float, hopping: float) -> float:
    """Delta - 2 J cos(2 pi k / N)"""
    if not 0 <= k < n_sites:
        raise ModeIndexError(f"Mode {k} outside 0..{n_sites - 1}")
    return delta - 2.0 * hopping * _cosine(k, n_sites)


@dataclass(frozen=True)
class ModeSpectrum:
    n_sites: int
    detunings: Tuple[float, ...]
    resonant: Tuple[int, ...]

    def to_frame(self) -> pd.DataFrame:
        """Table of (k, detuning, resonant)"""
        return pd.DataFrame({
            "k": list(range(self.n_sites)),
            "detuning": list(self.detunings),
            "resonant": [k in self.resonant for k in range(self.n_sites)],
        })


def resonant_modes(n_sites: int, delta: float, hopping: float, tol: float = 1e-12) -> ModeSpectrum:
    """Mode detunings and the modes with |detuning| <= tol"""
    if tol < 0:
        raise ValueError(f"tol must be nonnegative, got {tol}")
    detunings = tuple(mode_detuning(k, n_sites, delta, hopping) for k in range(n_sites))
    resonant = tuple(k for k, value in enumerate(detunings) if abs(value) <= tol)
    return ModeSpectrum(n_sites, detunings, resonant)


def quartic_index_set(n_sites: int) -> List[Tuple[int, int, int, int]]:
    """All (j, k, l, m) with l + m - j - k = 0 mod N, in lexicographic order"""
    tuples = []
    for j, k, l in product(range(n_sites), repeat=3):
        tuples.append((j, k, l, (j + k - l) % n_sites))
    return sorted(tuples)


def _band_energy(k: int, spec: LatticeSpec, hopping: float) -> float:
    """Hopping contribution to the mode energy for the bonds the lattice actually has"""
    if spec.n_sites == 1:
        return 0.0
    if spec.n_sites == 2:
        # a two-site ring has a single bond
        return -hopping * _cosine(k, 2)
    return -2.0 * hopping * _cosine(k, spec.n_sites)


def _check_periodic(spec: LatticeSpec) -> None:
    if spec.boundary != Boundary.PERIODIC:
        raise UnsupportedBoundaryError("The momentum basis requires a periodic lattice")


def build_momentum_hamiltonian(spec: LatticeSpec, params: ModelParams) -> LatticeOperator:
    """Hamiltonian in the mode-Fock basis; mode k uses the tensor slot of site k"""
    _check_periodic(spec)
    check_compatible(spec, params)
    n = spec.n_sites
    ladder = lattice_ladder(spec)
    b, bdag, number = ladder["a"], ladder["adag"], ladder["n"]
    dim = spec.hilbert_dim
    omega = params.drive_amplitude

    matrix = sp.csr_matrix((dim, dim), dtype=complex)
    for k in range(n):
        matrix = matrix + (params.delta + _band_energy(k, spec, params.hopping)) * number[k]
        partner = (-k) % n
        pair = bdag[k] @ bdag[partner]
        matrix = matrix + (omega / math.sqrt(2.0)) * pair + (np.conj(omega) / math.sqrt(2.0)) * pair.conj().T
    if params.interaction != 0.0:
        quartic = sp.csr_matrix((dim, dim), dtype=complex)
        for j, k, l, m in quartic_index_set(n):
            quartic = quartic + bdag[j] @ bdag[k] @ b[l] @ b[m]
        matrix = matrix + (params.interaction / (2.0 * n)) * quartic
    return LatticeOperator(matrix.tocsr(), spec)


def _mode_occupations(spec: LatticeSpec, max_excitations: int) -> List[Tuple[int, ...]]:
    return [
        occ for occ in product(range(spec.local_dim), repeat=spec.n_sites) if sum(occ) <= max_excitations
    ]


def momentum_basis_discrepancy(spec: LatticeSpec, params: ModelParams, max_excitations: int = 1) -> float:
    """Largest difference between real-space and momentum-space matrix elements.

    Mode-Fock states with at most ``max_excitations`` quanta are built in the
    site basis from b_k^dag = N^-1/2 sum_n exp(2 pi i n k / N) a_n^dag. The
    truncation is exact, and the discrepancy vanishes, when
    max_excitations + 2 <= local_dim - 1.
    """
    _check_periodic(spec)
    n, d = spec.n_sites, spec.local_dim
    if max_excitations > d - 1:
        logger.warning("max_excitations=%d exceeds the local cutoff d-1=%d", max_excitations, d - 1)
    ladder = lattice_ladder(spec)
    mode_creation = []
    for k in range(n):
        op = sp.csr_matrix((spec.hilbert_dim, spec.hilbert_dim), dtype=complex)
        for site in range(n):
            op = op + np.exp(2j * np.pi * site * k / n) * ladder["adag"][site]
        mode_creation.append((op / math.sqrt(n)).tocsr())

    occupations = _mode_occupations(spec, max_excitations)
    vacuum = np.zeros(spec.hilbert_dim, dtype=complex)
    vacuum[0] = 1.0
    site_vectors = []
    for occ in occupations:
        vec = vacuum
        for k, count in enumerate(occ):
            for _ in range(count):
                vec = mode_creation[k] @ vec
        site_vectors.append(vec / math.sqrt(math.prod(math.factorial(c) for c in occ)))
    site_basis = np.column_stack(site_vectors)
    mode_index = [int(np.ravel_multi_index(occ, (d,) * n)) for occ in occupations]

    real_space = build_hamiltonian(spec, params).matrix
    projected = site_basis.conj().T @ (real_space @ site_basis)
    momentum = build_momentum_hamiltonian(spec, params).matrix.toarray()[np.ix_(mode_index, mode_index)]
    return float(np.max(np.abs(projected - momentum)))
