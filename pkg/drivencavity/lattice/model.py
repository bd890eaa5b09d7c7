"""
Rotating-frame Bose-Hubbard Hamiltonian with parametric drive and the
Lindblad generator with cascaded (or uniform) single-particle losses.
"""
from dataclasses import dataclass
from typing import Dict, List, Tuple
import logging
import warnings

import numpy as np
import scipy.sparse as sp

from drivencavity.errors import DimensionMismatchError
from drivencavity.lattice.fock import (
    LatticeOperator,
    LocalOperator,
    embed,
    lattice_ladder,
    left_super,
    local_annihilation,
    local_creation,
    local_jump,
    local_number,
    right_super,
)
from drivencavity.models.schemas import LatticeSpec, LossModel, ModelParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Liouvillian:
    """D^2 x D^2 generator acting on column-stacked vec(rho)"""
    matrix: sp.csr_matrix
    spec: LatticeSpec
    params: ModelParams

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def hilbert_dim(self) -> int:
        return self.spec.hilbert_dim


def resonant_detuning(interaction: float) -> float:
    """Delta for a drive resonant with the two-excitation level: -U/2"""
    return -interaction / 2.0


def check_compatible(spec: LatticeSpec, params: ModelParams) -> None:
    """The cascade needs one rate per transition of the truncated ladder"""
    if params.loss_model == LossModel.CASCADED and len(params.gammas) != spec.local_dim - 1:
        raise DimensionMismatchError(
            f"{len(params.gammas)} dissipation rates given, local_dim={spec.local_dim} "
            f"needs {spec.local_dim - 1}"
        )


def check_truncation(params: ModelParams, ratio: float = 5.0) -> bool:
    """Warn when U >> |Omega| does not hold, so upper levels may not stay empty"""
    if params.drive == 0.0 or abs(params.interaction) >= ratio * params.drive:
        return True
    warnings.warn(
        f"Truncation rule U >> Omega not satisfied (U={params.interaction}, Omega={params.drive}); "
        "check the population of the highest kept level"
    )
    return False


def local_hamiltonian(params: ModelParams, d: int) -> LocalOperator:
    """Delta n + U/2 a^dag a^dag a a + Omega/sqrt2 a^dag a^dag + h.c. on one site"""
    a = local_annihilation(d).matrix
    adag = local_creation(d).matrix
    n = local_number(d).matrix
    omega = params.drive_amplitude
    matrix = (
        params.delta * n
        + 0.5 * params.interaction * (adag @ adag @ a @ a)
        + (omega / np.sqrt(2.0)) * (adag @ adag)
        + (np.conj(omega) / np.sqrt(2.0)) * (a @ a)
    )
    return LocalOperator(matrix)


def local_collapse_operators(params: ModelParams, d: int) -> List[Tuple[float, np.ndarray]]:
    """(rate, jump operator) pairs for one site"""
    if params.loss_model == LossModel.UNIFORM:
        return [(params.gammas[0], local_annihilation(d).matrix)]
    if len(params.gammas) != d - 1:
        raise DimensionMismatchError(
            f"{len(params.gammas)} dissipation rates given, local_dim={d} needs {d - 1}"
        )
    return [(rate, local_jump(m, d).matrix) for m, rate in enumerate(params.gammas)]


def hamiltonian_terms(spec: LatticeSpec, params: ModelParams) -> Dict[str, sp.csr_matrix]:
    """Hamiltonian split by parameter: detuning, interaction, drive, hopping"""
    check_compatible(spec, params)
    d = spec.local_dim
    ladder = lattice_ladder(spec)
    a = local_annihilation(d).matrix
    adag = local_creation(d).matrix
    omega = params.drive_amplitude
    on_site = {
        "detuning": LocalOperator(params.delta * local_number(d).matrix),
        "interaction": LocalOperator(0.5 * params.interaction * (adag @ adag @ a @ a)),
        "drive": LocalOperator(
            (omega / np.sqrt(2.0)) * (adag @ adag) + (np.conj(omega) / np.sqrt(2.0)) * (a @ a)
        ),
    }
    dim = spec.hilbert_dim
    terms = {}
    for name, op in on_site.items():
        total = sp.csr_matrix((dim, dim), dtype=complex)
        for j in range(spec.n_sites):
            total = total + embed(op, j, spec).matrix
        terms[name] = total
    hopping = sp.csr_matrix((dim, dim), dtype=complex)
    for i, j in spec.bonds():
        hopping = hopping + ladder["a"][i] @ ladder["adag"][j] + ladder["adag"][i] @ ladder["a"][j]
    terms["hopping"] = -params.hopping * hopping
    return terms


def build_hamiltonian(spec: LatticeSpec, params: ModelParams) -> LatticeOperator:
    """Full lattice Hamiltonian; periodic chains include the wrap bond"""
    terms = hamiltonian_terms(spec, params)
    matrix = sum(terms.values(), sp.csr_matrix((spec.hilbert_dim, spec.hilbert_dim), dtype=complex))
    return LatticeOperator(matrix.tocsr(), spec)


def collapse_operators(spec: LatticeSpec, params: ModelParams) -> List[Tuple[float, sp.csr_matrix]]:
    """(rate, embedded jump operator) for every site and transition with nonzero rate"""
    check_compatible(spec, params)
    ops = []
    for rate, jump in local_collapse_operators(params, spec.local_dim):
        if rate == 0.0:
            continue
        for j in range(spec.n_sites):
            ops.append((rate, embed(LocalOperator(jump), j, spec).matrix))
    return ops


def commutator_super(hamiltonian) -> sp.csr_matrix:
    """-i[H, .] in column-stacking form: -i(I x H - H^T x I)"""
    return (-1j * (left_super(hamiltonian) - right_super(hamiltonian))).tocsr()


def dissipator_super(rate: float, jump) -> sp.csr_matrix:
    """rate/2 [2 c . c^dag - {c^dag c, .}] in column-stacking form"""
    c = sp.csr_matrix(jump)
    cdc = (c.conj().T @ c).tocsr()
    return (0.5 * rate * (2.0 * sp.kron(c.conj(), c, format="csr") - left_super(cdc) - right_super(cdc))).tocsr()


def lindblad_superoperator(hamiltonian, collapse: List[Tuple[float, object]]) -> sp.csr_matrix:
    """Generator of d rho/dt = -i[H, rho] + sum_k D_k[rho]"""
    generator = commutator_super(hamiltonian)
    for rate, jump in collapse:
        generator = generator + dissipator_super(rate, jump)
    return generator.tocsr()


def liouvillian_terms(spec: LatticeSpec, params: ModelParams) -> Dict[str, sp.csr_matrix]:
    """Per-parameter pieces of L; their sum equals build_liouvillian"""
    terms = {name: commutator_super(h) for name, h in hamiltonian_terms(spec, params).items()}
    for m, (rate, jump) in enumerate(local_collapse_operators(params, spec.local_dim)):
        dim = spec.hilbert_dim ** 2
        total = sp.csr_matrix((dim, dim), dtype=complex)
        for j in range(spec.n_sites):
            total = total + dissipator_super(rate, embed(LocalOperator(jump), j, spec).matrix)
        terms[f"dissipation_{m}"] = total
    return terms


def build_liouvillian(spec: LatticeSpec, params: ModelParams) -> Liouvillian:
    """Assemble L for the whole lattice"""
    hamiltonian = build_hamiltonian(spec, params).matrix
    matrix = lindblad_superoperator(hamiltonian, collapse_operators(spec, params))
    logger.debug("Liouvillian assembled: dim=%d nnz=%d", matrix.shape[0], matrix.nnz)
    return Liouvillian(matrix, spec, params)


def local_liouvillian(params: ModelParams, d: int) -> np.ndarray:
    """d^2 x d^2 generator of all on-site terms: Delta, U, Omega and every dissipator"""
    generator = lindblad_superoperator(local_hamiltonian(params, d).matrix, local_collapse_operators(params, d))
    return generator.toarray()


def bond_superoperator(params: ModelParams, d: int) -> np.ndarray:
    """-i[H_J, .] for one bond, indexed by the pair of per-site superindices (s1, s2).

    Per-site superindices follow column stacking, so a product A x B acting
    from the left maps to left(A) x left(B) and from the right to
    right(A) x right(B).
    """
    a = local_annihilation(d).matrix
    adag = local_creation(d).matrix
    generator = sp.csr_matrix((d ** 4, d ** 4), dtype=complex)
    for first, second in ((a, adag), (adag, a)):
        h_left = sp.kron(left_super(first), left_super(second))
        h_right = sp.kron(right_super(first), right_super(second))
        generator = generator + (-params.hopping) * (-1j) * (h_left - h_right)
    return generator.toarray()
