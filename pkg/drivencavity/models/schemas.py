"""
Pydantic models for lattice, physical parameters and run configuration
"""
from enum import Enum
from typing import Dict, List, Optional, Tuple
import math
import warnings

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from drivencavity.config import settings


class Boundary(str, Enum):
    """Lattice boundary condition"""
    OPEN = "open"
    PERIODIC = "periodic"


class LossModel(str, Enum):
    """Dissipator family"""
    CASCADED = "cascaded"
    UNIFORM = "uniform"


class SolverKind(str, Enum):
    """Steady-state engine used for a sweep"""
    DENSE = "dense"
    MPDO = "mpdo"


class InitialState(str, Enum):
    """Initial condition for MPDO relaxation"""
    VACUUM = "vacuum"
    MOTT = "mott"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class LatticeSpec(BaseModel):
    """Site count, boundary condition and local Fock truncation.

    Levels |0>..|d-1> are kept on every site. Periodic chains with one or two
    sites carry the same bonds as open chains.
    """
    model_config = ConfigDict(frozen=True)

    n_sites: int = Field(ge=1, description="Number of lattice sites N")
    boundary: Boundary = Field(default=Boundary.OPEN, description="Boundary condition")
    local_dim: int = Field(ge=2, description="Local Fock dimension d")

    @property
    def hilbert_dim(self) -> int:
        return self.local_dim ** self.n_sites

    @property
    def is_periodic(self) -> bool:
        return self.boundary == Boundary.PERIODIC and self.n_sites > 2

    @property
    def middle_site(self) -> int:
        return self.n_sites // 2

    def bonds(self) -> List[Tuple[int, int]]:
        """Nearest-neighbour pairs (j, j+1), with the wrap bond last for periodic chains"""
        pairs = [(j, j + 1) for j in range(self.n_sites - 1)]
        if self.is_periodic:
            pairs.append((self.n_sites - 1, 0))
        return pairs


class ModelParams(BaseModel):
    """Rotating-frame Bose-Hubbard parameters and the dissipation cascade.

    All energies and rates are in units of gamma_1. ``gammas[m]`` is the rate
    of |m+1> -> |m>; for the uniform loss model only ``gammas[0]`` is used.
    """
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    delta: float = Field(default=0.0, description="Detuning Delta")
    interaction: float = Field(default=0.0, description="On-site interaction U")
    hopping: float = Field(default=0.0, ge=0.0, description="Hopping rate J")
    drive: float = Field(default=0.0, ge=0.0, description="Parametric drive magnitude |Omega|")
    drive_phase: float = Field(default=0.0, description="Drive phase in radians")
    gammas: Tuple[float, ...] = Field(description="Dissipation cascade [gamma_0, gamma_1, ...]")
    loss_model: LossModel = Field(default=LossModel.CASCADED, description="Dissipator family")

    @field_validator("gammas")
    @classmethod
    def validate_gammas(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        """Rates must be finite and nonnegative"""
        if len(v) == 0:
            raise ValueError("at least one dissipation rate is required")
        for rate in v:
            if not math.isfinite(rate) or rate < 0:
                raise ValueError(f"dissipation rates must be finite and nonnegative, got {rate}")
        return tuple(float(rate) for rate in v)

    @model_validator(mode="after")
    def warn_on_cascade_violation(self) -> "ModelParams":
        """The cascade gamma_m >= gamma_n for m > n is a regime choice, not a requirement"""
        if self.loss_model == LossModel.CASCADED:
            for m in range(1, len(self.gammas)):
                if self.gammas[m] < self.gammas[m - 1]:
                    warnings.warn(
                        f"Dissipation cascade violated: gamma_{m}={self.gammas[m]} < "
                        f"gamma_{m - 1}={self.gammas[m - 1]}"
                    )
                    break
        return self

    @property
    def drive_amplitude(self) -> complex:
        """Complex drive Omega = |Omega| exp(i phase)"""
        return complex(self.drive * np.exp(1j * self.drive_phase))

    @classmethod
    def resonant(cls, interaction: float, gammas: Tuple[float, ...], hopping: float = 0.0,
                 drive: float = 0.0, **kwargs) -> "ModelParams":
        """Parameters with the drive resonant on |0> <-> |2>, i.e. Delta = -U/2"""
        return cls(
            delta=-interaction / 2.0,
            interaction=interaction,
            hopping=hopping,
            drive=drive,
            gammas=tuple(gammas),
            **kwargs
        )

    def at_point(self, drive: float, hopping: float) -> "ModelParams":
        """Copy with a new (Omega, J) grid point"""
        return self.model_copy(update={"drive": float(drive), "hopping": float(hopping)})


class DenseSolverOptions(BaseModel):
    """Options for the exact steady-state solver"""
    model_config = ConfigDict(frozen=True)

    tol: float = Field(default_factory=lambda: settings.steady_tol, gt=0)
    max_liouville_dim: int = Field(default_factory=lambda: settings.liouville_dim_limit, ge=1)
    svd_dim_limit: int = Field(default_factory=lambda: settings.svd_dim_limit, ge=1)
    check_uniqueness: bool = True
    degeneracy_tol: float = Field(default=1e-9, gt=0)
    march_dt: float = Field(default=0.01, gt=0)
    march_t_max: float = Field(default=2000.0, gt=0)


class MpdoOptions(BaseModel):
    """Options for Trotterized MPDO relaxation"""
    model_config = ConfigDict(frozen=True)

    dt: float = Field(default_factory=lambda: settings.trotter_dt, gt=0)
    max_bond: int = Field(default_factory=lambda: settings.max_bond, ge=1)
    cutoff: float = Field(default_factory=lambda: settings.svd_cutoff, ge=0)
    t_max: float = Field(default_factory=lambda: settings.t_max, gt=0)
    drift_tol: float = Field(default_factory=lambda: settings.drift_tol, gt=0)
    sample_interval: float = Field(default_factory=lambda: settings.sample_interval, gt=0)
    initial: InitialState = InitialState.VACUUM
    checkpoint_every: Optional[float] = Field(default=None, gt=0)
    bond_check: bool = False
    bond_check_tol: float = Field(default=1e-3, gt=0)


class Axis(BaseModel):
    """Linear grid axis"""
    model_config = ConfigDict(frozen=True)

    min: float
    max: float
    count: int = Field(ge=1)

    def values(self) -> List[float]:
        if self.count == 1:
            return [float(self.min)]
        return [float(x) for x in np.linspace(self.min, self.max, self.count)]


class GridSpec(BaseModel):
    """Grid over drive strength and hopping"""
    model_config = ConfigDict(frozen=True)

    drive: Axis
    hopping: Axis

    @property
    def size(self) -> int:
        return self.drive.count * self.hopping.count

    def points(self) -> List[Tuple[int, int, float, float]]:
        """(drive index, hopping index, Omega, J) ordered by drive index then hopping index"""
        return [
            (i, k, omega, hop)
            for i, omega in enumerate(self.drive.values())
            for k, hop in enumerate(self.hopping.values())
        ]


class ObservableFlags(BaseModel):
    """Quantities recorded at every grid point"""
    model_config = ConfigDict(frozen=True)

    density: bool = True
    variance: bool = True
    g1_row: bool = False
    g2_row: bool = False
    correlation_length: bool = False
    level_populations: bool = False
    mode_spectrum: bool = False


class OutputOptions(BaseModel):
    """Where and how sweep results are written"""
    model_config = ConfigDict(frozen=True)

    path: str = Field(default_factory=lambda: settings.output_dir)
    formats: Tuple[OutputFormat, ...] = (OutputFormat.CSV, OutputFormat.JSON)
    stem: str = "sweep"


class SweepConfig(BaseModel):
    """Complete description of a parameter sweep"""
    model_config = ConfigDict(frozen=True)

    name: str = "sweep"
    notes: str = ""
    spec: LatticeSpec
    params: ModelParams
    resonant: bool = Field(default=False, description="Derive Delta = -U/2 from the interaction")
    gamma_unit: float = Field(default_factory=lambda: settings.gamma_unit, gt=0)
    grid: GridSpec
    solver: SolverKind = SolverKind.DENSE
    dense: DenseSolverOptions = Field(default_factory=DenseSolverOptions)
    mpdo: MpdoOptions = Field(default_factory=MpdoOptions)
    observables: ObservableFlags = Field(default_factory=ObservableFlags)
    anchor: Optional[int] = Field(default=None, ge=0, description="Correlation anchor site; middle site if omitted")
    output: OutputOptions = Field(default_factory=OutputOptions)

    @model_validator(mode="before")
    @classmethod
    def resolve_resonance(cls, data):
        """Replace Delta by -U/2 when the resonant flag is set"""
        if isinstance(data, dict) and data.get("resonant"):
            params = data.get("params")
            if isinstance(params, ModelParams):
                data = {**data, "params": params.model_copy(update={"delta": -params.interaction / 2.0})}
            elif isinstance(params, dict):
                data = {**data, "params": {**params, "delta": -float(params.get("interaction", 0.0)) / 2.0}}
        return data

    @model_validator(mode="after")
    def validate_consistency(self) -> "SweepConfig":
        """Cross-field checks that pydantic field types cannot express"""
        if self.params.loss_model == LossModel.CASCADED and len(self.params.gammas) != self.spec.local_dim - 1:
            raise ValueError(
                f"gammas has {len(self.params.gammas)} entries, local_dim={self.spec.local_dim} "
                f"requires {self.spec.local_dim - 1}"
            )
        if self.solver == SolverKind.DENSE and self.spec.hilbert_dim ** 2 > self.dense.max_liouville_dim:
            raise ValueError(
                f"dense solver needs D^2={self.spec.hilbert_dim ** 2} <= {self.dense.max_liouville_dim}"
            )
        if self.solver == SolverKind.MPDO and self.spec.is_periodic:
            raise ValueError("the MPDO solver supports open boundary conditions only")
        if self.anchor is not None and self.anchor >= self.spec.n_sites:
            raise ValueError(f"anchor {self.anchor} outside lattice of {self.spec.n_sites} sites")
        if self.params.loss_model == LossModel.CASCADED and len(self.params.gammas) > 1:
            if not math.isclose(self.params.gammas[1], self.gamma_unit):
                warnings.warn(
                    f"gamma_1={self.params.gammas[1]} differs from gamma_unit={self.gamma_unit}; "
                    "rates are not expressed in units of gamma_1"
                )
        return self

    @property
    def anchor_site(self) -> int:
        return self.spec.middle_site if self.anchor is None else self.anchor


class PointRecord(BaseModel):
    """Observables and diagnostics at one grid point"""

    index_drive: int
    index_hopping: int
    drive: float
    hopping: float
    densities: List[float] = Field(default_factory=list)
    variances: List[float] = Field(default_factory=list)
    g1_real: List[Optional[float]] = Field(default_factory=list)
    g1_imag: List[Optional[float]] = Field(default_factory=list)
    g2: List[Optional[float]] = Field(default_factory=list)
    top_level_population: List[float] = Field(default_factory=list)
    mode_detunings: List[float] = Field(default_factory=list)
    correlation_length: Optional[float] = None
    fit_residual: Optional[float] = None
    converged: Optional[bool] = None
    residual: Optional[float] = None
    min_eigenvalue: Optional[float] = None
    truncation_error: Optional[float] = None
    bond_check_change: Optional[float] = None
    error: Optional[str] = None

    @property
    def flat_index(self) -> Tuple[int, int]:
        return (self.index_drive, self.index_hopping)


class SweepResult(BaseModel):
    """All grid-point records of a sweep, ordered by (drive index, hopping index)"""

    config: SweepConfig
    records: List[PointRecord] = Field(default_factory=list)

    @property
    def failures(self) -> List[PointRecord]:
        return [r for r in self.records if r.error is not None]

    def by_index(self) -> Dict[Tuple[int, int], PointRecord]:
        return {r.flat_index: r for r in self.records}
