"""
Exception types raised by DrivenCavity
"""
from typing import Sequence, Tuple


class CavityError(ValueError):
    """Base class for all simulator errors"""


class InvalidDimensionError(CavityError):
    """Local Fock dimension below 2"""


class InvalidLevelError(CavityError):
    """Jump operator level outside 0..d-2"""


class SiteIndexError(CavityError, IndexError):
    """Site index outside the lattice"""


class DimensionMismatchError(CavityError):
    """Operator or parameter dimensions disagree with the lattice"""


class DimensionBudgetError(CavityError):
    """Dense representation requested beyond the configured size guard"""


class UnsupportedBoundaryError(CavityError):
    """Operation not defined for the lattice boundary condition"""


class DegenerateSteadyStateError(CavityError):
    """Steady-state system is singular or ambiguous beyond tolerance"""

    def __init__(self, message: str, singular_values: Sequence[float] = ()):
        super().__init__(message)
        self.singular_values: Tuple[float, ...] = tuple(float(s) for s in singular_values)


class UnstableStepError(CavityError):
    """Explicit integrator diverged; a smaller time step is needed"""


class UndefinedCorrelationError(CavityError):
    """Normalized correlation requested at a site with zero density"""


class CorrelationFitError(CavityError):
    """Too few usable points for the correlation-length fit"""


class ConfigError(CavityError):
    """Run configuration could not be loaded or validated"""


class CheckpointError(CavityError):
    """Checkpoint file missing or inconsistent with the run"""


class ModeIndexError(CavityError, IndexError):
    """Momentum mode index outside 0..N-1"""
