"""
Shared fixtures
"""
import numpy as np
import pytest

from drivencavity.models.schemas import Boundary, LatticeSpec, ModelParams, SweepConfig


def random_density_matrix(dim: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def gentle_params():
    """Moderate scales; Trotter and RK4 errors stay small at dt=0.01"""
    return ModelParams.resonant(2.0, (0.1, 1.0), hopping=0.5, drive=1.0)


@pytest.fixture
def fig3_params():
    return ModelParams.resonant(20.0, (0.1, 1.0), hopping=0.5, drive=5.0)


@pytest.fixture
def chain3():
    return LatticeSpec(n_sites=3, boundary=Boundary.OPEN, local_dim=3)


@pytest.fixture
def small_config(tmp_path):
    """2 x 2 dense sweep on a two-site chain"""
    return SweepConfig.model_validate({
        "name": "small",
        "spec": {"n_sites": 2, "boundary": "open", "local_dim": 3},
        "params": {"interaction": 4.0, "gammas": [0.2, 1.0]},
        "resonant": True,
        "grid": {
            "drive": {"min": 0.5, "max": 1.5, "count": 2},
            "hopping": {"min": 0.1, "max": 0.6, "count": 2},
        },
        "observables": {
            "density": True,
            "variance": True,
            "g1_row": True,
            "g2_row": True,
            "level_populations": True,
            "mode_spectrum": True,
        },
        "output": {"path": str(tmp_path / "out"), "stem": "small"},
    })
