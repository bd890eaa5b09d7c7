"""
Configuration settings for DrivenCavity
"""
from pathlib import Path
from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field, field_validator


class Settings(BaseSettings):
    """Process-wide defaults loaded from environment variables"""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    # Dense solver configuration
    dense_dim_limit: int = Field(
        default=4096,
        description="Largest Hilbert dimension D allowed for dense operator conversion"
    )
    liouville_dim_limit: int = Field(
        default=4096,
        description="Largest Liouville dimension D^2 accepted by the dense steady-state solver"
    )
    svd_dim_limit: int = Field(
        default=1024,
        description="Liouville dimension up to which uniqueness is checked with a full SVD"
    )
    steady_tol: float = Field(
        default=1e-10,
        description="Residual tolerance ||L vec(rho)|| for dense steady states"
    )

    # Tensor-network configuration
    trotter_dt: float = Field(
        default=0.01,
        description="Trotter time step, in units of 1/gamma_1"
    )
    max_bond: int = Field(
        default=64,
        description="Maximum MPDO bond dimension chi"
    )
    svd_cutoff: float = Field(
        default=1e-10,
        description="Relative singular-value cutoff for MPDO truncation"
    )
    drift_tol: float = Field(
        default=1e-6,
        description="Observable drift per unit time below which an MPDO run is converged"
    )
    sample_interval: float = Field(
        default=1.0,
        description="Time between observable samples during relaxation"
    )
    t_max: float = Field(
        default=500.0,
        description="Maximum relaxation time for MPDO runs"
    )

    # Units
    gamma_unit: float = Field(
        default=1.0,
        description="Fast dissipation rate gamma_1 that sets the energy unit"
    )

    # Execution
    workers: int = Field(
        default=1,
        description="Worker processes used for parameter sweeps"
    )
    output_dir: str = Field(
        default="./results",
        description="Default directory for sweep outputs"
    )
    checkpoint_dir: str = Field(
        default="./results/checkpoints",
        description="Default directory for sweep checkpoint logs"
    )

    # Logging
    log_level: str = Field(
        default="INFO",
        description="Logging level"
    )

    @field_validator("dense_dim_limit", "liouville_dim_limit", "svd_dim_limit", "max_bond", "workers")
    @classmethod
    def validate_positive_int(cls, v: int) -> int:
        """Sizes and counts must be at least one"""
        if v < 1:
            raise ValueError("must be a positive integer")
        return v

    @field_validator("steady_tol", "trotter_dt", "drift_tol", "sample_interval", "t_max", "gamma_unit")
    @classmethod
    def validate_positive_float(cls, v: float) -> float:
        """Tolerances and times must be strictly positive"""
        if not v > 0:
            raise ValueError("must be strictly positive")
        return v

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Normalize the logging level name"""
        level = v.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"unknown log level: {v}")
        return level

    @field_validator("output_dir", "checkpoint_dir")
    @classmethod
    def validate_paths(cls, v: str) -> str:
        """Ensure paths are absolute"""
        return str(Path(v).resolve())

    def get_output_path(self) -> Path:
        """Get Path object for the output directory, creating it if needed"""
        path = Path(self.output_dir)
        path.mkdir(parents=True, exist_ok=True)
        return path

    def get_checkpoint_path(self) -> Path:
        """Get Path object for the checkpoint directory, creating it if needed"""
        path = Path(self.checkpoint_dir)
        path.mkdir(parents=True, exist_ok=True)
        return path


# Create settings instance
settings = Settings()
