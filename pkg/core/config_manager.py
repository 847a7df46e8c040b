"""Configuration management for NODAL LAB."""

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="NODAL_",
        case_sensitive=False,
        extra="ignore",
    )

    # Randomness
    default_seed: int = 20240601
    calibration_seed: int = 1234
    calibration_repetitions: int = 100

    # Worker pool
    threads: int = 1

    # Grid policy (nodes per unit degree)
    theta_mult: float = 5.0
    phi_mult: float = 10.0
    grid_mult: float = 1.0
    min_theta_nodes: int = 32

    # Nodal length estimation
    epsilon: float = 0.05
    contour_extrapolation: bool = True
    band_nodes: float = 2.0
    max_band_theta_nodes: int = 8192

    # Table cache
    cache_max_entries: int = 64

    # Output
    output_dir: str = "./data/reports"
    campaigns_path: str = "./campaigns"
    record_timing: bool = False

    # Logging
    log_level: str = "INFO"
    log_format: str = "text"

    version: str = "1.0.0"


# Global settings instance
settings = Settings()
