from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Runtime settings, overridable through COARSE_CLT_* environment variables."""

    PROJECT_NAME: str = "coarse-clt"
    VERSION: str = "0.1.0"

    # Enumeration budget shared by exact enumeration, TV, loops and
    # fellow-traveler checks. COARSE_CLT_BUDGET overrides it.
    BUDGET: int = 10_000_000

    # Spectral settings
    SPECTRAL_TOLERANCE: float = 1e-9
    ITERATION_CAP: int = 10_000
    JORDAN_HORIZON: int = 2_000
    JORDAN_GROWTH_FACTOR: float = 1.5
    JORDAN_N5_FACTOR: float = 1_000.0

    # Sampling settings
    SAMPLE_BLOCK_SIZE: int = 4_096
    DEFAULT_JOBS: int = 1
    MIN_MC_SAMPLES: int = 1_000

    # Harness settings
    ZERO_TOLERANCE: float = 1e-9
    PROBE_MAXLEN: int = 8
    CYCLE_POWER: int = 32

    FLOAT_DIGITS: int = 12
    LOG_LEVEL: str = "WARNING"

    model_config = SettingsConfigDict(
        env_prefix="COARSE_CLT_",
        env_file=".env",
        case_sensitive=True,
        extra="ignore",
    )


settings = Settings()
