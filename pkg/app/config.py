from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    LOG_LEVEL: str = "INFO"
    OUTPUT_DIR: str = "runs"

    # Integration
    INPUT_HOLD: str = "cubic"
    DIVERGENCE_LIMIT: float = 1e12

    # Probe grid for HJE / gain residual checks
    PROBE_HALF_WIDTH: float = 2.0
    PROBE_POINTS: int = 21
    PROBE_MAX_STATES: int = 10000
    PROBE_SEED: int = 20240611

    # Tolerances
    HJE_TOLERANCE: float = 1e-8
    GAIN_TOLERANCE: float = 1e-6
    NORMALIZATION_TOLERANCE: float = 1e-8
    CONDITION_LIMIT: float = 1e12
    RICCATI_TOLERANCE: float = 1e-12
    RICCATI_MAX_ITER: int = 100
    ENERGY_FLOOR: float = 1e-12
    SWEEP_TOLERANCE: float = 1e-9
    SWEEP_MAX_ITER: int = 50

    # Detection defaults
    DEFAULT_GAMMA: float = 0.95
    DEFAULT_ALPHA: float = 0.05
    DEFAULT_BURN_IN: float = 0.1
    MINIMALITY_CANDIDATES: int = 200

    # Frequency probes
    PROBE_FREQUENCY_COUNT: int = 50
    PROBE_FREQUENCY_MIN: float = 1e-2
    PROBE_FREQUENCY_MAX: float = 1e2

    model_config = SettingsConfigDict(env_file=".env", extra="ignore")


settings = Settings()
