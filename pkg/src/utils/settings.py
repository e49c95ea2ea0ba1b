# src/utils/settings.py

from functools import lru_cache

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Runtime knobs read from PRR_* environment variables or a .env file."""

    model_config = SettingsConfigDict(env_prefix="PRR_", env_file=".env", extra="ignore")

    log_level: str = "INFO"
    jobs: int = 1
    eps_pos: float = 1e-12
    power_tol: float = 1e-10
    power_max_iters: int = 20000
    tol_fp: float = 1e-9
    max_periods: int = 5000


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings()
