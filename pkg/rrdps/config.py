from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    LOG_LEVEL: str = "INFO"
    # Caps worker processes for sweeps and simulations; unset means cpu_count
    QKD_THREADS: int | None = Field(default=None, ge=1)
    # Pulses per Monte Carlo work unit (fixes the chunk -> substream mapping)
    MC_CHUNK_PULSES: int = Field(default=1 << 20, ge=1)
    DEFAULT_SEED: int = Field(default=0, ge=0)
    # Pydantic v2 style config
    model_config = SettingsConfigDict(env_file=".env", extra="ignore")


@lru_cache(maxsize=1)
def get_settings() -> "Settings":
    return Settings()
