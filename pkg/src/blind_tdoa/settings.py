from __future__ import annotations

__all__ = ('Settings', 'settings')

from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from blind_tdoa.constants import DEFAULT_DENSE_THRESHOLD


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix='BLIND_TDOA_',
        env_file='.env',
        env_file_encoding='utf-8',
        extra='ignore',
    )

    # Output
    output_dir: Path | None = None

    # Logging
    log_level: str = 'INFO'
    log_file: bool = False
    log_dir: Path | None = None

    # Numerics
    dense_threshold: int = Field(default=DEFAULT_DENSE_THRESHOLD, ge=1)

    # Benchmark
    jobs: int = Field(default=1, ge=1)


settings = Settings()
