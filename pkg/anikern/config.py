from __future__ import annotations

import os
from functools import lru_cache
from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="ANIKERN_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    float_mode: Literal["strict", "fast"] = Field(default="strict")
    jobs: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    log_level: str = Field(default="INFO")

    freq_threshold: float = Field(default=40.0, gt=0)
    dense_limit: int = Field(default=4096, ge=1)
    lf_n_starts: int = Field(default=8, ge=1)
    lf_tol: float = Field(default=1e-10, gt=0)
    twist_overflow: float = Field(default=300.0, gt=0)

    @property
    def fft_workers(self) -> int:
        # strict mode keeps single-threaded transforms so reruns are bit-identical
        return 1 if self.float_mode == "strict" else -1


@lru_cache
def get_settings() -> Settings:
    return Settings()
