from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Logging
    LOG_LEVEL: str = "INFO"

    # Output
    OUTPUT_DIR: str = "runs"
    METRICS_FLOAT_FORMAT: Optional[str] = None  # None writes the shortest repr that reads back exactly
    RECORD_WALLCLOCK: bool = False  # When False, wallclock_ms is written as 0

    # Celery (sweep entries)
    REDIS_URL: str = "redis://localhost:6379/0"
    CELERY_TASK_ALWAYS_EAGER: bool = True  # Run sweep entries in-process unless a worker pool is up
    SWEEP_TASK_TIME_LIMIT: int = 6 * 3600

    # Training
    WARMUP_EXPERIENCES: int = 10_000  # Updates start once this many experiences are collected

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")


settings = Settings()
