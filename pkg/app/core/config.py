from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import field_validator
import os


LOG_LEVELS = ("error", "warn", "info", "debug")


class Settings(BaseSettings):
    """Process settings loaded from FOGFORGE_* environment variables."""

    # Logging
    log: str = "info"
    log_format: str = "console"

    # Parallel trials (0 = one worker per logical core)
    jobs: int = 0

    @field_validator('log')
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level is one of error/warn/info/debug."""
        v = v.strip().lower()
        if v == "warning":
            v = "warn"
        if v not in LOG_LEVELS:
            raise ValueError(f"FOGFORGE_LOG must be one of {', '.join(LOG_LEVELS)}")
        return v

    @field_validator('log_format')
    @classmethod
    def validate_log_format(cls, v: str) -> str:
        """Validate log format is console or json."""
        v = v.strip().lower()
        if v not in ("console", "json"):
            raise ValueError("FOGFORGE_LOG_FORMAT must be 'console' or 'json'")
        return v

    @field_validator('jobs')
    @classmethod
    def validate_jobs(cls, v: int) -> int:
        if v < 0:
            raise ValueError("FOGFORGE_JOBS must be >= 0")
        return v

    def effective_jobs(self) -> int:
        """Worker count with 0 resolved to the number of logical cores."""
        return self.jobs or (os.cpu_count() or 1)

    model_config = SettingsConfigDict(
        env_prefix="FOGFORGE_",
        # Only read .env file if it exists
        env_file=".env" if os.path.exists(".env") else None,
        env_file_encoding="utf-8",
        case_sensitive=False,
        env_ignore_empty=True,
        extra="ignore",
    )


settings = Settings()
