from typing import Literal

from pydantic_settings import BaseSettings, SettingsConfigDict

from src.constants import Environment


class Settings(BaseSettings):
    # Environment
    ENVIRONMENT: Environment = Environment.DEVELOPMENT
    # Overrides the environment-derived log level when set
    LOG_LEVEL: Literal["DEBUG", "INFO", "WARNING", "ERROR"] | None = None
    PROJECT_NAME: str = "CPSCA Pruning Toolkit"

    # Filesystem
    LOGS_DIR: str = "logs"
    DATA_ROOT: str = "data"  # Directory holding the extracted CIFAR python archives
    RUNS_DIR: str = "runs"

    # Compute
    DEVICE: Literal["auto", "cpu", "cuda"] = "auto"
    NUM_WORKERS: int = 0
    DETERMINISTIC: bool = True

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True, extra="ignore")


# Singleton instance
settings = Settings()
