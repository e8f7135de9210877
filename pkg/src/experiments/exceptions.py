from pathlib import Path

from src.exceptions import ConfigurationException, NotFoundException


class ConfigNotFoundException(NotFoundException):
    def __init__(self, path: Path):
        super().__init__(
            message=f"Config file {path} does not exist",
            error_code="CONFIG_NOT_FOUND",
            details={"path": str(path)},
        )


class InvalidConfigException(ConfigurationException):
    """Exception raised when a config document is not valid JSON or carries a foreign schema version."""

    def __init__(self, path: Path, reason: str):
        super().__init__(
            message=f"Config {path} is invalid: {reason}",
            error_code="INVALID_CONFIG",
            details={"path": str(path), "reason": reason},
        )


class RunNotFoundException(NotFoundException):
    """Exception raised when a run directory or one of its stages is missing."""

    def __init__(self, run_dir: Path, stage: str | None = None):
        missing = f"stage '{stage}' of run" if stage else "run"
        super().__init__(
            message=f"No {missing} found at {run_dir}",
            error_code="RUN_NOT_FOUND",
            details={"run_dir": str(run_dir), "stage": stage},
        )


class ArtifactNotFoundException(NotFoundException):
    def __init__(self, path: Path):
        super().__init__(
            message=f"Artifact {path} does not exist",
            error_code="ARTIFACT_NOT_FOUND",
            details={"path": str(path)},
        )


class DatasetModelMismatchException(ConfigurationException):
    def __init__(self, dataset: str, dataset_classes: int, model_classes: int):
        super().__init__(
            message=f"Dataset {dataset} has {dataset_classes} classes but the model predicts {model_classes}",
            error_code="DATASET_MODEL_MISMATCH",
            details={"dataset": dataset, "dataset_classes": dataset_classes, "model_classes": model_classes},
        )
