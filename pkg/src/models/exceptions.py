from pathlib import Path

from src.exceptions import ConfigurationException, ConflictException, NotFoundException


class UnsupportedDepthException(ConfigurationException):
    """Exception raised when a backbone depth has no definition."""

    def __init__(self, arch: str, depth: int | None):
        super().__init__(
            message=f"Unsupported depth {depth} for architecture {arch}",
            error_code="UNSUPPORTED_DEPTH",
            details={"arch": arch, "depth": depth},
        )


class InvalidLayerConfigException(ConfigurationException):
    """Exception raised when a plain net's layer list cannot be built."""

    def __init__(self, reason: str):
        super().__init__(
            message=f"Invalid layer configuration: {reason}",
            error_code="INVALID_LAYER_CONFIG",
            details={"reason": reason},
        )


class UnknownLayerException(ConflictException):
    """Exception raised when a layer id does not exist in a model."""

    def __init__(self, layer_id: str):
        super().__init__(
            message=f"Layer {layer_id} does not exist in the model",
            error_code="UNKNOWN_LAYER",
            details={"layer_id": layer_id},
        )


class CheckpointNotFoundException(NotFoundException):
    """Exception raised when a checkpoint directory is missing or incomplete."""

    def __init__(self, path: Path):
        super().__init__(
            message=f"No checkpoint found at {path}",
            error_code="CHECKPOINT_NOT_FOUND",
            details={"path": str(path)},
        )
