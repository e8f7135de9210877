from src.exceptions import ConfigurationException, ValidationFailedException


class EmptyDatasetException(ValidationFailedException):
    """Exception raised when an evaluation set holds no samples."""

    def __init__(self):
        super().__init__(
            message="Cannot evaluate accuracy on an empty dataset",
            error_code="EMPTY_DATASET",
        )


class ShapeInconsistencyException(ValidationFailedException):
    """Exception raised when a model cannot forward the probe input."""

    def __init__(self, input_shape: tuple[int, ...], reason: str):
        super().__init__(
            message=f"Model cannot propagate an input of shape {input_shape}: {reason}",
            error_code="SHAPE_INCONSISTENCY",
            details={"input_shape": list(input_shape), "reason": reason},
        )


class InvalidLatencyConfigException(ConfigurationException):
    def __init__(self, repeats: int, minimum: int):
        super().__init__(
            message=f"Latency measurement needs at least {minimum} repeats, got {repeats}",
            error_code="INVALID_LATENCY_CONFIG",
            details={"repeats": repeats, "minimum": minimum},
        )
