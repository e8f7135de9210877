from src.exceptions import ConflictException


class MissingBatchNormException(ConflictException):
    """Exception raised when a prunable conv is not followed by a BN layer."""

    def __init__(self, layer_id: str):
        super().__init__(
            message=f"Layer {layer_id} has no batch normalization to read scale factors from",
            error_code="MISSING_BATCH_NORM",
            details={"layer_id": layer_id},
        )
