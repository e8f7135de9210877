from src.exceptions import ConflictException, ValidationFailedException


class ChannelCountMismatchException(ConflictException):
    """Exception raised when an attention map does not match the layer it is filed under."""

    def __init__(self, layer_id: str, expected: int, actual: int):
        super().__init__(
            message=f"Layer {layer_id} has {expected} channels but the map carries {actual}",
            error_code="CHANNEL_COUNT_MISMATCH",
            details={"layer_id": layer_id, "expected": expected, "actual": actual},
        )


class UnknownScoreLayerException(ConflictException):
    """Exception raised when a score table has no entry for a layer."""

    def __init__(self, layer_id: str):
        super().__init__(
            message=f"No scores recorded for layer {layer_id}",
            error_code="UNKNOWN_SCORE_LAYER",
            details={"layer_id": layer_id},
        )


class EmptyAccumulationException(ValidationFailedException):
    """Exception raised when finalizing a layer that has seen no samples."""

    def __init__(self, layer_ids: list[str]):
        super().__init__(
            message=f"No samples accumulated for {len(layer_ids)} layer(s)",
            error_code="EMPTY_ACCUMULATION",
            details={"layer_ids": layer_ids},
        )


class TableNotFinalizedException(ValidationFailedException):
    """Exception raised when scores are read before finalization."""

    def __init__(self):
        super().__init__(
            message="Channel scale table has not been finalized",
            error_code="TABLE_NOT_FINALIZED",
        )


class MissingChannelGateException(ConflictException):
    """Exception raised when a model cannot provide channel gates for its prunable layers."""

    def __init__(self, scorer: str, layer_ids: list[str]):
        super().__init__(
            message=f"Scorer {scorer} needs a channel gate on every prunable layer; "
            f"{len(layer_ids)} layer(s) have none",
            error_code="SCORER_MODEL_MISMATCH",
            details={"scorer": scorer, "layer_ids": layer_ids},
        )
