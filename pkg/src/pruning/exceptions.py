from src.exceptions import ConfigurationException, ValidationFailedException
from src.pruning.schemas import PlanReport


class InvalidPruningRatioException(ConfigurationException):
    """Exception raised when a pruning ratio lies outside [0, 1) or would empty a layer."""

    def __init__(self, layer_id: str, ratio: float):
        super().__init__(
            message=f"Pruning ratio {ratio} for layer {layer_id} must lie in [0, 1) and keep a channel",
            error_code="INVALID_PRUNING_RATIO",
            details={"layer_id": layer_id, "ratio": ratio},
        )


class PlanValidationException(ValidationFailedException):
    """Exception raised when a plan cannot be applied to a model."""

    def __init__(self, report: PlanReport):
        super().__init__(
            message=f"Pruning plan failed validation with {len(report.violations)} violation(s)",
            error_code="PLAN_VALIDATION_FAILED",
            details={"violations": [v.model_dump(mode="json") for v in report.violations]},
        )
