from src.exceptions import ConfigurationException, NumericException


class GroupDivisibilityException(ConfigurationException):
    """Exception raised when a group count does not divide the channel count."""

    def __init__(self, channels: int, groups: int, parameter: str):
        super().__init__(
            message=f"{parameter}={groups} does not divide the channel count {channels}",
            error_code="GROUP_DIVISIBILITY",
            details={"channels": channels, "groups": groups, "parameter": parameter},
        )


class FeatureMapShapeException(ConfigurationException):
    """Exception raised when a tensor is not a non-empty (B, C, H, W) feature map."""

    def __init__(self, shape: tuple[int, ...]):
        super().__init__(
            message=f"Expected a (batch, channels, height, width) feature map, got shape {shape}",
            error_code="FEATURE_MAP_SHAPE",
            details={"shape": list(shape)},
        )


class ParameterShapeException(ConfigurationException):
    """Exception raised when attention parameters were sized for another layer."""

    def __init__(self, name: str, expected: int, actual: int):
        super().__init__(
            message=f"Attention parameter {name} has {actual} entries, expected {expected}",
            error_code="ATTENTION_PARAMETER_SHAPE",
            details={"parameter": name, "expected": expected, "actual": actual},
        )


class NonFiniteInputException(NumericException):
    """Exception raised when a feature map carries NaN or infinite entries."""

    def __init__(self, submodule: str):
        super().__init__(
            message=f"Non-finite entries in the input of the {submodule} attention submodule",
            error_code="NON_FINITE_FEATURE_MAP",
            details={"submodule": submodule},
        )
