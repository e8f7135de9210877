from enum import StrEnum

# Rounding applied to ratio * channels before flooring, so 0.3 * 10 removes 3 channels
RATIO_ROUNDING_DIGITS = 9

MIN_SURVIVING_CHANNELS = 1


class ViolationCode(StrEnum):
    EMPTY_LAYER = "empty layer"
    RESIDUAL_COUPLING = "residual coupling"
    UNKNOWN_LAYER = "unknown layer"
    CHANNEL_MISMATCH = "channel mismatch"
    INDEX_OUT_OF_RANGE = "index out of range"
    DUPLICATE_INDEX = "duplicate index"
    ATTENTION_PRESENT = "attention present"
    RATIO_MISMATCH = "ratio mismatch"
    DIVISIBILITY = "divisibility"
