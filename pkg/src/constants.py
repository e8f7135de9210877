from enum import IntEnum, StrEnum

# Schema version written into every persisted document
SCHEMA_VERSION = "1.0"

# Input geometry of the CIFAR benchmarks
CIFAR_INPUT_SHAPE = (3, 32, 32)

# Decimal rendering for persisted real numbers
FLOAT_SIGNIFICANT_DIGITS = 17

# Date/Time Formats
DATETIME_FORMAT = "%Y-%m-%d %H:%M:%S"


# Process exit codes
class ExitCode(IntEnum):
    SUCCESS = 0
    FAILURE = 1
    USAGE = 2
    NOT_FOUND = 3
    CONFLICT = 4
    VALIDATION = 5
    NUMERIC = 6


# Environment Types
class Environment(StrEnum):
    DEVELOPMENT = "development"
    STAGING = "staging"
    PRODUCTION = "production"
