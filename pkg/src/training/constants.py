from enum import StrEnum

DEFAULT_EPOCHS = 160
DEFAULT_BATCH_SIZE = 128
DEFAULT_LR = 0.1
DEFAULT_MOMENTUM = 0.9
DEFAULT_WEIGHT_DECAY = 5e-4
# Step decay points as fractions of the epoch budget
DEFAULT_MILESTONES = (0.5, 0.75)
DEFAULT_LR_DECAY = 0.1

LOG_FILENAME = "train_log.jsonl"


class OptimizerKind(StrEnum):
    SGD = "sgd"
    ADAM = "adam"


class Stage(StrEnum):
    TRAIN = "train"
    FINETUNE = "finetune"


class Split(StrEnum):
    TRAIN = "train"
    TEST = "test"
