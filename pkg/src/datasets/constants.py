from enum import StrEnum


class DatasetName(StrEnum):
    CIFAR10 = "cifar10"
    CIFAR100 = "cifar100"


NUM_CLASSES = {DatasetName.CIFAR10: 10, DatasetName.CIFAR100: 100}

# Per-channel statistics of the training splits
CHANNEL_MEAN = {
    DatasetName.CIFAR10: (0.4914, 0.4822, 0.4465),
    DatasetName.CIFAR100: (0.5071, 0.4865, 0.4409),
}
CHANNEL_STD = {
    DatasetName.CIFAR10: (0.2470, 0.2435, 0.2616),
    DatasetName.CIFAR100: (0.2673, 0.2564, 0.2762),
}

CROP_SIZE = 32
CROP_PADDING = 4

DEFAULT_EVAL_BATCH_SIZE = 256
