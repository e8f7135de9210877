from pathlib import Path

from src.exceptions import ConfigurationException, NotFoundException


class DatasetNotFoundException(NotFoundException):
    """Exception raised when the CIFAR archives are missing from the data root."""

    def __init__(self, name: str, root: Path):
        super().__init__(
            message=f"Dataset {name} not found under {root}; run the fetch command first",
            error_code="DATASET_NOT_FOUND",
            details={"name": name, "root": str(root)},
        )


class InvalidSubsetException(ConfigurationException):
    def __init__(self, subset: int, num_classes: int):
        super().__init__(
            message=f"Subset of {subset} images cannot hold at least one image of each of {num_classes} classes",
            error_code="INVALID_SUBSET",
            details={"subset": subset, "num_classes": num_classes},
        )
