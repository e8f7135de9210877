from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field

from src.config import settings
from src.datasets.constants import DatasetName


class DatasetConfig(BaseModel):
    name: DatasetName = DatasetName.CIFAR10
    root: Path = Field(default_factory=lambda: Path(settings.DATA_ROOT))
    # Total training images kept, taken as the first subset/num_classes images of every class
    subset: int | None = Field(None, ge=1)
    # Test images kept the same way; None keeps the full test split
    test_subset: int | None = Field(None, ge=1)

    model_config = ConfigDict(extra="forbid")
