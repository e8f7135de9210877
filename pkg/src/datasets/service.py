from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import Tensor
from torch.utils.data import DataLoader, Dataset, Subset
from torchvision import datasets, transforms

from src.config import settings
from src.datasets.constants import (
    CHANNEL_MEAN,
    CHANNEL_STD,
    CROP_PADDING,
    CROP_SIZE,
    DEFAULT_EVAL_BATCH_SIZE,
    NUM_CLASSES,
    DatasetName,
)
from src.datasets.exceptions import DatasetNotFoundException, InvalidSubsetException
from src.datasets.schemas import DatasetConfig
from src.logger import get_logger

logger = get_logger(__name__)

_TORCHVISION_CLASSES = {DatasetName.CIFAR10: datasets.CIFAR10, DatasetName.CIFAR100: datasets.CIFAR100}


@dataclass
class DatasetHandle:
    """Train and test splits of an image classification dataset as (3x32x32 tensor, label) pairs."""

    name: str
    train: Dataset
    test: Dataset
    num_classes: int
    mean: tuple[float, ...] = field(default=(0.0, 0.0, 0.0))
    std: tuple[float, ...] = field(default=(1.0, 1.0, 1.0))


class AugmentedDataset(Dataset):
    """Applies tensor transforms to the images of a wrapped dataset."""

    def __init__(self, base: Dataset, transform: transforms.Compose):
        self.base = base
        self.transform = transform

    def __len__(self) -> int:
        return len(self.base)

    def __getitem__(self, index: int) -> tuple[Tensor, int]:
        image, label = self.base[index]
        return self.transform(image), label


def load_dataset(cfg: DatasetConfig) -> DatasetHandle:
    """Load CIFAR-10/100 from the local archives, optionally cut to a per-class subset.

    Raises:
        DatasetNotFoundException: If the archives are not under cfg.root
        InvalidSubsetException: If the subset cannot hold one image per class
    """
    dataset_class = _TORCHVISION_CLASSES[cfg.name]
    try:
        train = dataset_class(root=str(cfg.root), train=True, download=False, transform=transforms.ToTensor())
        test = dataset_class(root=str(cfg.root), train=False, download=False, transform=transforms.ToTensor())
    except RuntimeError as e:
        raise DatasetNotFoundException(cfg.name, cfg.root) from e

    num_classes = NUM_CLASSES[cfg.name]
    if cfg.subset is not None:
        train = first_per_class(train, cfg.subset, num_classes)
    if cfg.test_subset is not None:
        test = first_per_class(test, cfg.test_subset, num_classes)

    logger.info(f"Loaded {cfg.name}: {len(train)} train / {len(test)} test images")
    return DatasetHandle(
        name=cfg.name.value,
        train=train,
        test=test,
        num_classes=num_classes,
        mean=CHANNEL_MEAN[cfg.name],
        std=CHANNEL_STD[cfg.name],
    )


def first_per_class(dataset: Dataset, total: int, num_classes: int) -> Subset:
    """Keep the first total // num_classes samples of every class, in dataset order."""
    per_class = total // num_classes
    if per_class < 1:
        raise InvalidSubsetException(total, num_classes)

    labels = np.asarray(_labels_of(dataset))
    indices = []
    for label in range(num_classes):
        indices.extend(np.flatnonzero(labels == label)[:per_class].tolist())
    return Subset(dataset, sorted(indices))


def train_loader(
    handle: DatasetHandle,
    batch_size: int,
    generator: torch.Generator,
    random_crop: bool = True,
    horizontal_flip: bool = True,
    normalize: bool = True,
) -> DataLoader:
    """Shuffled, augmented loader whose order is fixed by the generator."""
    steps: list = []
    if random_crop:
        steps.append(transforms.RandomCrop(CROP_SIZE, padding=CROP_PADDING))
    if horizontal_flip:
        steps.append(transforms.RandomHorizontalFlip())
    if normalize:
        steps.append(transforms.Normalize(handle.mean, handle.std))
    dataset = AugmentedDataset(handle.train, transforms.Compose(steps)) if steps else handle.train
    return DataLoader(
        dataset,
        batch_size=batch_size,
        shuffle=True,
        generator=generator,
        num_workers=settings.NUM_WORKERS,
    )


def eval_loader(
    handle: DatasetHandle,
    split: str = "test",
    batch_size: int = DEFAULT_EVAL_BATCH_SIZE,
    normalize: bool = True,
) -> DataLoader:
    """Un-augmented loader in dataset order, for evaluation and statistics passes."""
    dataset = handle.test if split == "test" else handle.train
    if normalize:
        dataset = AugmentedDataset(dataset, transforms.Compose([transforms.Normalize(handle.mean, handle.std)]))
    return DataLoader(dataset, batch_size=batch_size, shuffle=False, num_workers=settings.NUM_WORKERS)


def fetch_dataset(name: DatasetName | str, root: Path | None = None) -> Path:
    """Download the CIFAR archives into the data root."""
    name = DatasetName(name)
    root = root or Path(settings.DATA_ROOT)
    root.mkdir(parents=True, exist_ok=True)
    for train in (True, False):
        _TORCHVISION_CLASSES[name](root=str(root), train=train, download=True)
    logger.info(f"Fetched {name} into {root}")
    return root


def _labels_of(dataset: Dataset) -> Sequence[int]:
    targets = getattr(dataset, "targets", None)
    if targets is not None:
        return [int(t) for t in targets]
    if hasattr(dataset, "tensors"):
        return dataset.tensors[1].tolist()
    return [int(dataset[i][1]) for i in range(len(dataset))]
