from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.training.constants import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_EPOCHS,
    DEFAULT_LR,
    DEFAULT_LR_DECAY,
    DEFAULT_MILESTONES,
    DEFAULT_MOMENTUM,
    DEFAULT_WEIGHT_DECAY,
    OptimizerKind,
    Split,
    Stage,
)


class AugmentationConfig(BaseModel):
    random_crop: bool = True
    horizontal_flip: bool = True
    normalize: bool = True

    model_config = ConfigDict(extra="forbid")


class TrainConfig(BaseModel):
    """Optimization recipe shared by training and fine-tuning."""

    epochs: int = Field(DEFAULT_EPOCHS, ge=1)
    batch_size: int = Field(DEFAULT_BATCH_SIZE, ge=1)
    optimizer: OptimizerKind = OptimizerKind.SGD
    lr: float = Field(DEFAULT_LR, ge=0.0)
    momentum: float = Field(DEFAULT_MOMENTUM, ge=0.0, lt=1.0)
    weight_decay: float = Field(DEFAULT_WEIGHT_DECAY, ge=0.0)
    milestones: list[float] = Field(default_factory=lambda: list(DEFAULT_MILESTONES))
    lr_decay: float = Field(DEFAULT_LR_DECAY, gt=0.0, le=1.0)
    seed: int = 0
    augmentation: AugmentationConfig = AugmentationConfig()
    # L1 penalty on BN scale factors (channel-sparsity training); 0 disables it
    bn_sparsity: float = Field(0.0, ge=0.0)

    model_config = ConfigDict(extra="forbid")

    @field_validator("milestones")
    @classmethod
    def _check_milestones(cls, v: list[float]) -> list[float]:
        if any(not 0.0 < m < 1.0 for m in v):
            raise ValueError("milestones are fractions of the epoch budget in (0, 1)")
        return sorted(v)

    def milestone_epochs(self) -> list[int]:
        return sorted({int(m * self.epochs) for m in self.milestones if int(m * self.epochs) > 0})


class EpochRecord(BaseModel):
    """One line of the training log."""

    stage: Stage
    epoch: int
    split: Split
    loss: float | None = None
    accuracy: float
    lr: float
    wall_time: float
