import copy
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import torch
import torch.nn.functional as F
from torch import nn
from torch.optim import SGD, Adam, Optimizer
from torch.optim.lr_scheduler import MultiStepLR
from tqdm import tqdm

from src.datasets.service import DatasetHandle, eval_loader, train_loader
from src.logger import get_logger
from src.metrics.service import evaluate_accuracy
from src.training.constants import OptimizerKind, Split, Stage
from src.training.exceptions import TrainingDivergedException
from src.training.schemas import EpochRecord, TrainConfig
from src.utils import seed_everything

logger = get_logger(__name__)


@dataclass
class TrainResult:
    """Final model plus the best test-accuracy snapshot of a run."""

    model: nn.Module
    final_accuracy: float
    best_accuracy: float
    best_epoch: int
    best_state: dict[str, torch.Tensor]
    records: list[EpochRecord] = field(default_factory=list)


class TrainerService:
    """Supervised training loop used for both training and fine-tuning."""

    def __init__(self, device: torch.device | str = "cpu", log_path: Path | None = None):
        """Initialize the trainer.

        Args:
            device: Device the model is trained on
            log_path: JSON-lines file receiving one EpochRecord per epoch and split
        """
        self.device = torch.device(device)
        self.log_path = log_path

    def train(self, model: nn.Module, dataset: DatasetHandle, cfg: TrainConfig) -> TrainResult:
        return self._run(model, dataset, cfg, Stage.TRAIN)

    def finetune(self, pruned: nn.Module, dataset: DatasetHandle, cfg: TrainConfig) -> TrainResult:
        """Continue training a pruned model from its current weights."""
        return self._run(pruned, dataset, cfg, Stage.FINETUNE)

    def _run(self, model: nn.Module, dataset: DatasetHandle, cfg: TrainConfig, stage: Stage) -> TrainResult:
        generator = seed_everything(cfg.seed)
        model.to(self.device)
        augmentation = cfg.augmentation
        loader = train_loader(
            dataset,
            cfg.batch_size,
            generator,
            random_crop=augmentation.random_crop,
            horizontal_flip=augmentation.horizontal_flip,
            normalize=augmentation.normalize,
        )
        test_loader = eval_loader(dataset, "test", normalize=augmentation.normalize)
        optimizer = build_optimizer(model, cfg)
        scheduler = MultiStepLR(optimizer, milestones=cfg.milestone_epochs(), gamma=cfg.lr_decay)
        bn_layers = [m for m in model.modules() if isinstance(m, nn.BatchNorm2d) and m.weight is not None]

        records: list[EpochRecord] = []
        best_accuracy = -1.0
        best_epoch = 0
        best_state: dict[str, torch.Tensor] = {}
        test_accuracy = 0.0
        logger.info(f"Starting {stage} for {cfg.epochs} epochs on {len(dataset.train)} images")

        for epoch in range(1, cfg.epochs + 1):
            started = time.perf_counter()
            lr = optimizer.param_groups[0]["lr"]
            model.train()
            loss_sum = 0.0
            correct = 0
            seen = 0
            for step, (images, labels) in enumerate(tqdm(loader, desc=f"{stage}[{epoch}]", leave=False)):
                images, labels = images.to(self.device), labels.to(self.device)
                optimizer.zero_grad(set_to_none=True)
                logits = model(images)
                loss = F.cross_entropy(logits, labels)
                if not math.isfinite(loss.item()):
                    raise TrainingDivergedException(stage.value, epoch, step, loss.item())
                loss.backward()
                if cfg.bn_sparsity > 0:
                    apply_bn_sparsity(bn_layers, cfg.bn_sparsity)
                optimizer.step()

                loss_sum += loss.item() * labels.size(0)
                correct += (logits.argmax(dim=1) == labels).sum().item()
                seen += labels.size(0)
            scheduler.step()

            test_accuracy = evaluate_accuracy(model, test_loader, self.device)
            wall_time = time.perf_counter() - started
            epoch_records = [
                EpochRecord(
                    stage=stage,
                    epoch=epoch,
                    split=Split.TRAIN,
                    loss=loss_sum / max(seen, 1),
                    accuracy=correct / max(seen, 1),
                    lr=lr,
                    wall_time=wall_time,
                ),
                EpochRecord(stage=stage, epoch=epoch, split=Split.TEST, accuracy=test_accuracy, lr=lr, wall_time=wall_time),
            ]
            self._log(epoch_records)
            records.extend(epoch_records)
            logger.info(
                f"{stage} epoch {epoch}/{cfg.epochs}: loss={epoch_records[0].loss:.4f} "
                f"train_acc={epoch_records[0].accuracy:.4f} test_acc={test_accuracy:.4f} lr={lr:g}"
            )

            if test_accuracy > best_accuracy:
                best_accuracy = test_accuracy
                best_epoch = epoch
                best_state = copy.deepcopy(model.state_dict())

        return TrainResult(
            model=model,
            final_accuracy=test_accuracy,
            best_accuracy=best_accuracy,
            best_epoch=best_epoch,
            best_state=best_state,
            records=records,
        )

    def _log(self, records: list[EpochRecord]) -> None:
        if self.log_path is None:
            return
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        with self.log_path.open("a") as f:
            for record in records:
                f.write(record.model_dump_json() + "\n")


def build_optimizer(model: nn.Module, cfg: TrainConfig) -> Optimizer:
    match cfg.optimizer:
        case OptimizerKind.SGD:
            return SGD(model.parameters(), lr=cfg.lr, momentum=cfg.momentum, weight_decay=cfg.weight_decay)
        case OptimizerKind.ADAM:
            return Adam(model.parameters(), lr=cfg.lr, weight_decay=cfg.weight_decay)


def apply_bn_sparsity(bn_layers: list[nn.BatchNorm2d], strength: float) -> None:
    """Add the subgradient of strength * |gamma| to every BN scale gradient."""
    for bn in bn_layers:
        if bn.weight.grad is not None:
            bn.weight.grad.add_(strength * torch.sign(bn.weight.detach()))


def read_log(path: Path) -> list[EpochRecord]:
    return [EpochRecord.model_validate_json(line) for line in path.read_text().splitlines() if line.strip()]
