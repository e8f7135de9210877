from collections.abc import Iterable
from pathlib import Path
from typing import Self

import numpy as np
import torch
from torch import Tensor
from tqdm import tqdm

from src.attention.modules import SpatialChannelAttention, SqueezeExcite
from src.logger import get_logger
from src.models.base import PrunableNetwork
from src.models.service import get_module
from src.stats.exceptions import (
    ChannelCountMismatchException,
    EmptyAccumulationException,
    MissingChannelGateException,
    TableNotFinalizedException,
    UnknownScoreLayerException,
)
from src.stats.schemas import ScoreTableDocument
from src.utils import format_float, sha256_digest

logger = get_logger(__name__)


class ScoreTable:
    """Per-layer, per-channel importance scores with a deterministic ranking."""

    def __init__(
        self,
        scorer: str,
        scores: dict[str, np.ndarray] | None = None,
        sample_counts: dict[str, int] | None = None,
    ):
        self.scorer = scorer
        self._sample_counts = dict(sample_counts or {})
        self.scores: dict[str, np.ndarray] = {
            layer: np.asarray(values, dtype=np.float64).reshape(-1) for layer, values in (scores or {}).items()
        }

    @property
    def layers(self) -> list[str]:
        return list(self.scores)

    def get(self, layer_id: str) -> np.ndarray:
        if layer_id not in self.scores:
            raise UnknownScoreLayerException(layer_id)
        return self.scores[layer_id]

    def ranking(self, layer_id: str) -> np.ndarray:
        """Channel indices by ascending score; ties keep ascending channel index."""
        return np.argsort(self.get(layer_id), kind="stable")

    def sample_counts(self) -> dict[str, int]:
        return dict(self._sample_counts)

    def to_document(self) -> ScoreTableDocument:
        return ScoreTableDocument(
            scorer=self.scorer,
            sample_counts=self.sample_counts(),
            layers={
                layer: [(index, format_float(value)) for index, value in enumerate(values)]
                for layer, values in self.scores.items()
            },
        )

    def digest(self) -> str:
        return sha256_digest(self.to_document().model_dump(mode="json"))

    def save(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_document().model_dump_json(indent=2))
        return path

    @classmethod
    def from_document(cls, document: ScoreTableDocument) -> "ScoreTable":
        scores = {}
        for layer, entries in document.layers.items():
            values = np.zeros(len(entries), dtype=np.float64)
            for index, rendered in entries:
                values[index] = float(rendered)
            scores[layer] = values
        return ScoreTable(document.scorer, scores, document.sample_counts)

    @classmethod
    def load(cls, path: Path) -> "ScoreTable":
        return cls.from_document(ScoreTableDocument.model_validate_json(path.read_text()))


class ChannelScaleTable(ScoreTable):
    """Running per-channel sums of channel attention weights.

    Every sample of every batch is added individually into float64 sums, so
    the finalized mean is exact for any batch size. Scores are only available
    after ``finalize``.
    """

    def __init__(self, layer_channels: dict[str, int], scorer: str = "cpsca", retain_samples: bool = False):
        super().__init__(scorer)
        self.layer_channels = dict(layer_channels)
        self.sums = {layer: np.zeros(c, dtype=np.float64) for layer, c in self.layer_channels.items()}
        self.counts = dict.fromkeys(self.layer_channels, 0)
        self.retain_samples = retain_samples
        self._samples: dict[str, list[np.ndarray]] = {layer: [] for layer in self.layer_channels}
        self.finalized = False

    def accumulate(self, layer_id: str, a_c: Tensor | np.ndarray) -> Self:
        """Add one batch of channel maps (B, C, 1, 1) or (B, C) into a layer's sums."""
        if layer_id not in self.layer_channels:
            raise UnknownScoreLayerException(layer_id)
        if isinstance(a_c, Tensor):
            a_c = a_c.detach().to("cpu", torch.float64).numpy()
        batch = np.asarray(a_c, dtype=np.float64)
        if batch.ndim < 2 or batch.shape[0] < 1:
            raise ChannelCountMismatchException(layer_id, self.layer_channels[layer_id], 0)
        batch = batch.reshape(batch.shape[0], -1)
        if batch.shape[1] != self.layer_channels[layer_id]:
            raise ChannelCountMismatchException(layer_id, self.layer_channels[layer_id], batch.shape[1])

        self.sums[layer_id] += batch.sum(axis=0)
        self.counts[layer_id] += batch.shape[0]
        if self.retain_samples:
            self._samples[layer_id].append(batch.copy())
        self.finalized = False
        return self

    def finalize(self) -> Self:
        """Divide the sums by the sample counts and attach the per-layer ranking."""
        empty = [layer for layer, count in self.counts.items() if count == 0]
        if empty or not self.counts:
            raise EmptyAccumulationException(empty)
        self.scores = {layer: self.sums[layer] / self.counts[layer] for layer in self.layer_channels}
        self.finalized = True
        return self

    def ranking(self, layer_id: str) -> np.ndarray:
        if not self.finalized:
            raise TableNotFinalizedException()
        return super().ranking(layer_id)

    def sample_counts(self) -> dict[str, int]:
        return dict(self.counts)

    def sample_maps(self, layer_id: str) -> np.ndarray:
        """Retained per-sample maps of a layer, shape (N, C)."""
        if layer_id not in self._samples:
            raise UnknownScoreLayerException(layer_id)
        if not self._samples[layer_id]:
            return np.zeros((0, self.layer_channels[layer_id]))
        return np.concatenate(self._samples[layer_id], axis=0)

    def export_samples(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savez_compressed(path, **{layer: self.sample_maps(layer) for layer in self.layer_channels})
        return path


def gated_layers(model: PrunableNetwork, gate_type: type) -> dict[str, object]:
    """Map each prunable layer to the attention block that gates its channels.

    Raises:
        MissingChannelGateException: If a prunable layer has no matching gate
    """
    prunable = [unit.layer_id for unit in model.pruning_units()]
    gates = {}
    for slot in model.attention_slots():
        module = get_module(model, slot.slot_id)
        if isinstance(module, gate_type) and slot.target_id in prunable:
            if isinstance(module, SpatialChannelAttention) and not module.cfg.has_channel:
                continue
            gates[slot.target_id] = module
    missing = [layer for layer in prunable if layer not in gates]
    if missing:
        scorer = "cpse" if gate_type is SqueezeExcite else "cpsca"
        raise MissingChannelGateException(scorer, missing)
    return gates


def collect_channel_scales(
    model: PrunableNetwork,
    batches: Iterable[tuple[Tensor, Tensor]],
    device: torch.device | str = "cpu",
    gate_type: type = SpatialChannelAttention,
    scorer: str = "cpsca",
    retain_samples: bool = False,
) -> ChannelScaleTable:
    """Run a frozen model over a dataset and average every channel gate per channel.

    Args:
        model: Trained model carrying a gate on every prunable layer
        batches: Iterable of (images, labels), typically the un-augmented training split
        device: Device to run on
        gate_type: Attention block class whose channel gates are read
        scorer: Name recorded in the table
        retain_samples: Keep per-sample maps for export

    Returns:
        Finalized ChannelScaleTable
    """
    gates = gated_layers(model, gate_type)
    table = ChannelScaleTable(
        {layer: module.channels for layer, module in gates.items()},
        scorer=scorer,
        retain_samples=retain_samples,
    )

    handles = []
    for layer_id, module in gates.items():

        def hook(_module, _inputs, output, layer_id=layer_id):
            table.accumulate(layer_id, output)

        handles.append(module.gate_probe.register_forward_hook(hook))

    was_training = model.training
    model.eval()
    model.to(device)
    try:
        with torch.no_grad():
            for images, _ in tqdm(batches, desc=f"collect[{scorer}]", leave=False):
                model(images.to(device))
    finally:
        for handle in handles:
            handle.remove()
        model.train(was_training)

    table.finalize()
    logger.info(f"Collected {scorer} channel scales for {len(gates)} layers over {max(table.counts.values())} samples")
    return table

