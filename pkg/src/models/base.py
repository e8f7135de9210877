from dataclasses import dataclass, field
from typing import Literal

from torch import nn

from src.models.schemas import ModelSpec


@dataclass(frozen=True)
class Consumer:
    """A layer reading the output channels of a prunable conv."""

    layer_id: str
    kind: Literal["conv", "linear"]
    # Flattened positions per channel when the consumer is a linear layer
    spatial: int = 1


@dataclass(frozen=True)
class PruningUnit:
    """A prunable conv with the BN that normalizes it and every layer consuming it."""

    layer_id: str
    bn_id: str
    consumers: tuple[Consumer, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class AttentionSlot:
    """An identity placeholder that can host an attention block."""

    slot_id: str
    # Conv whose channels the block attends to
    target_id: str
    channels: int


class PrunableNetwork(nn.Module):
    """A backbone that knows its own pruning and attention topology."""

    def __init__(self, spec: ModelSpec):
        super().__init__()
        self.spec = spec

    def pruning_units(self) -> list[PruningUnit]:
        raise NotImplementedError

    def coupled_layers(self) -> list[str]:
        """Convs whose output channels are tied to a shortcut and must keep their width."""
        return []

    def attention_slots(self) -> list[AttentionSlot]:
        raise NotImplementedError

    def width_of(self, layer_id: str, default: int) -> int:
        return self.spec.channel_overrides.get(layer_id, default)
