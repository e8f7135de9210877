from datetime import datetime
from enum import StrEnum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from src.attention.schemas import AttentionConfig, SCAConfig
from src.constants import SCHEMA_VERSION
from src.models.constants import DEFAULT_HEAD_DROPOUT, DEFAULT_VGG_HEAD


class Architecture(StrEnum):
    VGG = "vgg"
    RESNET = "resnet"
    # Sequential conv stack with a user-given layer configuration (toy and desk-scale nets)
    PLAIN = "plain"


class AttentionPlacement(StrEnum):
    """Where attention slots sit inside a residual block."""

    # After the second conv's BN, before the shortcut addition
    RESIDUAL = "residual"
    # After the first conv's BN and ReLU, so every prunable conv has its own map
    PRUNABLE = "prunable"
    BOTH = "both"


class LayerKind(StrEnum):
    CONV = "conv"
    BN = "bn"
    RELU = "relu"
    POOL = "pool"
    LINEAR = "linear"
    RESIDUAL_BLOCK = "residual_block"
    ATTENTION = "attention"
    DROPOUT = "dropout"


class HeadConfig(BaseModel):
    """Classifier head placed after the conv stack."""

    hidden: list[int] = Field(default_factory=lambda: list(DEFAULT_VGG_HEAD))
    dropout: float = Field(DEFAULT_HEAD_DROPOUT, ge=0.0, lt=1.0)

    model_config = ConfigDict(extra="forbid")


class ModelSpec(BaseModel):
    """Everything needed to rebuild a network, including pruned widths."""

    arch: Architecture
    depth: int | None = None
    num_classes: int = Field(10, ge=2)
    attention: AttentionConfig = AttentionConfig()
    placement: AttentionPlacement = AttentionPlacement.RESIDUAL
    head: HeadConfig = HeadConfig()
    # Plain nets only: conv widths and "M" pooling markers
    layers: list[int | Literal["M"]] | None = None
    conv_bias: bool = True
    global_pool: bool = False
    # Prunable layer id -> surviving output channels
    channel_overrides: dict[str, int] = Field(default_factory=dict)

    model_config = ConfigDict(extra="forbid")


class LayerSpec(BaseModel):
    """One entry of the human-readable graph description."""

    id: str
    kind: LayerKind
    in_channels: int = 0
    out_channels: int = 0
    kernel: int = 0
    stride: int = 0
    prunable: bool = False
    attention: SCAConfig | None = None

    model_config = ConfigDict(extra="forbid")


class ResidualEdge(BaseModel):
    block: str
    source: str
    target: str
    shortcut: Literal["identity", "pad"]

    model_config = ConfigDict(extra="forbid")


class GraphDocument(BaseModel):
    schema_version: str = SCHEMA_VERSION
    spec: ModelSpec
    layers: list[LayerSpec]
    residual_edges: list[ResidualEdge] = Field(default_factory=list)

    model_config = ConfigDict(extra="forbid")


class CheckpointManifest(BaseModel):
    schema_version: str = SCHEMA_VERSION
    tag: str
    dataset: str
    epoch: int = Field(0, ge=0)
    seed: int
    config_hash: str
    created_at: datetime = Field(default_factory=datetime.now)

    model_config = ConfigDict(extra="forbid")
