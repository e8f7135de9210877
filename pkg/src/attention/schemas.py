from enum import StrEnum

from pydantic import BaseModel, ConfigDict, Field

from src.attention.constants import (
    DEFAULT_GN_EPS,
    DEFAULT_GN_GROUPS,
    DEFAULT_SE_REDUCTION,
    DEFAULT_SPATIAL_EPS,
    DEFAULT_SPATIAL_GROUPS,
)


class Arrangement(StrEnum):
    """How the spatial and channel submodules are combined."""

    SPATIAL_ONLY = "spatial_only"
    CHANNEL_ONLY = "channel_only"
    SPATIAL_THEN_CHANNEL = "spatial_then_channel"
    CHANNEL_THEN_SPATIAL = "channel_then_spatial"
    PARALLEL = "parallel"


class Pooling(StrEnum):
    """Global descriptors used by a submodule."""

    AVG = "avg"
    MAX = "max"
    BOTH = "both"


class AttentionKind(StrEnum):
    NONE = "none"
    SCA = "sca"
    SE = "se"


class SCAConfig(BaseModel):
    """Structural hyperparameters of one spatial and channel attention block."""

    g: int = Field(DEFAULT_SPATIAL_GROUPS, ge=1, description="Spatial groups")
    G: int = Field(DEFAULT_GN_GROUPS, ge=1, description="Group normalization groups")
    eps_spatial: float = Field(DEFAULT_SPATIAL_EPS, gt=0)
    eps_gn: float = Field(DEFAULT_GN_EPS, gt=0)
    arrangement: Arrangement = Arrangement.SPATIAL_THEN_CHANNEL
    spatial_pooling: Pooling = Pooling.BOTH
    channel_pooling: Pooling = Pooling.BOTH

    model_config = ConfigDict(extra="forbid", frozen=True)

    @property
    def has_spatial(self) -> bool:
        return self.arrangement != Arrangement.CHANNEL_ONLY

    @property
    def has_channel(self) -> bool:
        return self.arrangement != Arrangement.SPATIAL_ONLY


class AttentionConfig(BaseModel):
    """Which attention block a backbone carries and how it is shaped."""

    kind: AttentionKind = AttentionKind.NONE
    sca: SCAConfig = SCAConfig()
    se_reduction: int = Field(DEFAULT_SE_REDUCTION, ge=1)
    # Narrow layers use gcd(groups, channels) instead of failing
    clamp_groups: bool = True

    model_config = ConfigDict(extra="forbid", frozen=True)
