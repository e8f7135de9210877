from src.attention.modules import SpatialChannelAttention, SqueezeExcite, build_attention, is_attention
from src.attention.schemas import Arrangement, AttentionConfig, AttentionKind, Pooling, SCAConfig
from src.attention.service import (
    SCAParams,
    channel_attention_forward,
    init_params,
    resolve_groups,
    sca_forward,
    spatial_attention_forward,
)

__all__ = [
    "Arrangement",
    "AttentionConfig",
    "AttentionKind",
    "Pooling",
    "SCAConfig",
    "SCAParams",
    "SpatialChannelAttention",
    "SqueezeExcite",
    "build_attention",
    "channel_attention_forward",
    "init_params",
    "is_attention",
    "resolve_groups",
    "sca_forward",
    "spatial_attention_forward",
]
