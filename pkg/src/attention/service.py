"""Spatial and channel attention operations.

All operations are pure functions of (feature map, parameters, config). The
parameters live in an ``SCAParams`` module so that optimizers and state dicts
see them; the functions never mutate them.
"""

import math

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from src.attention.constants import AFFINE_SCALE_INIT, AFFINE_SHIFT_INIT
from src.attention.exceptions import (
    FeatureMapShapeException,
    GroupDivisibilityException,
    NonFiniteInputException,
    ParameterShapeException,
)
from src.attention.schemas import Arrangement, Pooling, SCAConfig


class SCAParams(nn.Module):
    """Learnable affine terms of one attention block.

    Spatial affine pairs are per group (length g), group-normalization affine
    pairs are per channel (length C), one pair for the average-pooled branch and
    one for the max-pooled branch. Terms of absent submodules or branches are
    registered as ``None``.
    """

    def __init__(self, channels: int, cfg: SCAConfig):
        super().__init__()
        self.channels = channels
        self.groups = cfg.g

        if cfg.has_spatial:
            self.spatial_scale = nn.Parameter(torch.full((cfg.g,), AFFINE_SCALE_INIT))
            self.spatial_shift = nn.Parameter(torch.full((cfg.g,), AFFINE_SHIFT_INIT))
        else:
            self.register_parameter("spatial_scale", None)
            self.register_parameter("spatial_shift", None)

        uses_avg = cfg.has_channel and cfg.channel_pooling in (Pooling.AVG, Pooling.BOTH)
        uses_max = cfg.has_channel and cfg.channel_pooling in (Pooling.MAX, Pooling.BOTH)
        for branch, used in (("avg", uses_avg), ("max", uses_max)):
            if used:
                self.register_parameter(
                    f"gn_{branch}_weight", nn.Parameter(torch.full((channels,), AFFINE_SCALE_INIT))
                )
                self.register_parameter(
                    f"gn_{branch}_bias", nn.Parameter(torch.full((channels,), AFFINE_SHIFT_INIT))
                )
            else:
                self.register_parameter(f"gn_{branch}_weight", None)
                self.register_parameter(f"gn_{branch}_bias", None)

    def extra_repr(self) -> str:
        return f"channels={self.channels}, groups={self.groups}"


def resolve_groups(channels: int, cfg: SCAConfig, clamp: bool = True) -> SCAConfig:
    """Fit the group counts of a config to a host layer.

    Args:
        channels: Channel count of the host layer
        cfg: Requested configuration
        clamp: Replace a non-dividing group count by gcd(groups, channels)

    Returns:
        Configuration whose g and G divide ``channels``

    Raises:
        GroupDivisibilityException: If clamping is off and a count does not divide
    """
    if not clamp:
        _check_divisibility(channels, cfg)
        return cfg
    return cfg.model_copy(update={"g": math.gcd(cfg.g, channels), "G": math.gcd(cfg.G, channels)})


def init_params(channels: int, cfg: SCAConfig) -> SCAParams:
    """Create identity-initialized attention parameters for a layer.

    Args:
        channels: Channel count of the host layer
        cfg: Attention configuration

    Returns:
        SCAParams with scales set to 1 and shifts set to 0

    Raises:
        GroupDivisibilityException: If g or G does not divide ``channels``
    """
    if channels < 1:
        raise FeatureMapShapeException((channels,))
    _check_divisibility(channels, cfg)
    return SCAParams(channels, cfg)


def spatial_attention_forward(x: Tensor, params: SCAParams, cfg: SCAConfig) -> tuple[Tensor, Tensor]:
    """Compute the per-group spatial attention map and the spatially refined features.

    Each group's positions are compared with the group's pooled global
    descriptor by a dot product, the similarities are standardized over the
    H*W positions, passed through the per-group affine and squashed by a
    sigmoid.

    Args:
        x: Feature map of shape (B, C, H, W)
        params: Attention parameters sized for C
        cfg: Attention configuration

    Returns:
        Tuple of (a_s with shape (B, g, H, W), x_s with the shape of x)
    """
    _check_feature_map(x, "spatial")
    b, c, h, w = x.shape
    g = cfg.g
    if c % g:
        raise GroupDivisibilityException(c, g, "g")
    _check_parameter("spatial_scale", params.spatial_scale, g)

    grouped = x.reshape(b, g, c // g, h, w)
    descriptor = _global_descriptor(grouped, cfg.spatial_pooling)
    similarity = (descriptor * grouped).sum(dim=2).reshape(b, g, h * w)

    mean = similarity.mean(dim=-1, keepdim=True)
    var = similarity.var(dim=-1, correction=0, keepdim=True)
    # Clamp keeps the sqrt differentiable on constant groups
    std = var.clamp_min(torch.finfo(var.dtype).tiny).sqrt()
    normalized = ((similarity - mean) / (std + cfg.eps_spatial)).reshape(b, g, h, w)

    normalized = normalized * params.spatial_scale.view(1, g, 1, 1) + params.spatial_shift.view(1, g, 1, 1)
    a_s = _open_sigmoid(normalized)
    x_s = (grouped * a_s.unsqueeze(2)).reshape(b, c, h, w)
    return a_s, x_s


def channel_attention_forward(x_s: Tensor, params: SCAParams, cfg: SCAConfig) -> tuple[Tensor, Tensor]:
    """Compute the channel attention map and the channel refined features.

    Args:
        x_s: Feature map of shape (B, C, H, W)
        params: Attention parameters sized for C
        cfg: Attention configuration

    Returns:
        Tuple of (a_c with shape (B, C, 1, 1), x_out with the shape of x_s)
    """
    _check_feature_map(x_s, "channel")
    c = x_s.shape[1]
    if c % cfg.G:
        raise GroupDivisibilityException(c, cfg.G, "G")

    logits = torch.zeros((x_s.shape[0], c, 1, 1), dtype=x_s.dtype, device=x_s.device)
    if cfg.channel_pooling in (Pooling.AVG, Pooling.BOTH):
        _check_parameter("gn_avg_weight", params.gn_avg_weight, c)
        pooled = x_s.mean(dim=(2, 3), keepdim=True)
        logits = logits + _pooled_group_norm(pooled, cfg, params.gn_avg_weight, params.gn_avg_bias)
    if cfg.channel_pooling in (Pooling.MAX, Pooling.BOTH):
        _check_parameter("gn_max_weight", params.gn_max_weight, c)
        pooled = x_s.amax(dim=(2, 3), keepdim=True)
        logits = logits + _pooled_group_norm(pooled, cfg, params.gn_max_weight, params.gn_max_bias)

    a_c = _open_sigmoid(logits)
    return a_c, x_s * a_c


def sca_forward(x: Tensor, params: SCAParams, cfg: SCAConfig) -> tuple[Tensor, Tensor]:
    """Apply the attention block in the configured arrangement.

    Args:
        x: Feature map of shape (B, C, H, W)
        params: Attention parameters sized for C
        cfg: Attention configuration

    Returns:
        Tuple of (x_out with the shape of x, a_c with shape (B, C, 1, 1)); a_c is
        all ones when the arrangement has no channel submodule
    """
    match cfg.arrangement:
        case Arrangement.SPATIAL_ONLY:
            _, x_out = spatial_attention_forward(x, params, cfg)
            a_c = torch.ones((x.shape[0], x.shape[1], 1, 1), dtype=x.dtype, device=x.device)
        case Arrangement.CHANNEL_ONLY:
            a_c, x_out = channel_attention_forward(x, params, cfg)
        case Arrangement.SPATIAL_THEN_CHANNEL:
            _, x_s = spatial_attention_forward(x, params, cfg)
            a_c, x_out = channel_attention_forward(x_s, params, cfg)
        case Arrangement.CHANNEL_THEN_SPATIAL:
            a_c, x_c = channel_attention_forward(x, params, cfg)
            _, x_out = spatial_attention_forward(x_c, params, cfg)
        case Arrangement.PARALLEL:
            _, x_s = spatial_attention_forward(x, params, cfg)
            a_c, _ = channel_attention_forward(x, params, cfg)
            x_out = x_s * a_c
    return x_out, a_c


def _pooled_group_norm(pooled: Tensor, cfg: SCAConfig, weight: Tensor, bias: Tensor) -> Tensor:
    # Affine applied outside the fused kernel so a zero-variance group yields exactly its shift
    c = pooled.shape[1]
    standardized = F.group_norm(pooled, cfg.G, eps=cfg.eps_gn)
    return standardized * weight.view(1, c, 1, 1) + bias.view(1, c, 1, 1)


def _open_sigmoid(logits: Tensor) -> Tensor:
    """Sigmoid whose output stays strictly inside (0, 1) in the tensor's dtype."""
    bound = -math.log(torch.finfo(logits.dtype).eps)
    return torch.sigmoid(logits.clamp(-bound, bound))


def _global_descriptor(grouped: Tensor, pooling: Pooling) -> Tensor:
    avg = grouped.mean(dim=(-2, -1), keepdim=True)
    if pooling == Pooling.AVG:
        return avg
    peak = grouped.amax(dim=(-2, -1), keepdim=True)
    if pooling == Pooling.MAX:
        return peak
    # f_avg.P + f_max.P
    return avg + peak


def _check_divisibility(channels: int, cfg: SCAConfig) -> None:
    if cfg.has_spatial and channels % cfg.g:
        raise GroupDivisibilityException(channels, cfg.g, "g")
    if cfg.has_channel and channels % cfg.G:
        raise GroupDivisibilityException(channels, cfg.G, "G")


def _check_feature_map(x: Tensor, submodule: str) -> None:
    if x.dim() != 4 or x.shape[1] < 1 or x.shape[2] * x.shape[3] < 1:
        raise FeatureMapShapeException(tuple(x.shape))
    if not torch.isfinite(x).all():
        raise NonFiniteInputException(submodule)


def _check_parameter(name: str, value: Tensor | None, expected: int) -> None:
    actual = 0 if value is None else value.numel()
    if actual != expected:
        raise ParameterShapeException(name, expected, actual)
