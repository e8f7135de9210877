from torch import Tensor, nn

from src.attention.schemas import AttentionConfig, AttentionKind, SCAConfig
from src.attention.service import init_params, resolve_groups, sca_forward


class SpatialChannelAttention(nn.Module):
    """Insertable spatial and channel attention block.

    The channel map is routed through ``gate_probe`` (an identity) so that a
    forward hook on it observes one weight per channel per sample.
    """

    def __init__(self, channels: int, cfg: SCAConfig, clamp_groups: bool = True):
        super().__init__()
        self.channels = channels
        self.cfg = resolve_groups(channels, cfg, clamp=clamp_groups)
        self.params = init_params(channels, self.cfg)
        self.gate_probe = nn.Identity()

    def forward(self, x: Tensor) -> Tensor:
        x_out, a_c = sca_forward(x, self.params, self.cfg)
        self.gate_probe(a_c)
        return x_out

    def extra_repr(self) -> str:
        return f"g={self.cfg.g}, G={self.cfg.G}, arrangement={self.cfg.arrangement.value}"


class SqueezeExcite(nn.Module):
    """Squeeze-and-excitation gate with a two-layer bottleneck.

    Args:
        channels: Channel count of the host layer
        reduction: Bottleneck reduction ratio
    """

    def __init__(self, channels: int, reduction: int = 16):
        super().__init__()
        squeezed = max(1, channels // reduction)
        self.channels = channels
        self.squeeze = nn.AdaptiveAvgPool2d(1)
        self.reduce = nn.Sequential(nn.Conv2d(channels, squeezed, kernel_size=1), nn.ReLU(inplace=True))
        self.expand = nn.Sequential(nn.Conv2d(squeezed, channels, kernel_size=1), nn.Sigmoid())
        self.gate_probe = nn.Identity()

    def forward(self, x: Tensor) -> Tensor:
        gate = self.expand(self.reduce(self.squeeze(x)))
        self.gate_probe(gate)
        return x * gate


ATTENTION_MODULES = (SpatialChannelAttention, SqueezeExcite)


def build_attention(channels: int, cfg: AttentionConfig) -> nn.Module:
    """Create the attention block requested by a config, or an identity slot.

    Args:
        channels: Channel count of the host layer
        cfg: Attention configuration

    Returns:
        nn.Module to place in an attention slot
    """
    match cfg.kind:
        case AttentionKind.SCA:
            return SpatialChannelAttention(channels, cfg.sca, clamp_groups=cfg.clamp_groups)
        case AttentionKind.SE:
            return SqueezeExcite(channels, cfg.se_reduction)
        case _:
            return nn.Identity()


def is_attention(module: nn.Module) -> bool:
    return isinstance(module, ATTENTION_MODULES)
