import torch
from torch import Tensor, nn

from src.attention.modules import build_attention
from src.models.base import AttentionSlot, Consumer, PrunableNetwork, PruningUnit
from src.models.constants import INPUT_CHANNELS, INPUT_RESOLUTION, POOL
from src.models.exceptions import InvalidLayerConfigException
from src.models.schemas import ModelSpec


class ConvBlock(nn.Module):
    """conv -> BN -> ReLU -> attention slot."""

    def __init__(self, in_channels: int, out_channels: int, bias: bool):
        super().__init__()
        self.conv = nn.Conv2d(in_channels, out_channels, kernel_size=3, padding=1, bias=bias)
        self.bn = nn.BatchNorm2d(out_channels)
        self.relu = nn.ReLU(inplace=True)
        self.attn: nn.Module = nn.Identity()

    def forward(self, x: Tensor) -> Tensor:
        return self.attn(self.relu(self.bn(self.conv(x))))


class CifarVGG(PrunableNetwork):
    """VGG-style conv stack for 32x32 inputs, also used for plain toy nets."""

    def __init__(self, spec: ModelSpec, layers: list[int | str]):
        super().__init__(spec)
        if not any(isinstance(v, int) for v in layers):
            raise InvalidLayerConfigException("at least one conv layer is required")

        features: list[nn.Module] = []
        in_channels = INPUT_CHANNELS
        resolution = INPUT_RESOLUTION
        for index, value in enumerate(layers):
            if value == POOL:
                if resolution < 2:
                    raise InvalidLayerConfigException("too many pooling stages for a 32x32 input")
                features.append(nn.MaxPool2d(kernel_size=2, stride=2))
                resolution //= 2
                continue
            if not isinstance(value, int) or value < 1:
                raise InvalidLayerConfigException(f"invalid width {value!r} at position {index}")
            width = self.width_of(f"features.{index}.conv", value)
            block = ConvBlock(in_channels, width, bias=spec.conv_bias)
            block.attn = build_attention(width, spec.attention)
            features.append(block)
            in_channels = width
        self.features = nn.Sequential(*features)

        if spec.global_pool:
            self.pool: nn.Module = nn.AdaptiveAvgPool2d(1)
            self.flatten_spatial = 1
        else:
            self.pool = nn.Identity()
            self.flatten_spatial = resolution * resolution

        head: list[nn.Module] = []
        features_in = in_channels * self.flatten_spatial
        for hidden in spec.head.hidden:
            head += [nn.Linear(features_in, hidden), nn.ReLU(inplace=True), nn.Dropout(spec.head.dropout)]
            features_in = hidden
        head.append(nn.Linear(features_in, spec.num_classes))
        self.classifier = nn.Sequential(*head)

        self._init_weights()

    def forward(self, x: Tensor) -> Tensor:
        x = self.pool(self.features(x))
        return self.classifier(torch.flatten(x, 1))

    def _conv_blocks(self) -> list[tuple[int, ConvBlock]]:
        return [(i, m) for i, m in enumerate(self.features) if isinstance(m, ConvBlock)]

    def pruning_units(self) -> list[PruningUnit]:
        blocks = self._conv_blocks()
        units = []
        for position, (index, _) in enumerate(blocks):
            if position + 1 < len(blocks):
                consumer = Consumer(f"features.{blocks[position + 1][0]}.conv", "conv")
            else:
                consumer = Consumer("classifier.0", "linear", spatial=self.flatten_spatial)
            units.append(PruningUnit(f"features.{index}.conv", f"features.{index}.bn", (consumer,)))
        return units

    def attention_slots(self) -> list[AttentionSlot]:
        return [
            AttentionSlot(f"features.{index}.attn", f"features.{index}.conv", block.conv.out_channels)
            for index, block in self._conv_blocks()
        ]

    def _init_weights(self) -> None:
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.kaiming_normal_(m.weight, mode="fan_out", nonlinearity="relu")
                if m.bias is not None:
                    nn.init.zeros_(m.bias)
            elif isinstance(m, nn.BatchNorm2d):
                nn.init.ones_(m.weight)
                nn.init.zeros_(m.bias)
            elif isinstance(m, nn.Linear):
                nn.init.normal_(m.weight, 0, 0.01)
                nn.init.zeros_(m.bias)
