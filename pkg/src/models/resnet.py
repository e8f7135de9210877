import torch.nn.functional as F
from torch import Tensor, nn

from src.attention.modules import build_attention
from src.models.base import AttentionSlot, Consumer, PrunableNetwork, PruningUnit
from src.models.constants import INPUT_CHANNELS, RESNET_STAGE_WIDTHS, RESNET_STEM_WIDTH
from src.models.schemas import AttentionPlacement, ModelSpec


class ChannelPadShortcut(nn.Module):
    """Parameter-free shortcut: subsample spatially and zero-pad the new channels."""

    def __init__(self, in_channels: int, out_channels: int, stride: int):
        super().__init__()
        self.stride = stride
        extra = out_channels - in_channels
        self.pad = (extra // 2, extra - extra // 2)

    def forward(self, x: Tensor) -> Tensor:
        x = x[:, :, :: self.stride, :: self.stride]
        return F.pad(x, (0, 0, 0, 0, self.pad[0], self.pad[1]))


class IdentityShortcut(nn.Identity):
    """Shortcut of blocks that keep their shape."""


RESIDUAL_SHORTCUTS = (IdentityShortcut, ChannelPadShortcut)


class BasicBlock(nn.Module):
    """Two 3x3 convs with attention slots after the inner and the residual branch."""

    def __init__(self, in_channels: int, mid_channels: int, out_channels: int, stride: int):
        super().__init__()
        self.conv1 = nn.Conv2d(in_channels, mid_channels, kernel_size=3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(mid_channels)
        self.relu1 = nn.ReLU(inplace=True)
        self.attn_inner: nn.Module = nn.Identity()
        self.conv2 = nn.Conv2d(mid_channels, out_channels, kernel_size=3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_channels)
        self.attn: nn.Module = nn.Identity()
        if stride != 1 or in_channels != out_channels:
            self.shortcut: nn.Module = ChannelPadShortcut(in_channels, out_channels, stride)
        else:
            self.shortcut = IdentityShortcut()
        self.relu2 = nn.ReLU(inplace=True)

    def forward(self, x: Tensor) -> Tensor:
        out = self.attn_inner(self.relu1(self.bn1(self.conv1(x))))
        out = self.attn(self.bn2(self.conv2(out)))
        return self.relu2(out + self.shortcut(x))


class CifarResNet(PrunableNetwork):
    """CIFAR ResNet with three stages of basic blocks (widths 16/32/64)."""

    def __init__(self, spec: ModelSpec, blocks_per_stage: int):
        super().__init__(spec)
        self.conv1 = nn.Conv2d(INPUT_CHANNELS, RESNET_STEM_WIDTH, kernel_size=3, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(RESNET_STEM_WIDTH)
        self.relu = nn.ReLU(inplace=True)

        in_channels = RESNET_STEM_WIDTH
        for stage, width in enumerate(RESNET_STAGE_WIDTHS, start=1):
            blocks = []
            for index in range(blocks_per_stage):
                stride = 2 if stage > 1 and index == 0 else 1
                mid = self.width_of(f"layer{stage}.{index}.conv1", width)
                blocks.append(BasicBlock(in_channels, mid, width, stride))
                in_channels = width
            self.add_module(f"layer{stage}", nn.Sequential(*blocks))

        self.avgpool = nn.AdaptiveAvgPool2d(1)
        self.fc = nn.Linear(in_channels, spec.num_classes)
        self._init_weights()

        placement = spec.placement
        for block in self._blocks().values():
            if placement in (AttentionPlacement.PRUNABLE, AttentionPlacement.BOTH):
                block.attn_inner = build_attention(block.conv1.out_channels, spec.attention)
            if placement in (AttentionPlacement.RESIDUAL, AttentionPlacement.BOTH):
                block.attn = build_attention(block.conv2.out_channels, spec.attention)

    def forward(self, x: Tensor) -> Tensor:
        x = self.relu(self.bn1(self.conv1(x)))
        x = self.layer3(self.layer2(self.layer1(x)))
        x = self.avgpool(x)
        return self.fc(x.flatten(1))

    def _blocks(self) -> dict[str, BasicBlock]:
        return {name: m for name, m in self.named_modules() if isinstance(m, BasicBlock)}

    def pruning_units(self) -> list[PruningUnit]:
        return [
            PruningUnit(f"{name}.conv1", f"{name}.bn1", (Consumer(f"{name}.conv2", "conv"),))
            for name in self._blocks()
        ]

    def coupled_layers(self) -> list[str]:
        return ["conv1"] + [f"{name}.conv2" for name in self._blocks()]

    def attention_slots(self) -> list[AttentionSlot]:
        slots = []
        placement = self.spec.placement
        for name, block in self._blocks().items():
            if placement in (AttentionPlacement.PRUNABLE, AttentionPlacement.BOTH):
                slots.append(AttentionSlot(f"{name}.attn_inner", f"{name}.conv1", block.conv1.out_channels))
            if placement in (AttentionPlacement.RESIDUAL, AttentionPlacement.BOTH):
                slots.append(AttentionSlot(f"{name}.attn", f"{name}.conv2", block.conv2.out_channels))
        return slots

    def _init_weights(self) -> None:
        for m in self.modules():
            if isinstance(m, nn.Conv2d):
                nn.init.kaiming_normal_(m.weight, mode="fan_out", nonlinearity="relu")
            elif isinstance(m, nn.BatchNorm2d):
                nn.init.ones_(m.weight)
                nn.init.zeros_(m.bias)
