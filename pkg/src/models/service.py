import copy

from torch import nn

from src.attention.modules import build_attention, is_attention
from src.attention.schemas import AttentionConfig, AttentionKind
from src.logger import get_logger
from src.models.base import PrunableNetwork
from src.models.constants import DEFAULT_VGG_HEAD, VGG_CONFIGS
from src.models.exceptions import UnknownLayerException, UnsupportedDepthException
from src.models.resnet import BasicBlock, ChannelPadShortcut, CifarResNet
from src.models.schemas import (
    Architecture,
    AttentionPlacement,
    GraphDocument,
    HeadConfig,
    LayerKind,
    LayerSpec,
    ModelSpec,
    ResidualEdge,
)
from src.models.vgg import CifarVGG

logger = get_logger(__name__)


def build_vgg(
    depth: int,
    num_classes: int = 10,
    attention: AttentionConfig | AttentionKind = AttentionKind.NONE,
    head: HeadConfig | None = None,
) -> CifarVGG:
    """Build a CIFAR VGG with BN after every conv.

    Args:
        depth: 16 or 19
        num_classes: Classifier outputs
        attention: Attention block appended after every conv block
        head: Classifier head; defaults to the calibrated 4096-wide head

    Returns:
        CifarVGG instance

    Raises:
        UnsupportedDepthException: If depth is not 16 or 19
    """
    spec = ModelSpec(
        arch=Architecture.VGG,
        depth=depth,
        num_classes=num_classes,
        attention=_as_attention_config(attention),
        head=head or HeadConfig(hidden=list(DEFAULT_VGG_HEAD)),
    )
    return build_model(spec)


def build_resnet(
    depth: int,
    num_classes: int = 10,
    attention: AttentionConfig | AttentionKind = AttentionKind.NONE,
    placement: AttentionPlacement = AttentionPlacement.RESIDUAL,
) -> CifarResNet:
    """Build a CIFAR ResNet with basic blocks.

    Args:
        depth: Total depth, (depth - 2) divisible by 6 (20, 56, 110, ...)
        num_classes: Classifier outputs
        attention: Attention block inserted into every residual block
        placement: Which slot of each block receives the attention block

    Returns:
        CifarResNet instance

    Raises:
        UnsupportedDepthException: If (depth - 2) is not a positive multiple of 6
    """
    spec = ModelSpec(
        arch=Architecture.RESNET,
        depth=depth,
        num_classes=num_classes,
        attention=_as_attention_config(attention),
        placement=placement,
    )
    return build_model(spec)


def build_plain(
    layers: list[int | str],
    num_classes: int = 10,
    attention: AttentionConfig | AttentionKind = AttentionKind.NONE,
    conv_bias: bool = True,
    global_pool: bool = True,
    hidden: list[int] | None = None,
) -> CifarVGG:
    """Build a small sequential conv net (conv-BN-ReLU blocks, "M" for 2x2 max pooling)."""
    spec = ModelSpec(
        arch=Architecture.PLAIN,
        num_classes=num_classes,
        attention=_as_attention_config(attention),
        layers=layers,
        conv_bias=conv_bias,
        global_pool=global_pool,
        head=HeadConfig(hidden=hidden or [], dropout=0.0),
    )
    return build_model(spec)


def build_model(spec: ModelSpec) -> PrunableNetwork:
    """Build any supported backbone from its spec, honouring pruned widths."""
    match spec.arch:
        case Architecture.VGG:
            if spec.depth not in VGG_CONFIGS:
                raise UnsupportedDepthException(spec.arch, spec.depth)
            model: PrunableNetwork = CifarVGG(spec, VGG_CONFIGS[spec.depth])
        case Architecture.RESNET:
            if spec.depth is None or spec.depth < 8 or (spec.depth - 2) % 6:
                raise UnsupportedDepthException(spec.arch, spec.depth)
            model = CifarResNet(spec, (spec.depth - 2) // 6)
        case Architecture.PLAIN:
            model = CifarVGG(spec, list(spec.layers or []))
    logger.debug(f"Built {spec.arch.value}{spec.depth or ''} with attention={spec.attention.kind.value}")
    return model


def insert_attention(model: PrunableNetwork, attention: AttentionConfig | AttentionKind) -> PrunableNetwork:
    """Return a copy of the model with an attention block in every slot.

    Backbone parameters are copied untouched; only the slots change.
    """
    cfg = _as_attention_config(attention)
    result = copy.deepcopy(model)
    for slot in result.attention_slots():
        replace_module(result, slot.slot_id, build_attention(slot.channels, cfg))
    result.spec = result.spec.model_copy(update={"attention": cfg})
    return result


def remove_attention(model: PrunableNetwork) -> PrunableNetwork:
    """Return a copy of the model with every attention block replaced by an identity.

    All remaining parameters and buffers are preserved bit-exactly.
    """
    result = copy.deepcopy(model)
    names = [name for name, module in result.named_modules() if is_attention(module)]
    for name in names:
        replace_module(result, name, nn.Identity())
    result.spec = result.spec.model_copy(
        update={"attention": result.spec.attention.model_copy(update={"kind": AttentionKind.NONE})}
    )
    if names:
        logger.info(f"Removed {len(names)} attention blocks")
    return result


def has_attention(model: nn.Module) -> bool:
    return any(is_attention(m) for m in model.modules())


def get_module(model: nn.Module, name: str) -> nn.Module:
    try:
        return model.get_submodule(name)
    except AttributeError as e:
        raise UnknownLayerException(name) from e


def replace_module(model: nn.Module, name: str, module: nn.Module) -> None:
    """Swap the submodule at a dotted path."""
    parent_name, _, child = name.rpartition(".")
    parent = get_module(model, parent_name) if parent_name else model
    if not hasattr(parent, child):
        raise UnknownLayerException(name)
    setattr(parent, child, module)


def describe_model(model: PrunableNetwork) -> GraphDocument:
    """Describe a network as an ordered layer list plus residual edges."""
    prunable = {unit.layer_id for unit in model.pruning_units()}
    layers: list[LayerSpec] = []
    edges: list[ResidualEdge] = []
    skip_prefixes: list[str] = []

    for name, module in model.named_modules():
        if not name or any(name.startswith(prefix) for prefix in skip_prefixes):
            continue
        if is_attention(module):
            skip_prefixes.append(f"{name}.")
            channels = module.channels
            layers.append(
                LayerSpec(
                    id=name,
                    kind=LayerKind.ATTENTION,
                    in_channels=channels,
                    out_channels=channels,
                    attention=getattr(module, "cfg", None),
                )
            )
        elif isinstance(module, nn.Conv2d):
            layers.append(
                LayerSpec(
                    id=name,
                    kind=LayerKind.CONV,
                    in_channels=module.in_channels,
                    out_channels=module.out_channels,
                    kernel=module.kernel_size[0],
                    stride=module.stride[0],
                    prunable=name in prunable,
                )
            )
        elif isinstance(module, nn.BatchNorm2d):
            layers.append(
                LayerSpec(id=name, kind=LayerKind.BN, in_channels=module.num_features, out_channels=module.num_features)
            )
        elif isinstance(module, nn.ReLU):
            layers.append(LayerSpec(id=name, kind=LayerKind.RELU))
        elif isinstance(module, nn.MaxPool2d | nn.AdaptiveAvgPool2d):
            kernel = module.kernel_size if isinstance(module, nn.MaxPool2d) else 0
            layers.append(LayerSpec(id=name, kind=LayerKind.POOL, kernel=int(kernel), stride=int(kernel)))
        elif isinstance(module, nn.Linear):
            layers.append(
                LayerSpec(id=name, kind=LayerKind.LINEAR, in_channels=module.in_features, out_channels=module.out_features)
            )
        elif isinstance(module, nn.Dropout):
            layers.append(LayerSpec(id=name, kind=LayerKind.DROPOUT))
        elif isinstance(module, BasicBlock):
            layers.append(
                LayerSpec(
                    id=name,
                    kind=LayerKind.RESIDUAL_BLOCK,
                    in_channels=module.conv1.in_channels,
                    out_channels=module.conv2.out_channels,
                    stride=module.conv1.stride[0],
                )
            )
            shortcut = "pad" if isinstance(module.shortcut, ChannelPadShortcut) else "identity"
            edges.append(ResidualEdge(block=name, source=f"{name}.conv1", target=f"{name}.relu2", shortcut=shortcut))

    return GraphDocument(spec=model.spec, layers=layers, residual_edges=edges)


def _as_attention_config(attention: AttentionConfig | AttentionKind) -> AttentionConfig:
    if isinstance(attention, AttentionConfig):
        return attention
    return AttentionConfig(kind=AttentionKind(attention))
