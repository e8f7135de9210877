import platform
import statistics
import time
from collections.abc import Iterable

import torch
from torch import Tensor, nn

from src.attention.modules import is_attention
from src.constants import CIFAR_INPUT_SHAPE
from src.logger import get_logger
from src.metrics.constants import DEFAULT_LATENCY_REPEATS, DEFAULT_LATENCY_WARMUP, MIN_LATENCY_REPEATS
from src.metrics.exceptions import EmptyDatasetException, InvalidLatencyConfigException, ShapeInconsistencyException
from src.metrics.schemas import CostReport, FlopConvention, LatencyReport, LayerCost
from src.models.resnet import RESIDUAL_SHORTCUTS

logger = get_logger(__name__)

_STAT_BUFFERS = ("running_mean", "running_var")


def count_params(model: nn.Module) -> CostReport:
    """Count trainable parameters per layer; attention blocks count as one layer.

    BN running statistics are reported as buffers, not parameters.
    """
    layers = []
    for name, module in _cost_layers(model):
        tensors = module.parameters() if is_attention(module) else module.parameters(recurse=False)
        params = sum(p.numel() for p in tensors)
        buffers = sum(
            b.numel() for key, b in module.named_buffers(recurse=False) if key in _STAT_BUFFERS and b is not None
        )
        if params or buffers:
            layers.append(LayerCost(layer_id=name, kind=_kind(module), params=params, buffers=buffers))
    return _total(layers)


def count_flops(
    model: nn.Module,
    input_shape: tuple[int, ...] = (1, *CIFAR_INPUT_SHAPE),
    convention: FlopConvention | None = None,
) -> CostReport:
    """Count FLOPs of one forward pass with forward hooks.

    Conv and linear layers cost ``mac`` FLOPs per multiply-accumulate (biases are
    free). BN, ReLU and pooling layers and shortcut additions are charged per
    element at the convention's rates. Attention blocks are skipped unless
    ``count_attention`` is set.

    Args:
        model: Network to measure
        input_shape: Probe input shape including the batch dimension
        convention: Counting rates

    Returns:
        CostReport with per-layer FLOPs and the model's parameter totals

    Raises:
        ShapeInconsistencyException: If the probe input does not propagate
    """
    convention = convention or FlopConvention()
    flops: dict[str, int] = {}
    handles = []

    for name, module in _cost_layers(model, include_attention=convention.count_attention):

        def hook(module: nn.Module, inputs: tuple[Tensor, ...], output: Tensor, name: str = name) -> None:
            flops[name] = flops.get(name, 0) + _layer_flops(module, inputs[0], output, convention)

        handles.append(module.register_forward_hook(hook))

    was_training = model.training
    model.eval()
    try:
        parameter = next(model.parameters(), None)
        device = parameter.device if parameter is not None else torch.device("cpu")
        with torch.no_grad():
            model(torch.zeros(input_shape, device=device))
    except RuntimeError as e:
        raise ShapeInconsistencyException(tuple(input_shape), str(e)) from e
    finally:
        for handle in handles:
            handle.remove()
        model.train(was_training)

    params = count_params(model)
    layers = []
    for name, module in _cost_layers(model):
        entry = params.layer(name)
        if entry is None and not flops.get(name):
            continue
        layers.append(
            LayerCost(
                layer_id=name,
                kind=_kind(module),
                params=entry.params if entry else 0,
                buffers=entry.buffers if entry else 0,
                flops=flops.get(name, 0),
            )
        )
    return _total(layers)


def reduction(before: float, after: float) -> float:
    """Fraction of a quantity removed, in percent."""
    return 0.0 if before == 0 else 100.0 * (before - after) / before


def evaluate_accuracy(
    model: nn.Module,
    batches: Iterable[tuple[Tensor, Tensor]],
    device: torch.device | str = "cpu",
) -> float:
    """Top-1 accuracy as a fraction in [0, 1].

    Raises:
        EmptyDatasetException: If the batches hold no sample
    """
    correct = 0
    total = 0
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            for images, labels in batches:
                logits = model(images.to(device))
                correct += (logits.argmax(dim=1).cpu() == labels.cpu()).sum().item()
                total += labels.numel()
    finally:
        model.train(was_training)

    if total == 0:
        raise EmptyDatasetException()
    return correct / total


def measure_latency(
    model: nn.Module,
    input_shape: tuple[int, ...] = (1, *CIFAR_INPUT_SHAPE),
    repeats: int = DEFAULT_LATENCY_REPEATS,
    warmup: int = DEFAULT_LATENCY_WARMUP,
    device: torch.device | str = "cpu",
) -> LatencyReport:
    """Median single-threaded wall-clock forward time in milliseconds."""
    if repeats < MIN_LATENCY_REPEATS:
        raise InvalidLatencyConfigException(repeats, MIN_LATENCY_REPEATS)

    device = torch.device(device)
    threads = torch.get_num_threads()
    torch.set_num_threads(1)
    was_training = model.training
    model.eval().to(device)
    x = torch.randn(input_shape, device=device)
    timings = []
    try:
        with torch.no_grad():
            for _ in range(warmup):
                model(x)
            for _ in range(repeats):
                _synchronize(device)
                start = time.perf_counter()
                model(x)
                _synchronize(device)
                timings.append((time.perf_counter() - start) * 1000.0)
    finally:
        torch.set_num_threads(threads)
        model.train(was_training)

    report = LatencyReport(
        median_ms=statistics.median(timings),
        repeats=repeats,
        warmup=warmup,
        input_shape=list(input_shape),
        device=str(device),
        threads=1,
        torch_version=torch.__version__,
        platform=platform.platform(),
        processor=platform.processor() or platform.machine(),
    )
    logger.debug(f"Latency {report.median_ms:.3f} ms over {repeats} repeats on {report.device}")
    return report


def _synchronize(device: torch.device) -> None:
    if device.type == "cuda":
        torch.cuda.synchronize(device)


def _cost_layers(model: nn.Module, include_attention: bool = True) -> list[tuple[str, nn.Module]]:
    """Leaf layers plus whole attention blocks, in registration order."""
    selected = []
    skip: list[str] = []
    for name, module in model.named_modules():
        if any(name.startswith(prefix) for prefix in skip):
            continue
        if is_attention(module):
            skip.append(f"{name}.")
            if include_attention:
                selected.append((name, module))
        elif not list(module.children()):
            selected.append((name, module))
    return selected


def _layer_flops(module: nn.Module, x: Tensor, output: Tensor, convention: FlopConvention) -> int:
    batch = output.shape[0]
    match module:
        case nn.Conv2d():
            kh, kw = module.kernel_size
            per_output = kh * kw * module.in_channels // module.groups
            return convention.mac * per_output * output.numel() // batch
        case nn.Linear():
            return convention.mac * module.in_features * module.out_features
        case nn.BatchNorm2d() | nn.BatchNorm1d():
            return convention.bn * output.numel() // batch
        case nn.ReLU():
            return convention.relu * output.numel() // batch
        case _ if isinstance(module, RESIDUAL_SHORTCUTS):
            # One addition per element of the block output
            return convention.residual_add * output.numel() // batch
        case nn.MaxPool2d() | nn.AvgPool2d() | nn.AdaptiveAvgPool2d() | nn.AdaptiveMaxPool2d():
            return convention.pool * x.numel() // batch
        case _ if is_attention(module):
            # Rough element-wise charge: one multiply per gated element
            return output.numel() // batch
        case _:
            return 0


def _kind(module: nn.Module) -> str:
    return "attention" if is_attention(module) else type(module).__name__.lower()


def _total(layers: list[LayerCost]) -> CostReport:
    return CostReport(
        params=sum(entry.params for entry in layers),
        buffers=sum(entry.buffers for entry in layers),
        flops=sum(entry.flops for entry in layers),
        layers=layers,
    )
