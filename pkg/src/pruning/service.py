import copy
import math
from collections.abc import Mapping
from pathlib import Path

import torch
from torch import nn

from src.logger import get_logger
from src.models.base import PrunableNetwork
from src.models.service import get_module, has_attention, replace_module
from src.pruning.constants import MIN_SURVIVING_CHANNELS, RATIO_ROUNDING_DIGITS, ViolationCode
from src.pruning.exceptions import InvalidPruningRatioException, PlanValidationException
from src.pruning.schemas import LayerPlan, PlanReport, Provenance, PruningPlan, RatioSchedule, Violation
from src.stats.service import ScoreTable

logger = get_logger(__name__)


def removal_count(ratio: float, channels: int) -> int:
    """floor(ratio * channels), robust to binary representation of the ratio."""
    return math.floor(round(ratio * channels, RATIO_ROUNDING_DIGITS))


def plan_pruning(
    scores: ScoreTable,
    ratios: RatioSchedule | Mapping[str, float] | float,
    layers: list[str] | None = None,
) -> PruningPlan:
    """Select the lowest-scoring channels of every layer.

    Args:
        scores: Finalized score table (any scorer)
        ratios: Uniform ratio, per-layer map, or schedule; layers absent from a map get 0
        layers: Layers to plan for; defaults to every layer of the table

    Returns:
        PruningPlan whose remove sets hold floor(p * C) channels per layer

    Raises:
        InvalidPruningRatioException: If a ratio is outside [0, 1) or would leave no channel
    """
    schedule = _as_schedule(ratios)
    plan_layers: dict[str, LayerPlan] = {}
    for layer_id in layers or scores.layers:
        ratio = schedule.ratio_for(layer_id)
        ranking = scores.ranking(layer_id)
        channels = len(ranking)
        if not 0.0 <= ratio < 1.0:
            raise InvalidPruningRatioException(layer_id, ratio)
        count = removal_count(ratio, channels)
        if channels - count < MIN_SURVIVING_CHANNELS:
            raise InvalidPruningRatioException(layer_id, ratio)
        plan_layers[layer_id] = LayerPlan(
            channels=channels,
            ratio=ratio,
            remove=sorted(int(i) for i in ranking[:count]),
        )

    return PruningPlan(
        layers=plan_layers,
        provenance=Provenance(scorer=scores.scorer, table_digest=scores.digest()),
    )


def validate_plan(model: PrunableNetwork, plan: PruningPlan, strict: bool = True) -> PlanReport:
    """Check a plan against a model without touching either.

    Args:
        model: Network the plan is meant for
        plan: Pruning plan
        strict: Report shortcut-coupled layers as violations instead of ignoring them

    Returns:
        PlanReport listing violations, warnings and surviving channel counts
    """
    report = PlanReport()
    units = {unit.layer_id: unit for unit in model.pruning_units()}
    coupled = set(model.coupled_layers())
    attention = model.spec.attention

    if has_attention(model):
        report.violations.append(
            Violation(layer_id="*", code=ViolationCode.ATTENTION_PRESENT, message="attention blocks must be removed first")
        )

    for layer_id, layer_plan in plan.layers.items():
        if layer_id in coupled:
            if strict:
                report.violations.append(
                    Violation(
                        layer_id=layer_id,
                        code=ViolationCode.RESIDUAL_COUPLING,
                        message="output channels are tied to a shortcut",
                    )
                )
            else:
                report.ignored.append(layer_id)
            continue
        if layer_id not in units:
            report.violations.append(
                Violation(layer_id=layer_id, code=ViolationCode.UNKNOWN_LAYER, message="not a prunable layer")
            )
            continue

        channels = get_module(model, layer_id).out_channels
        if layer_plan.channels != channels:
            report.violations.append(
                Violation(
                    layer_id=layer_id,
                    code=ViolationCode.CHANNEL_MISMATCH,
                    message=f"plan expects {layer_plan.channels} channels, layer has {channels}",
                )
            )
        if any(not 0 <= i < channels for i in layer_plan.remove):
            report.violations.append(
                Violation(layer_id=layer_id, code=ViolationCode.INDEX_OUT_OF_RANGE, message="channel index out of range")
            )
        if len(set(layer_plan.remove)) != len(layer_plan.remove):
            report.violations.append(
                Violation(layer_id=layer_id, code=ViolationCode.DUPLICATE_INDEX, message="channel listed twice")
            )

        survivors = channels - len({i for i in layer_plan.remove if 0 <= i < channels})
        report.survivors[layer_id] = survivors
        if survivors < MIN_SURVIVING_CHANNELS:
            report.violations.append(
                Violation(layer_id=layer_id, code=ViolationCode.EMPTY_LAYER, message="no channel survives")
            )
            continue
        if len(layer_plan.remove) != removal_count(layer_plan.ratio, channels):
            report.warnings.append(
                Violation(
                    layer_id=layer_id,
                    code=ViolationCode.RATIO_MISMATCH,
                    message=f"{len(layer_plan.remove)} channels removed, ratio {layer_plan.ratio} implies "
                    f"{removal_count(layer_plan.ratio, channels)}",
                )
            )
        if not attention.clamp_groups and (survivors % attention.sca.g or survivors % attention.sca.G):
            report.warnings.append(
                Violation(
                    layer_id=layer_id,
                    code=ViolationCode.DIVISIBILITY,
                    message=f"{survivors} survivors not divisible by g={attention.sca.g} and G={attention.sca.G}",
                )
            )

    return report


def apply_plan(model: PrunableNetwork, plan: PruningPlan, strict: bool = True) -> PrunableNetwork:
    """Physically remove planned channels and the matching consumer slices.

    The input model is left untouched; a pruned copy is returned.

    Raises:
        PlanValidationException: If validate_plan reports any violation
    """
    report = validate_plan(model, plan, strict=strict)
    if not report.ok:
        raise PlanValidationException(report)

    result = copy.deepcopy(model)
    units = {unit.layer_id: unit for unit in result.pruning_units()}
    overrides = dict(result.spec.channel_overrides)

    for layer_id, layer_plan in plan.layers.items():
        if layer_id in report.ignored or not layer_plan.remove:
            continue
        unit = units[layer_id]
        removed = set(layer_plan.remove)
        conv = get_module(result, layer_id)
        keep = [i for i in range(conv.out_channels) if i not in removed]

        replace_module(result, layer_id, _slice_conv(conv, out_keep=keep))
        replace_module(result, unit.bn_id, _slice_bn(get_module(result, unit.bn_id), keep))
        for consumer in unit.consumers:
            module = get_module(result, consumer.layer_id)
            if consumer.kind == "conv":
                replace_module(result, consumer.layer_id, _slice_conv(module, in_keep=keep))
            else:
                columns = [c * consumer.spatial + s for c in keep for s in range(consumer.spatial)]
                replace_module(result, consumer.layer_id, _slice_linear(module, columns))
        overrides[layer_id] = len(keep)
        logger.debug(f"Pruned {len(removed)}/{len(keep) + len(removed)} channels of {layer_id}")

    result.spec = result.spec.model_copy(update={"channel_overrides": overrides})
    logger.info(
        f"Applied plan from {plan.provenance.scorer}: "
        f"{sum(len(p.remove) for p in plan.layers.values())} channels removed"
    )
    return result


def save_plan(plan: PruningPlan, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(plan.model_dump_json(indent=2))
    return path


def load_plan(path: Path) -> PruningPlan:
    return PruningPlan.model_validate_json(path.read_text())


def _as_schedule(ratios: RatioSchedule | Mapping[str, float] | float) -> RatioSchedule:
    if isinstance(ratios, RatioSchedule):
        return ratios
    if isinstance(ratios, Mapping):
        for layer_id, ratio in ratios.items():
            if not 0.0 <= ratio < 1.0:
                raise InvalidPruningRatioException(layer_id, ratio)
        return RatioSchedule(layers=dict(ratios))
    if not 0.0 <= ratios < 1.0:
        raise InvalidPruningRatioException("*", ratios)
    return RatioSchedule(default=ratios)


def _index(keep: list[int], device: torch.device) -> torch.Tensor:
    return torch.tensor(keep, dtype=torch.long, device=device)


def _slice_conv(conv: nn.Conv2d, out_keep: list[int] | None = None, in_keep: list[int] | None = None) -> nn.Conv2d:
    weight = conv.weight.detach()
    bias = conv.bias.detach() if conv.bias is not None else None
    if out_keep is not None:
        weight = weight.index_select(0, _index(out_keep, weight.device))
        bias = bias.index_select(0, _index(out_keep, weight.device)) if bias is not None else None
    if in_keep is not None:
        weight = weight.index_select(1, _index(in_keep, weight.device))

    sliced = nn.Conv2d(
        weight.shape[1],
        weight.shape[0],
        kernel_size=conv.kernel_size,
        stride=conv.stride,
        padding=conv.padding,
        dilation=conv.dilation,
        bias=bias is not None,
        padding_mode=conv.padding_mode,
        device=weight.device,
        dtype=weight.dtype,
    )
    with torch.no_grad():
        sliced.weight.copy_(weight)
        if bias is not None:
            sliced.bias.copy_(bias)
    return sliced


def _slice_bn(bn: nn.BatchNorm2d, keep: list[int]) -> nn.BatchNorm2d:
    index = _index(keep, bn.weight.device)
    sliced = nn.BatchNorm2d(
        len(keep),
        eps=bn.eps,
        momentum=bn.momentum,
        affine=bn.affine,
        track_running_stats=bn.track_running_stats,
        device=bn.weight.device,
        dtype=bn.weight.dtype,
    )
    with torch.no_grad():
        if bn.affine:
            sliced.weight.copy_(bn.weight.index_select(0, index))
            sliced.bias.copy_(bn.bias.index_select(0, index))
        if bn.track_running_stats:
            sliced.running_mean.copy_(bn.running_mean.index_select(0, index))
            sliced.running_var.copy_(bn.running_var.index_select(0, index))
            sliced.num_batches_tracked.copy_(bn.num_batches_tracked)
    sliced.train(bn.training)
    return sliced


def _slice_linear(linear: nn.Linear, columns: list[int]) -> nn.Linear:
    weight = linear.weight.detach().index_select(1, _index(columns, linear.weight.device))
    sliced = nn.Linear(
        len(columns),
        linear.out_features,
        bias=linear.bias is not None,
        device=weight.device,
        dtype=weight.dtype,
    )
    with torch.no_grad():
        sliced.weight.copy_(weight)
        if linear.bias is not None:
            sliced.bias.copy_(linear.bias)
    return sliced
