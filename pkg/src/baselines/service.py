from collections.abc import Iterable

import torch
from torch import Tensor, nn

from src.attention.modules import SpatialChannelAttention, SqueezeExcite
from src.baselines.constants import Scorer
from src.baselines.exceptions import MissingBatchNormException
from src.logger import get_logger
from src.models.base import PrunableNetwork
from src.models.exceptions import UnknownLayerException
from src.models.service import get_module
from src.stats.service import ScoreTable, collect_channel_scales

logger = get_logger(__name__)


def l1_scores(model: PrunableNetwork) -> ScoreTable:
    """Score every output channel by the l1-norm of its filter."""
    scores = {}
    for unit in model.pruning_units():
        weight = get_module(model, unit.layer_id).weight.detach().to("cpu", torch.float64)
        scores[unit.layer_id] = weight.abs().flatten(1).sum(dim=1).numpy()
    return ScoreTable(Scorer.L1.value, scores)


def slimming_scores(model: PrunableNetwork) -> ScoreTable:
    """Score every output channel by |gamma| of the BN that follows its conv.

    Raises:
        MissingBatchNormException: If a prunable conv has no affine BN
    """
    scores = {}
    for unit in model.pruning_units():
        try:
            bn = get_module(model, unit.bn_id)
        except UnknownLayerException as e:
            raise MissingBatchNormException(unit.layer_id) from e
        if not isinstance(bn, nn.BatchNorm2d) or bn.weight is None:
            raise MissingBatchNormException(unit.layer_id)
        scores[unit.layer_id] = bn.weight.detach().to("cpu", torch.float64).abs().numpy()
    return ScoreTable(Scorer.SLIMMING.value, scores)


def cpse_scores(
    model: PrunableNetwork,
    batches: Iterable[tuple[Tensor, Tensor]],
    device: torch.device | str = "cpu",
    retain_samples: bool = False,
) -> ScoreTable:
    """Average squeeze-and-excitation gates per channel, collected like CPSCA scales.

    Raises:
        MissingChannelGateException: If a prunable layer carries no SE block
    """
    return collect_channel_scales(
        model,
        batches,
        device=device,
        gate_type=SqueezeExcite,
        scorer=Scorer.CPSE.value,
        retain_samples=retain_samples,
    )


def compute_scores(
    scorer: Scorer | str,
    model: PrunableNetwork,
    batches: Iterable[tuple[Tensor, Tensor]] | None = None,
    device: torch.device | str = "cpu",
    retain_samples: bool = False,
) -> ScoreTable:
    """Dispatch to the requested scorer; data-driven scorers need batches."""
    scorer = Scorer(scorer)
    match scorer:
        case Scorer.L1:
            table = l1_scores(model)
        case Scorer.SLIMMING:
            table = slimming_scores(model)
        case Scorer.CPSE:
            table = cpse_scores(model, batches or [], device=device, retain_samples=retain_samples)
        case Scorer.CPSCA:
            table = collect_channel_scales(
                model,
                batches or [],
                device=device,
                gate_type=SpatialChannelAttention,
                scorer=Scorer.CPSCA.value,
                retain_samples=retain_samples,
            )
    logger.info(f"Scored {len(table.layers)} layers with {scorer.value}")
    return table
