from pathlib import Path

import torch

from src.logger import get_logger
from src.models.base import PrunableNetwork
from src.models.constants import GRAPH_FILENAME, MANIFEST_FILENAME, TENSOR_SUFFIX, TENSORS_DIRNAME
from src.models.exceptions import CheckpointNotFoundException
from src.models.schemas import CheckpointManifest, GraphDocument
from src.models.service import build_model, describe_model

logger = get_logger(__name__)


def save_checkpoint(directory: Path, model: PrunableNetwork, manifest: CheckpointManifest) -> Path:
    """Write a self-describing checkpoint directory.

    Layout:
        graph.json      model spec and ordered layer list
        tensors/*.pt    one tensor per state-dict entry, named by its key
        manifest.json   dataset, epoch, seed and config hash

    Args:
        directory: Target directory (created if missing)
        model: Network to persist
        manifest: Provenance record

    Returns:
        The checkpoint directory
    """
    tensors_dir = directory / TENSORS_DIRNAME
    tensors_dir.mkdir(parents=True, exist_ok=True)
    for stale in tensors_dir.glob(f"*{TENSOR_SUFFIX}"):
        stale.unlink()

    for key, tensor in model.state_dict().items():
        torch.save(tensor.detach().cpu().clone(), tensors_dir / f"{key}{TENSOR_SUFFIX}")

    (directory / GRAPH_FILENAME).write_text(describe_model(model).model_dump_json(indent=2))
    (directory / MANIFEST_FILENAME).write_text(manifest.model_dump_json(indent=2))
    logger.info(f"Checkpoint '{manifest.tag}' written to {directory}")
    return directory


def load_checkpoint(
    directory: Path, device: torch.device | str = "cpu"
) -> tuple[PrunableNetwork, CheckpointManifest]:
    """Rebuild a network from a checkpoint directory.

    Raises:
        CheckpointNotFoundException: If the graph, manifest or tensors are missing
    """
    graph_path = directory / GRAPH_FILENAME
    manifest_path = directory / MANIFEST_FILENAME
    tensors_dir = directory / TENSORS_DIRNAME
    if not graph_path.is_file() or not manifest_path.is_file() or not tensors_dir.is_dir():
        raise CheckpointNotFoundException(directory)

    graph = GraphDocument.model_validate_json(graph_path.read_text())
    manifest = CheckpointManifest.model_validate_json(manifest_path.read_text())
    model = build_model(graph.spec)

    state = {
        path.name.removesuffix(TENSOR_SUFFIX): torch.load(path, map_location="cpu", weights_only=True)
        for path in tensors_dir.glob(f"*{TENSOR_SUFFIX}")
    }
    model.load_state_dict(state, strict=True)
    logger.debug(f"Checkpoint '{manifest.tag}' loaded from {directory}")
    return model.to(device), manifest
