import hashlib
import json
import random
from typing import Any

import numpy as np
import torch

from src.config import settings
from src.constants import FLOAT_SIGNIFICANT_DIGITS
from src.logger import get_logger

logger = get_logger(__name__)


def canonical_json(payload: Any) -> str:
    """Serialize a JSON-compatible payload with sorted keys and no whitespace."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def sha256_digest(payload: Any) -> str:
    """SHA-256 of the canonical JSON rendering of a payload."""
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def format_float(value: float) -> str:
    """Render a real number with the persisted number of significant digits."""
    return format(float(value), f".{FLOAT_SIGNIFICANT_DIGITS}g")


def resolve_device(preference: str | None = None) -> torch.device:
    """Resolve the compute device from an explicit preference or the global settings.

    Args:
        preference: "auto", "cpu" or "cuda"; falls back to settings.DEVICE

    Returns:
        torch.device to run on
    """
    choice = preference or settings.DEVICE
    if choice == "auto":
        choice = "cuda" if torch.cuda.is_available() else "cpu"
    return torch.device(choice)


def seed_everything(seed: int) -> torch.Generator:
    """Seed every stochastic source used by the toolkit.

    Args:
        seed: Global seed

    Returns:
        A torch.Generator seeded with the same value, for data loaders
    """
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)
    if settings.DETERMINISTIC:
        torch.backends.cudnn.deterministic = True
        torch.backends.cudnn.benchmark = False
        torch.use_deterministic_algorithms(True, warn_only=True)
    logger.debug(f"Seeded all generators with {seed}")

    generator = torch.Generator()
    generator.manual_seed(seed)
    return generator
