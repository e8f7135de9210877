from pathlib import Path

from src.config import settings

# Run directories default to the global runs root (imported from global settings)
RUNS_ROOT = Path(settings.RUNS_DIR)
DEVICE = settings.DEVICE
