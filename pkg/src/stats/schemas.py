from pydantic import BaseModel, ConfigDict, Field

from src.constants import SCHEMA_VERSION


class ScoreTableDocument(BaseModel):
    """Persisted per-channel scores: layer id -> [(channel index, score rendered with 17 digits)]."""

    schema_version: str = SCHEMA_VERSION
    scorer: str
    sample_counts: dict[str, int] = Field(default_factory=dict)
    layers: dict[str, list[tuple[int, str]]]

    model_config = ConfigDict(extra="forbid")
