from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.constants import SCHEMA_VERSION
from src.pruning.constants import ViolationCode
from src.utils import sha256_digest


class RatioSchedule(BaseModel):
    """Per-layer pruning ratios: a uniform default plus explicit overrides."""

    default: float = Field(0.0, ge=0.0, lt=1.0)
    layers: dict[str, float] = Field(default_factory=dict)

    model_config = ConfigDict(extra="forbid")

    @field_validator("layers")
    @classmethod
    def _check_ratios(cls, v: dict[str, float]) -> dict[str, float]:
        for layer, ratio in v.items():
            if not 0.0 <= ratio < 1.0:
                raise ValueError(f"ratio for {layer} must lie in [0, 1), got {ratio}")
        return v

    def ratio_for(self, layer_id: str) -> float:
        return self.layers.get(layer_id, self.default)


class LayerPlan(BaseModel):
    channels: int = Field(ge=1)
    ratio: float = Field(ge=0.0, le=1.0)
    remove: list[int] = Field(default_factory=list)

    model_config = ConfigDict(extra="forbid")


class Provenance(BaseModel):
    scorer: str
    table_digest: str

    model_config = ConfigDict(extra="forbid")


class PruningPlan(BaseModel):
    """Channels to remove per prunable layer, with the score table it came from."""

    schema_version: str = SCHEMA_VERSION
    layers: dict[str, LayerPlan]
    provenance: Provenance

    model_config = ConfigDict(extra="forbid")

    def removed(self, layer_id: str) -> set[int]:
        plan = self.layers.get(layer_id)
        return set(plan.remove) if plan else set()

    def digest(self) -> str:
        return sha256_digest(self.model_dump(mode="json"))


class Violation(BaseModel):
    layer_id: str
    code: ViolationCode
    message: str


class PlanReport(BaseModel):
    violations: list[Violation] = Field(default_factory=list)
    warnings: list[Violation] = Field(default_factory=list)
    survivors: dict[str, int] = Field(default_factory=dict)
    # Coupled layers skipped in non-strict mode
    ignored: list[str] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def codes(self) -> set[ViolationCode]:
        return {v.code for v in self.violations}
