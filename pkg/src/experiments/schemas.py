from datetime import datetime
from pathlib import Path
from typing import Annotated

from pydantic import AfterValidator, BaseModel, ConfigDict, Field

from src.attention.schemas import Arrangement, Pooling, SCAConfig
from src.baselines.constants import Scorer
from src.constants import SCHEMA_VERSION
from src.datasets.schemas import DatasetConfig
from src.experiments.config import RUNS_ROOT
from src.experiments.constants import StageName
from src.metrics.schemas import CostReport, LatencyReport
from src.models.schemas import ModelSpec
from src.pruning.schemas import RatioSchedule
from src.training.schemas import TrainConfig
from src.utils import sha256_digest


def _check_schema_version(v: str) -> str:
    if v != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {v}, expected {SCHEMA_VERSION}")
    return v


SchemaVersion = Annotated[str, AfterValidator(_check_schema_version)]


class PruningConfig(BaseModel):
    scorer: Scorer = Scorer.CPSCA
    ratios: RatioSchedule = RatioSchedule()
    # Reject plans touching shortcut-coupled layers instead of skipping them
    strict: bool = True

    model_config = ConfigDict(extra="forbid")


class ExperimentConfig(BaseModel):
    """One train -> collect -> prune -> finetune pipeline, stored as a JSON document."""

    schema_version: SchemaVersion = SCHEMA_VERSION
    name: str = Field(min_length=1, pattern=r"^[\w.-]+$")
    description: str = ""
    network: ModelSpec
    dataset: DatasetConfig = DatasetConfig()
    train: TrainConfig = TrainConfig()
    finetune: TrainConfig = TrainConfig(epochs=40, lr=0.01, milestones=[0.5])
    pruning: PruningConfig = PruningConfig()
    output_dir: Path = Field(default_factory=lambda: RUNS_ROOT)
    seed: int = 0
    # Keep per-sample channel maps during collection and export them as .npz
    retain_samples: bool = False
    latency_repeats: int | None = Field(None, ge=10)

    model_config = ConfigDict(extra="forbid")

    @property
    def run_dir(self) -> Path:
        return self.output_dir / self.name

    def config_hash(self) -> str:
        return sha256_digest(self.model_dump(mode="json"))


class SweepCell(BaseModel):
    description: str
    # None trains the attention-free baseline
    sca: SCAConfig | None = None


class SweepConfig(BaseModel):
    """Ablation grid over arrangements, spatial groups, GN groups and pooling variants."""

    schema_version: SchemaVersion = SCHEMA_VERSION
    name: str = Field(min_length=1, pattern=r"^[\w.-]+$")
    base: ExperimentConfig
    include_baseline: bool = True
    arrangements: list[Arrangement] = Field(default_factory=lambda: list(Arrangement))
    g_values: list[int] = Field(default_factory=lambda: [4, 8, 16, 32, 64])
    G_values: list[int] = Field(default_factory=lambda: [1, 2, 4, 8])
    # Each pooling axis is varied with the other submodule kept at the base block's pooling
    spatial_poolings: list[Pooling] = Field(default_factory=list)
    channel_poolings: list[Pooling] = Field(default_factory=list)

    model_config = ConfigDict(extra="forbid")

    def cells(self) -> list[SweepCell]:
        """Distinct configurations of the grid, one axis varied at a time from the base block."""
        reference = self.base.network.attention.sca
        candidates: list[SweepCell] = []
        if self.include_baseline:
            candidates.append(SweepCell(description="Baseline"))
        for arrangement in self.arrangements:
            candidates.append(
                SweepCell(
                    description=f"+SCA ({arrangement.value})",
                    sca=reference.model_copy(update={"arrangement": arrangement}),
                )
            )
        for g in self.g_values:
            candidates.append(SweepCell(description=f"+SCA (g={g})", sca=reference.model_copy(update={"g": g})))
        for G in self.G_values:
            candidates.append(SweepCell(description=f"+SCA (G={G})", sca=reference.model_copy(update={"G": G})))
        for field, values in (("spatial", self.spatial_poolings), ("channel", self.channel_poolings)):
            for pooling in values:
                candidates.append(
                    SweepCell(
                        description=f"+SCA ({field} {pooling.value} pooling)",
                        sca=reference.model_copy(update={f"{field}_pooling": pooling}),
                    )
                )

        cells: list[SweepCell] = []
        seen: set[str] = set()
        for cell in candidates:
            key = cell.sca.model_dump_json() if cell.sca else ""
            if key not in seen:
                seen.add(key)
                cells.append(cell)
        return cells


class StageResult(BaseModel):
    checkpoint: str
    accuracy: float
    cost: CostReport
    latency: LatencyReport | None = None
    completed_at: datetime = Field(default_factory=datetime.now)


class PruneCost(BaseModel):
    before: CostReport
    after: CostReport
    params_removed: int
    flops_removed: int


class RunManifest(BaseModel):
    """Self-describing record of a run directory: provenance plus per-stage results."""

    schema_version: str = SCHEMA_VERSION
    name: str
    config_hash: str
    scorer: Scorer
    dataset: str
    seed: int
    # Cost of the trained network with attention blocks removed
    backbone_cost: CostReport | None = None
    table_digest: str | None = None
    plan_digest: str | None = None
    stages: dict[StageName, StageResult] = Field(default_factory=dict)

    def metrics_digest(self) -> str:
        """Hash of accuracies and costs only, stable across reruns with the same seed."""
        return sha256_digest(
            {
                stage.value: [result.accuracy, result.cost.params, result.cost.flops]
                for stage, result in sorted(self.stages.items())
            }
        )

    def latest_pruned(self) -> StageResult | None:
        return self.stages.get(StageName.FINETUNED) or self.stages.get(StageName.PRUNED)
