import copy
import json
from pathlib import Path

import pandas as pd

from src.attention.schemas import AttentionKind
from src.baselines.constants import DATA_DRIVEN_SCORERS, Scorer
from src.baselines.service import compute_scores
from src.datasets.service import DatasetHandle, eval_loader, fetch_dataset, load_dataset
from src.experiments.config import DEVICE, RUNS_ROOT
from src.experiments.constants import (
    BEST_SUFFIX,
    CHECKPOINTS_DIRNAME,
    CONFIG_FILENAME,
    COST_FILENAME,
    EVAL_FILENAME,
    MISSING,
    PERCENT,
    PLAN_FILENAME,
    REPORT_COLUMNS,
    REPORT_STEM,
    RUN_MANIFEST_FILENAME,
    SAMPLES_FILENAME,
    SCORES_FILENAME,
    SMOKE_EPOCHS,
    SWEEP_COLUMNS,
    SWEEP_STEM,
    StageName,
)
from src.experiments.exceptions import (
    ArtifactNotFoundException,
    ConfigNotFoundException,
    DatasetModelMismatchException,
    InvalidConfigException,
    RunNotFoundException,
)
from src.experiments.schemas import ExperimentConfig, PruneCost, RunManifest, StageResult, SweepConfig
from src.logger import get_logger
from src.metrics.service import count_flops, evaluate_accuracy, measure_latency, reduction
from src.models.base import PrunableNetwork
from src.models.checkpoint import load_checkpoint, save_checkpoint
from src.models.schemas import CheckpointManifest
from src.models.service import build_model, remove_attention
from src.pruning.schemas import RatioSchedule
from src.pruning.service import apply_plan, plan_pruning, save_plan, validate_plan
from src.stats.service import ChannelScaleTable, ScoreTable
from src.training.constants import LOG_FILENAME
from src.training.service import TrainerService, TrainResult
from src.utils import resolve_device, seed_everything

logger = get_logger(__name__)


def load_config(path: Path) -> ExperimentConfig:
    """Read and validate an experiment config.

    Raises:
        ConfigNotFoundException: If the file does not exist
        InvalidConfigException: If the file is not JSON
        ValidationError: If the document does not match the schema
    """
    return ExperimentConfig.model_validate(_read_json(path))


def load_sweep_config(path: Path) -> SweepConfig:
    return SweepConfig.model_validate(_read_json(path))


def dump_config(config: ExperimentConfig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(config.model_dump_json(indent=2))
    return path


def load_ratios(path: Path) -> RatioSchedule:
    """Read a ratio file: either a full schedule or a plain {layer: ratio} map."""
    payload = _read_json(path)
    if isinstance(payload, dict) and ("default" in payload or "layers" in payload):
        return RatioSchedule.model_validate(payload)
    return RatioSchedule.model_validate({"layers": payload})


def apply_overrides(
    config: ExperimentConfig,
    seed: int | None = None,
    subset: int | None = None,
    ratio: float | None = None,
    ratios: RatioSchedule | None = None,
    scorer: Scorer | str | None = None,
    out: Path | None = None,
    smoke: bool = False,
) -> ExperimentConfig:
    """Apply command-line overrides and re-validate the whole config."""
    data = config.model_dump(mode="json")
    if seed is not None:
        data["seed"] = seed
        data["train"]["seed"] = seed
        data["finetune"]["seed"] = seed
    if subset is not None:
        data["dataset"]["subset"] = subset
    if ratios is not None:
        data["pruning"]["ratios"] = ratios.model_dump(mode="json")
    if ratio is not None:
        data["pruning"]["ratios"] = {"default": ratio, "layers": {}}
    if scorer is not None:
        data["pruning"]["scorer"] = Scorer(scorer).value
    if out is not None:
        data["output_dir"] = str(out)
    if smoke:
        data["train"]["epochs"] = SMOKE_EPOCHS
        data["finetune"]["epochs"] = SMOKE_EPOCHS
    return ExperimentConfig.model_validate(data)


def load_manifest(run_dir: Path) -> RunManifest:
    path = run_dir / RUN_MANIFEST_FILENAME
    if not path.is_file():
        raise RunNotFoundException(run_dir)
    return RunManifest.model_validate_json(path.read_text())


class ExperimentService:
    """Pipeline stages of one run directory."""

    def __init__(self, config: ExperimentConfig, device: str | None = None):
        """Initialize the service.

        Args:
            config: Validated experiment config
            device: "auto", "cpu" or "cuda"; defaults to the global settings
        """
        self.config = config
        self.device = resolve_device(device or DEVICE)
        self.run_dir = config.run_dir
        self._dataset: DatasetHandle | None = None

    @property
    def dataset(self) -> DatasetHandle:
        if self._dataset is None:
            self._dataset = load_dataset(self.config.dataset)
            if self._dataset.num_classes != self.config.network.num_classes:
                raise DatasetModelMismatchException(
                    self._dataset.name, self._dataset.num_classes, self.config.network.num_classes
                )
        return self._dataset

    def checkpoint_dir(self, stage: StageName, best: bool = False) -> Path:
        return self.run_dir / CHECKPOINTS_DIRNAME / f"{stage.value}{BEST_SUFFIX if best else ''}"

    def cmd_train(self) -> Path:
        """Build the configured network (attention included), train it and record the trained stage."""
        self.run_dir.mkdir(parents=True, exist_ok=True)
        dump_config(self.config, self.run_dir / CONFIG_FILENAME)
        log_path = self.run_dir / LOG_FILENAME
        log_path.unlink(missing_ok=True)

        seed_everything(self.config.seed)
        model = build_model(self.config.network)
        dataset = self.dataset
        result = TrainerService(self.device, log_path).train(model, dataset, self.config.train)
        self._save_result(StageName.TRAINED, result)

        manifest = self._manifest()
        manifest.backbone_cost = count_flops(remove_attention(result.model))
        manifest.stages[StageName.TRAINED] = self._stage_result(StageName.TRAINED, result.model, result.final_accuracy)
        self._write_manifest(manifest)
        logger.info(f"Trained {self.config.name}: test accuracy {result.final_accuracy:.4f}")
        return self.run_dir

    def cmd_collect(self, checkpoint: Path | None = None) -> Path:
        """Score every prunable channel of the trained network with the configured scorer."""
        model, _ = load_checkpoint(checkpoint or self._require_checkpoint(StageName.TRAINED), self.device)
        scorer = self.config.pruning.scorer
        batches = None
        if scorer in DATA_DRIVEN_SCORERS:
            normalize = self.config.train.augmentation.normalize
            batches = eval_loader(self.dataset, "train", normalize=normalize)

        table = compute_scores(
            scorer, model, batches, device=self.device, retain_samples=self.config.retain_samples
        )
        path = table.save(self.run_dir / SCORES_FILENAME)
        if self.config.retain_samples and isinstance(table, ChannelScaleTable):
            table.export_samples(self.run_dir / SAMPLES_FILENAME)
        return path

    def cmd_prune(self, checkpoint: Path | None = None, table: Path | None = None) -> Path:
        """Remove attention, plan from the score table and physically prune the backbone."""
        model, _ = load_checkpoint(checkpoint or self._require_checkpoint(StageName.TRAINED), "cpu")
        table_path = table or self.run_dir / SCORES_FILENAME
        if not table_path.is_file():
            raise ArtifactNotFoundException(table_path)
        scores = ScoreTable.load(table_path)

        backbone = remove_attention(model)
        pruning = self.config.pruning
        layers = [unit.layer_id for unit in backbone.pruning_units()]
        ignored = sorted(set(pruning.ratios.layers) - set(layers))
        if ignored:
            logger.warning(f"Ratios given for non-prunable layers are ignored: {ignored}")
        plan = plan_pruning(scores, pruning.ratios, layers=layers)
        report = validate_plan(backbone, plan, strict=pruning.strict)
        for warning in report.warnings:
            logger.warning(f"{warning.layer_id}: {warning.code} ({warning.message})")

        pruned = apply_plan(backbone, plan, strict=pruning.strict)
        save_plan(plan, self.run_dir / PLAN_FILENAME)
        before = count_flops(backbone)
        after = count_flops(pruned)
        cost = PruneCost(
            before=before,
            after=after,
            params_removed=before.params - after.params,
            flops_removed=before.flops - after.flops,
        )
        (self.run_dir / COST_FILENAME).write_text(cost.model_dump_json(indent=2))

        self._save(StageName.PRUNED, pruned)
        accuracy = self._evaluate(pruned)
        manifest = self._manifest()
        manifest.table_digest = plan.provenance.table_digest
        manifest.plan_digest = plan.digest()
        manifest.stages[StageName.PRUNED] = self._stage_result(StageName.PRUNED, pruned, accuracy)
        self._write_manifest(manifest)
        logger.info(
            f"Pruned {self.config.name}: params {before.params} -> {after.params} "
            f"({reduction(before.params, after.params):.2f}%), accuracy {accuracy:.4f}"
        )
        return self.checkpoint_dir(StageName.PRUNED)

    def cmd_finetune(self, checkpoint: Path | None = None) -> Path:
        model, _ = load_checkpoint(checkpoint or self._require_checkpoint(StageName.PRUNED), self.device)
        result = TrainerService(self.device, self.run_dir / LOG_FILENAME).finetune(
            model, self.dataset, self.config.finetune
        )
        self._save_result(StageName.FINETUNED, result)
        manifest = self._manifest()
        manifest.stages[StageName.FINETUNED] = self._stage_result(
            StageName.FINETUNED, result.model, result.final_accuracy
        )
        self._write_manifest(manifest)
        logger.info(f"Fine-tuned {self.config.name}: test accuracy {result.final_accuracy:.4f}")
        return self.checkpoint_dir(StageName.FINETUNED)

    def cmd_eval(self, checkpoint: Path | None = None) -> StageResult:
        """Evaluate a checkpoint (default: the most advanced stage) and write eval.json."""
        if checkpoint is None:
            checkpoint = next(
                (
                    self.checkpoint_dir(stage)
                    for stage in (StageName.FINETUNED, StageName.PRUNED, StageName.TRAINED)
                    if self.checkpoint_dir(stage).is_dir()
                ),
                None,
            )
            if checkpoint is None:
                raise RunNotFoundException(self.run_dir)
        model, _ = load_checkpoint(checkpoint, self.device)
        result = StageResult(
            checkpoint=str(checkpoint),
            accuracy=self._evaluate(model),
            cost=count_flops(model),
            latency=(
                measure_latency(model, repeats=self.config.latency_repeats, device=self.device)
                if self.config.latency_repeats
                else None
            ),
        )
        self.run_dir.mkdir(parents=True, exist_ok=True)
        (self.run_dir / EVAL_FILENAME).write_text(result.model_dump_json(indent=2))
        logger.info(f"Evaluated {checkpoint}: accuracy {result.accuracy:.4f}, {result.cost.gflops:.5f} GFLOPs")
        return result

    def _evaluate(self, model: PrunableNetwork) -> float:
        normalize = self.config.train.augmentation.normalize
        return evaluate_accuracy(model.to(self.device), eval_loader(self.dataset, "test", normalize=normalize), self.device)

    def _stage_result(self, stage: StageName, model: PrunableNetwork, accuracy: float) -> StageResult:
        latency = None
        if self.config.latency_repeats:
            latency = measure_latency(model, repeats=self.config.latency_repeats, device=self.device)
        return StageResult(
            checkpoint=str(self.checkpoint_dir(stage)),
            accuracy=accuracy,
            cost=count_flops(model),
            latency=latency,
        )

    def _save(self, stage: StageName, model: PrunableNetwork, epoch: int = 0, best: bool = False) -> Path:
        manifest = CheckpointManifest(
            tag=f"{self.config.name}/{stage.value}{BEST_SUFFIX if best else ''}",
            dataset=self.config.dataset.name.value,
            epoch=epoch,
            seed=self.config.seed,
            config_hash=self.config.config_hash(),
        )
        return save_checkpoint(self.checkpoint_dir(stage, best=best), model, manifest)

    def _save_result(self, stage: StageName, result: TrainResult) -> None:
        epochs = self.config.train.epochs if stage == StageName.TRAINED else self.config.finetune.epochs
        self._save(stage, result.model, epoch=epochs)
        if result.best_state:
            best = copy.deepcopy(result.model)
            best.load_state_dict(result.best_state)
            self._save(stage, best, epoch=result.best_epoch, best=True)

    def _require_checkpoint(self, stage: StageName) -> Path:
        directory = self.checkpoint_dir(stage)
        if not directory.is_dir():
            raise RunNotFoundException(self.run_dir, stage.value)
        return directory

    def _manifest(self) -> RunManifest:
        path = self.run_dir / RUN_MANIFEST_FILENAME
        if path.is_file():
            manifest = RunManifest.model_validate_json(path.read_text())
            if manifest.config_hash == self.config.config_hash():
                return manifest
            logger.warning(f"Config of {self.run_dir} changed; earlier stage results are discarded")
        return RunManifest(
            name=self.config.name,
            config_hash=self.config.config_hash(),
            scorer=self.config.pruning.scorer,
            dataset=self.config.dataset.name.value,
            seed=self.config.seed,
        )

    def _write_manifest(self, manifest: RunManifest) -> None:
        self.run_dir.mkdir(parents=True, exist_ok=True)
        (self.run_dir / RUN_MANIFEST_FILENAME).write_text(manifest.model_dump_json(indent=2))


def build_report(run_dirs: list[Path], baseline: Path | None = None) -> pd.DataFrame:
    """Comparison table of pruned runs against the unpruned baseline.

    The baseline row is the trained stage of ``baseline`` (default: the first run),
    costed without attention blocks. Every run with a pruned or fine-tuned stage
    contributes one row; numbers come from the run manifests only.

    Raises:
        RunNotFoundException: If a run directory or the baseline's trained stage is missing
    """
    if not run_dirs and baseline is None:
        raise RunNotFoundException(RUNS_ROOT)
    baseline_dir = baseline or run_dirs[0]
    reference = load_manifest(baseline_dir)
    trained = reference.stages.get(StageName.TRAINED)
    if trained is None:
        raise RunNotFoundException(baseline_dir, StageName.TRAINED.value)
    reference_cost = reference.backbone_cost or trained.cost

    rows = [
        {
            "Method": f"Baseline ({reference.name})",
            "Params": reference_cost.params,
            "Pruned% (Params)": MISSING,
            "GFLOPs": reference_cost.gflops,
            "Pruned% (FLOPs)": MISSING,
            "Acc(%)": trained.accuracy * PERCENT,
            "ΔAcc": MISSING,
        }
    ]
    for run_dir in run_dirs:
        manifest = load_manifest(run_dir)
        result = manifest.latest_pruned()
        if result is None:
            continue
        rows.append(
            {
                "Method": f"{manifest.scorer.value.upper()} ({manifest.name})",
                "Params": result.cost.params,
                "Pruned% (Params)": reduction(reference_cost.params, result.cost.params),
                "GFLOPs": result.cost.gflops,
                "Pruned% (FLOPs)": reduction(reference_cost.flops, result.cost.flops),
                "Acc(%)": result.accuracy * PERCENT,
                "ΔAcc": (result.accuracy - trained.accuracy) * PERCENT,
            }
        )
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def cmd_report(run_dirs: list[Path], baseline: Path | None = None, out: Path | None = None) -> pd.DataFrame:
    """Write the comparison table as CSV and aligned text."""
    frame = build_report(run_dirs, baseline)
    write_tables(frame, out or RUNS_ROOT, REPORT_STEM)
    return frame


def cmd_sweep(sweep: SweepConfig, smoke: bool = False, device: str | None = None) -> pd.DataFrame:
    """Train one network per ablation cell and tabulate params, GFLOPs and accuracy."""
    sweep_dir = sweep.base.output_dir / sweep.name
    rows = []
    for index, cell in enumerate(sweep.cells()):
        network = sweep.base.network
        if cell.sca is None:
            attention = network.attention.model_copy(update={"kind": AttentionKind.NONE})
        else:
            attention = network.attention.model_copy(update={"kind": AttentionKind.SCA, "sca": cell.sca})
        data = sweep.base.model_dump(mode="json")
        data["network"]["attention"] = attention.model_dump(mode="json")
        data["name"] = f"cell{index:02d}"
        data["output_dir"] = str(sweep_dir)
        data["description"] = cell.description
        config = apply_overrides(ExperimentConfig.model_validate(data), smoke=smoke)

        logger.info(f"Sweep {sweep.name}: {cell.description}")
        run_dir = ExperimentService(config, device).cmd_train()
        trained = load_manifest(run_dir).stages[StageName.TRAINED]
        rows.append(
            {
                "Description": cell.description,
                "Params": trained.cost.params,
                "GFLOPs": trained.cost.gflops,
                "Acc(%)": trained.accuracy * PERCENT,
            }
        )

    frame = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    write_tables(frame, sweep_dir, SWEEP_STEM)
    return frame


def write_tables(frame: pd.DataFrame, directory: Path, stem: str) -> tuple[Path, Path]:
    """Write a table as delimiter-separated values and as aligned text."""
    directory.mkdir(parents=True, exist_ok=True)
    csv_path = directory / f"{stem}.csv"
    text_path = directory / f"{stem}.txt"
    frame.to_csv(csv_path, index=False)
    text_path.write_text(_format_table(frame).to_string(index=False) + "\n")
    logger.info(f"Wrote {csv_path} and {text_path}")
    return csv_path, text_path


def cmd_fetch(name: str, root: Path | None = None) -> Path:
    return fetch_dataset(name, root)


def _format_table(frame: pd.DataFrame) -> pd.DataFrame:
    formatted = frame.copy()
    formatters = {
        "Params": lambda v: f"{v / 1e6:.2f}M",
        "GFLOPs": lambda v: f"{v:.5f}",
        "Pruned% (Params)": lambda v: f"{v:.2f}%",
        "Pruned% (FLOPs)": lambda v: f"{v:.2f}%",
        "Acc(%)": lambda v: f"{v:.2f}",
        "ΔAcc": lambda v: f"{v:+.2f}",
    }
    for column, formatter in formatters.items():
        if column in formatted:
            formatted[column] = [v if v == MISSING else formatter(v) for v in formatted[column]]
    return formatted


def _read_json(path: Path) -> object:
    if not path.is_file():
        raise ConfigNotFoundException(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise InvalidConfigException(path, str(e)) from e
