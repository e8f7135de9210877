import argparse
import sys
from collections.abc import Sequence
from pathlib import Path

from pydantic import ValidationError

from src.baselines.constants import Scorer
from src.config import settings
from src.constants import ExitCode
from src.datasets.constants import DatasetName
from src.exceptions import (
    AppException,
    app_exception_handler,
    unhandled_exception_handler,
    validation_exception_handler,
)
from src.experiments.service import (
    ExperimentService,
    apply_overrides,
    cmd_fetch,
    cmd_report,
    cmd_sweep,
    load_config,
    load_ratios,
    load_sweep_config,
)
from src.logger import get_logger

logger = get_logger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpsca",
        description="Channel pruning guided by spatial and channel attention, with l1, Slimming and CPSE baselines.",
    )
    parser.add_argument("--device", choices=["auto", "cpu", "cuda"], default=None)
    verbs = parser.add_subparsers(dest="verb", required=True)

    def pipeline_verb(name: str, help_text: str) -> argparse.ArgumentParser:
        sub = verbs.add_parser(name, help=help_text)
        sub.add_argument("--config", type=Path, required=True, help="Experiment config (JSON)")
        sub.add_argument("--out", type=Path, help="Output directory holding the run")
        sub.add_argument("--seed", type=int)
        sub.add_argument("--subset", type=int, help="Training images kept, first N/classes per class")
        ratio = sub.add_mutually_exclusive_group()
        ratio.add_argument("--ratio", type=float, help="Uniform pruning ratio in [0, 1)")
        ratio.add_argument("--ratios", type=Path, help="Per-layer ratio file (JSON)")
        sub.add_argument("--scorer", choices=[s.value for s in Scorer])
        sub.add_argument("--smoke", action="store_true", help="Train and fine-tune for one epoch")
        return sub

    pipeline_verb("train", "Train the configured network")
    collect = pipeline_verb("collect", "Score every prunable channel")
    collect.add_argument("--checkpoint", type=Path)
    prune = pipeline_verb("prune", "Remove attention and prune by the score table")
    prune.add_argument("--checkpoint", type=Path)
    prune.add_argument("--table", type=Path)
    finetune = pipeline_verb("finetune", "Fine-tune the pruned network")
    finetune.add_argument("--checkpoint", type=Path)
    evaluate = pipeline_verb("eval", "Evaluate a checkpoint")
    evaluate.add_argument("--checkpoint", type=Path)

    report = verbs.add_parser("report", help="Compare run directories")
    report.add_argument("runs", type=Path, nargs="+")
    report.add_argument("--baseline", type=Path, help="Run whose trained stage is the reference")
    report.add_argument("--out", type=Path)

    sweep = verbs.add_parser("sweep", help="Train every cell of an ablation grid")
    sweep.add_argument("--config", type=Path, required=True, help="Sweep config (JSON)")
    sweep.add_argument("--smoke", action="store_true")

    fetch = verbs.add_parser("fetch", help="Download a CIFAR dataset")
    fetch.add_argument("--dataset", choices=[d.value for d in DatasetName], default=DatasetName.CIFAR10.value)
    fetch.add_argument("--root", type=Path)
    return parser


def run(args: argparse.Namespace) -> None:
    match args.verb:
        case "report":
            frame = cmd_report(args.runs, baseline=args.baseline, out=args.out)
            print(frame.to_string(index=False))
            return
        case "sweep":
            frame = cmd_sweep(load_sweep_config(args.config), smoke=args.smoke, device=args.device)
            print(frame.to_string(index=False))
            return
        case "fetch":
            cmd_fetch(args.dataset, args.root)
            return

    config = apply_overrides(
        load_config(args.config),
        seed=args.seed,
        subset=args.subset,
        ratio=args.ratio,
        ratios=load_ratios(args.ratios) if args.ratios else None,
        scorer=args.scorer,
        out=args.out,
        smoke=args.smoke,
    )
    service = ExperimentService(config, args.device)
    match args.verb:
        case "train":
            print(service.cmd_train())
        case "collect":
            print(service.cmd_collect(args.checkpoint))
        case "prune":
            print(service.cmd_prune(args.checkpoint, args.table))
        case "finetune":
            print(service.cmd_finetune(args.checkpoint))
        case "eval":
            print(service.cmd_eval(args.checkpoint).model_dump_json(indent=2))


def main(argv: Sequence[str] | None = None) -> int:
    """CLI entry point; returns the process exit code."""
    args = build_parser().parse_args(argv)
    logger.debug(f"{settings.PROJECT_NAME} {args.verb} (environment: {settings.ENVIRONMENT})")
    try:
        run(args)
    except AppException as exc:
        payload = app_exception_handler(exc)
    except ValidationError as exc:
        payload = validation_exception_handler(exc)
    except Exception as exc:
        logger.exception("Unhandled error")
        payload = unhandled_exception_handler(exc)
    else:
        return ExitCode.SUCCESS

    logger.error(f"{payload['error_code']} | {payload['error']} | {payload['details']}")
    return payload["exit_code"]


if __name__ == "__main__":
    sys.exit(main())
