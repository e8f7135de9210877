from enum import StrEnum

CONFIG_FILENAME = "config.json"
RUN_MANIFEST_FILENAME = "run.json"
SCORES_FILENAME = "scores.json"
SAMPLES_FILENAME = "attention_samples.npz"
PLAN_FILENAME = "plan.json"
COST_FILENAME = "cost.json"
EVAL_FILENAME = "eval.json"
CHECKPOINTS_DIRNAME = "checkpoints"
BEST_SUFFIX = "_best"

REPORT_STEM = "report"
SWEEP_STEM = "sweep"

MISSING = "—"

REPORT_COLUMNS = ["Method", "Params", "Pruned% (Params)", "GFLOPs", "Pruned% (FLOPs)", "Acc(%)", "ΔAcc"]
SWEEP_COLUMNS = ["Description", "Params", "GFLOPs", "Acc(%)"]

PERCENT = 100.0
SMOKE_EPOCHS = 1


class StageName(StrEnum):
    TRAINED = "trained"
    PRUNED = "pruned"
    FINETUNED = "finetuned"
