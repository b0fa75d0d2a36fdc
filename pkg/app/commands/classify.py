"""`classify`: GPS model, ROC/CI, LOOCV and permutation ANOVA on an SPS dataset."""

import logging

from app.command_registry import register_command
from app.config import PipelineConfig
from app.pipeline import run_classify

logger = logging.getLogger(__name__)


@register_command(
    name="classify",
    label="Classify SPS dataset",
    description="Fit the PLS GPS model and report AUC, bootstrap CI, LOOCV accuracy and ANOVA p",
    config_class=PipelineConfig,
    arguments=[
        (("--sps",), {"required": True, "help": "SPS dataset CSV"}),
        (("--labels",), {"required": True, "help": "labels CSV (signal_id,label)"}),
        (("--out-dir",), {"default": None, "help": "Write report, ROC and histogram CSVs here"}),
        (("--position",), {"default": None, "help": "Only use rows recorded at this position"}),
        (("--aggregate-subjects",), {"action": "store_true", "help": "Average SPS per subject first"}),
    ],
    category="stats",
)
def run_classify_command(args, config: PipelineConfig) -> int:
    report, code = run_classify(
        config,
        args.sps,
        args.labels,
        out_dir=args.out_dir,
        position=args.position,
        aggregate_subjects=args.aggregate_subjects,
    )
    stats = report.dataset
    print(f"[*] AUC {stats.auc:.3f} (95% CI {stats.ci_lo:.3f}-{stats.ci_hi:.3f})")
    if stats.loocv_accuracy is not None:
        print(f"[i] LOOCV accuracy {stats.loocv_accuracy:.3f}")
    if stats.anova_p is not None:
        print(f"[i] Permutation ANOVA p = {stats.anova_p:.4f}")
    return code
