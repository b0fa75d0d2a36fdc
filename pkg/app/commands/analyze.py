"""`analyze`: signals to SPS rows and a per-signal report."""

import logging

from app.command_registry import register_command
from app.config import PipelineConfig
from app.pipeline import run_analyze

logger = logging.getLogger(__name__)


@register_command(
    name="analyze",
    label="Analyze signals",
    description="STFT, SST, ridge, component recovery and SPS estimation per signal",
    config_class=PipelineConfig,
    arguments=[
        (("inputs",), {"nargs": "+", "help": "Signal files (.csv or .bin)"}),
        (("--out-dir",), {"default": None, "help": "Write sps.csv, report.json and tracks here"}),
        (("--labels",), {"default": None, "help": "labels.csv to copy into the SPS rows"}),
        (("--position",), {"default": "", "help": "Palpation site recorded in every row"}),
        (("--signal-format",), {"choices": ["csv", "bin"], "default": None, "help": "Override format detection"}),
    ],
)
def run_analyze_command(args, config: PipelineConfig) -> int:
    report, rows, code = run_analyze(
        config,
        args.inputs,
        out_dir=args.out_dir,
        signal_format=args.signal_format,
        position=args.position,
        labels_path=args.labels,
    )
    for entry in report.failed:
        print(f"[!] {entry.signal_id}: {entry.error}: {entry.detail}")
    print(f"[*] {len(rows)} of {len(report.signals)} signals analyzed")
    return code
