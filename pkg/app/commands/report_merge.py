"""`report`: merge analyze/classify reports into one."""

import logging

from app.command_registry import register_command
from app.report import merge_reports, read_report, write_report

logger = logging.getLogger(__name__)


@register_command(
    name="report",
    label="Merge reports",
    description="Combine per-signal and dataset reports into a single versioned JSON report",
    arguments=[
        (("inputs",), {"nargs": "+", "help": "Report JSON files"}),
        (("--out",), {"required": True, "help": "Merged report path"}),
    ],
    category="export",
)
def run_report(args, config=None) -> int:
    merged = merge_reports([read_report(p) for p in args.inputs])
    write_report(merged, args.out)
    print(f"[*] Merged {len(args.inputs)} reports ({len(merged.signals)} signals) into {args.out}")
    return 1 if merged.failed else 0
