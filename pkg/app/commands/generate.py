"""`generate`: write a synthetic two-class cohort with labels."""

import json
import logging
import os

from app.command_registry import register_command
from app.config import GenerateConfig, save_config
from app.io_formats import save_signal, write_labels
from app.synthetic import make_cohort

logger = logging.getLogger(__name__)


@register_command(
    name="generate",
    label="Generate cohort",
    description="Synthetic IMT pulse signals for two classes, plus labels.csv and truth.json",
    config_class=GenerateConfig,
    arguments=[(("--out-dir",), {"required": True, "help": "Directory for signals and labels"})],
    category="data",
)
def run_generate(args, config: GenerateConfig) -> int:
    records = make_cohort(config)
    os.makedirs(args.out_dir, exist_ok=True)
    ext = ".bin" if config.format == "bin" else ".csv"
    for rec in records:
        save_signal(rec.signal, os.path.join(args.out_dir, rec.signal_id + ext), config.format)

    write_labels({rec.signal_id: rec.label for rec in records}, os.path.join(args.out_dir, "labels.csv"))
    truth = {
        rec.signal_id: {
            "label": rec.label,
            "alpha": rec.shape.alpha.tolist(),
            "beta": rec.shape.beta.tolist(),
        }
        for rec in records
    }
    with open(os.path.join(args.out_dir, "truth.json"), "w") as f:
        json.dump(truth, f, indent=4, sort_keys=True)
    save_config(config, os.path.join(args.out_dir, "generate_config.json"))
    print(f"[*] Wrote {len(records)} signals to {args.out_dir}")
    return 0
