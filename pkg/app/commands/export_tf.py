"""`export-tf`: STFT and SST matrices for plotting."""

import logging
import os

from app.command_registry import register_command
from app.config import PipelineConfig
from app.errors import PulseSignatureError
from app.io_formats import load_signal, load_tf_matrix, save_tf
from app.pipeline import EXIT_FATAL, EXIT_OK, EXIT_PARTIAL
from app.tf_engine import stft_with_reassignment, synchrosqueeze

logger = logging.getLogger(__name__)


def _save_checked(tf, prefix: str) -> dict:
    paths = save_tf(tf, prefix)
    # Read back through the sidecar; a size mismatch raises ParseError.
    stored = load_tf_matrix(prefix)
    logger.debug(f"Verified {prefix}.c64 as {stored.shape[0]} x {stored.shape[1]}")
    return paths


def export_signal_tf(path: str, config: PipelineConfig, out_dir: str, kind: str = "both") -> dict:
    signal = load_signal(path)
    tf, rmap = stft_with_reassignment(
        signal,
        sigma=config.window_sigma,
        hop=config.hop,
        n_bins=config.n_bins,
        freq_max=config.freq_max,
        gamma_thresh_rel=config.gamma_thresh_rel,
        half_width_sigmas=config.window_half_width_sigmas,
        boundary_sigmas=config.boundary_sigmas,
    )
    stem = os.path.join(out_dir, os.path.splitext(os.path.basename(path))[0])
    written = {}
    if kind in ("stft", "both"):
        written["stft"] = _save_checked(tf, stem + "_stft")
    if kind in ("sst", "both"):
        written["sst"] = _save_checked(synchrosqueeze(tf, rmap), stem + "_sst")
    return written


@register_command(
    name="export-tf",
    label="Export TF matrices",
    description="Binary complex64 matrices, JSON sidecars, magnitude CSVs and PNG heatmaps",
    config_class=PipelineConfig,
    arguments=[
        (("inputs",), {"nargs": "+", "help": "Signal files"}),
        (("--out-dir",), {"required": True}),
        (("--kind",), {"choices": ["stft", "sst", "both"], "default": "both"}),
    ],
    category="export",
)
def run_export_tf(args, config: PipelineConfig) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    failed = 0
    for path in args.inputs:
        try:
            export_signal_tf(path, config, args.out_dir, args.kind)
        except PulseSignatureError as e:
            logger.error(f"export-tf failed for {path}: {e.code}: {e}")
            failed += 1
    if failed == len(args.inputs):
        return EXIT_FATAL
    return EXIT_PARTIAL if failed else EXIT_OK
