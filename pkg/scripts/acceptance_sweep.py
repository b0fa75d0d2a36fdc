#!/usr/bin/env python3
"""
Numeric acceptance sweep for the wave-shape pipeline.

Runs the synthetic-oracle checks (tone recovery, SST concentration, noise
robustness, IF tracking, shape recovery, estimator exactness, harmonic power,
AUC and PLS oracles, ANOVA calibration, determinism) and prints a pass/fail
table. Exit code 1 if any check fails.

Usage:
  python scripts/acceptance_sweep.py
  python scripts/acceptance_sweep.py --seeds 5 --only tone,shape
"""

from __future__ import annotations

import argparse
import itertools
import sys
import time
from pathlib import Path
from typing import Callable

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from app.config import GenerateConfig, PipelineConfig, derive_seed  # noqa: E402
from app.model_core import (  # noqa: E402
    SampledSignal,
    make_imt_component,
    shape_from_harmonics,
    shape_l2_distance,
    synthesize_imt,
)
from app.noise import gen_arma_t_noise, mix_at_snr, seconds_to_interval  # noqa: E402
from app.pipeline import analyze_signal, signal_entry  # noqa: E402
from app.recovery import reconstruct  # noqa: E402
from app.report import AnalysisReport, report_to_json  # noqa: E402
from app.ridge import extract_ridge, ridge_to_if  # noqa: E402
from app.shape_regression import (  # noqa: E402
    DesignMatrix,
    align_phase,
    estimate_sps,
    normalize_sps,
    reconstruct_fit,
    sps_from_shape,
    sps_to_wave_shape,
)
from app.stats import fit_pls, permutation_functional_anova, roc_analyze  # noqa: E402
from app.synthetic import make_record  # noqa: E402
from app.tf_engine import band_concentration, nearest_bin, stft_with_reassignment, synchrosqueeze  # noqa: E402

FS = 100.0
DURATION_S = 10.0
TONE_HZ = 1.2


def parse_args() -> argparse.Namespace:
    parser = argparse.ArgumentParser(description="Run the synthetic acceptance checks.")
    parser.add_argument("--seeds", type=int, default=20, help="Seeds for the noise and shape sweeps")
    parser.add_argument("--trials", type=int, default=1000, help="Random datasets for the AUC oracle")
    parser.add_argument("--anova-trials", type=int, default=100, help="Null trials for ANOVA calibration")
    parser.add_argument("--n-perm", type=int, default=500, help="Permutations per ANOVA trial")
    parser.add_argument(
        "--only",
        default="",
        help="Comma-separated subset of checks (default: all)",
    )
    return parser.parse_args()


def _tone(freq_hz: float = TONE_HZ, amplitude: float = 1.0) -> SampledSignal:
    t = np.arange(int(DURATION_S * FS)) / FS
    return SampledSignal(samples=amplitude * np.cos(2.0 * np.pi * freq_hz * t), sample_rate=FS)


def _sst(signal: SampledSignal):
    tf, rmap = stft_with_reassignment(signal)
    return tf, synchrosqueeze(tf, rmap)


def _cosine_imt(inst_freq: np.ndarray) -> SampledSignal:
    comp = make_imt_component(np.ones_like(inst_freq), inst_freq, FS, eps=0.5)
    return synthesize_imt(shape_from_harmonics([1.0], [0.0]), comp)


def check_tone() -> tuple[bool, str]:
    started = time.perf_counter()
    tf, sst = _sst(_tone())
    ridge = extract_ridge(sst)
    elapsed = time.perf_counter() - started
    target = nearest_bin(sst, TONE_HZ)
    interior = sst.interior
    hit = float(np.mean(np.abs(ridge.bin_index[interior] - target) <= 1))
    return hit >= 0.99 and elapsed < 5.0, f"{hit:.1%} frames within 1 bin, {elapsed:.2f} s"


def check_concentration() -> tuple[bool, str]:
    tf, sst = _sst(_tone())
    ridge = extract_ridge(sst)
    interior = sst.interior
    sst_share = band_concentration(sst, ridge.bin_index, 2)[interior]
    stft_share = band_concentration(tf, ridge.bin_index, 2)[interior]
    ok = float(sst_share.min()) >= 0.95 and bool(np.all(sst_share >= stft_share))
    return ok, f"SST min {sst_share.min():.3f}, STFT mean {stft_share.mean():.3f}"


def check_noise(seeds: int) -> tuple[bool, str]:
    tone = _tone()
    start, stop = seconds_to_interval(tone, 2.5, 5.5)
    worst = 1.0
    for seed in range(seeds):
        noise = gen_arma_t_noise(stop - start, derive_seed(seed, "noise"), dof=3.0)
        _, sst = _sst(mix_at_snr(tone, noise, 0.0, (start, stop)))
        ridge = extract_ridge(sst)
        target = nearest_bin(sst, TONE_HZ)
        hit = float(np.mean(np.abs(ridge.bin_index[sst.interior] - target) <= 3))
        worst = min(worst, hit)
    return worst >= 0.90, f"worst seed {worst:.1%} frames within 3 bins ({seeds} seeds)"


def check_wandering_if() -> tuple[bool, str]:
    t = np.arange(int(DURATION_S * FS)) / FS
    inst_freq = 1.2 + 0.15 * np.sin(2.0 * np.pi * 0.08 * t)
    _, sst = _sst(_cosine_imt(inst_freq))
    comp = reconstruct(sst, ridge_to_if(extract_ridge(sst)))
    err = float(np.max(np.abs(comp.inst_freq - inst_freq)[comp.interior]))

    dip = 1.2 - (1.2 - 1.0 / 1.15) * np.exp(-((t - 5.3) ** 2) / 2.0)
    _, sst_dip = _sst(_cosine_imt(dip))
    est = ridge_to_if(extract_ridge(sst_dip))
    frame = int(np.argmin(np.abs(sst_dip.time_axis - 5.3)))
    dip_err = abs(float(est[frame]) - 1.0 / 1.15)
    return err <= 0.05 and dip_err <= 0.05, f"max IF error {err:.4f} Hz, dip error {dip_err:.4f} Hz"


def _shape_errors(seeds: int, snr_db) -> np.ndarray:
    pipeline = PipelineConfig()
    errors = []
    for seed in range(seeds):
        config = GenerateConfig(seed=seed, jitter=0.0, noise_snr_db=snr_db)
        record = make_record(config, 0, 0)
        analysis = analyze_signal(record.signal, pipeline)
        estimate = sps_to_wave_shape(analysis.sps_aligned)
        reference = sps_to_wave_shape(normalize_sps(align_phase(sps_from_shape(record.shape))))
        errors.append(shape_l2_distance(estimate, reference))
    return np.asarray(errors)


def check_shape(seeds: int) -> tuple[bool, str]:
    clean = float(np.median(_shape_errors(seeds, None)))
    noisy = float(np.median(_shape_errors(seeds, 0.0)))
    return clean <= 0.05 and noisy <= 0.15, f"median L2 error {clean:.4f} clean, {noisy:.4f} at 0 dB"


def check_estimator() -> tuple[bool, str]:
    rng = np.random.default_rng(7)
    n, cap_d = 800, 4
    amp = 1.0 + 0.1 * rng.standard_normal(n) ** 2
    phase = np.cumsum(np.full(n, 0.012)) + 0.3
    arg = 2.0 * np.pi * np.multiply.outer(np.arange(1, cap_d + 1), phase)
    rows = np.vstack([amp[None, :], amp * np.cos(arg), amp * np.sin(arg)])
    design = DesignMatrix(rows=rows, cap_d=cap_d, frames=np.arange(n))
    gamma = rng.standard_normal(2 * cap_d + 1)
    y = gamma @ rows
    sps = estimate_sps(y, design)
    rel = float(np.linalg.norm(sps.gamma - gamma) / np.linalg.norm(gamma))

    noisy = y + 0.01 * rng.standard_normal(n)
    resid = noisy - reconstruct_fit(estimate_sps(noisy, design), design)
    ortho = float(np.max(np.abs(rows @ resid)) / np.linalg.norm(noisy))
    return rel <= 1e-8 and ortho <= 1e-8, f"relative error {rel:.2e}, residual projection {ortho:.2e}"


def check_harmonic_power() -> tuple[bool, str]:
    record = make_record(GenerateConfig(seed=0, jitter=0.0), 0, 0)
    analysis = analyze_signal(record.signal, PipelineConfig(cap_d=5))
    truth = normalize_sps(sps_from_shape(record.shape)).harmonic_power
    est = analysis.sps_aligned.harmonic_power
    err = float(np.max(np.abs(est - truth)) / truth.sum())
    return err <= 0.02, f"max power deviation {err:.4f} of total"


def _pair_count_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = sum((p > q) + 0.5 * (p == q) for p, q in itertools.product(pos, neg))
    return wins / (pos.size * neg.size)


def check_auc(trials: int) -> tuple[bool, str]:
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(trials):
        n = int(rng.integers(2, 13))
        labels = rng.permutation(np.arange(n) % 2)
        # Coarse scores so ties occur.
        scores = rng.integers(0, 5, n).astype(np.float64)
        worst = max(worst, abs(roc_analyze(scores, labels).auc - _pair_count_auc(scores, labels)))
    return worst <= 1e-12, f"max |AUC - U/(n1 n0)| = {worst:.1e} over {trials} datasets"


def check_pls() -> tuple[bool, str]:
    rng = np.random.default_rng(3)
    x = rng.standard_normal((30, 4))
    y = (x[:, 0] + 0.5 * rng.standard_normal(30) > 0).astype(int)
    model = fit_pls(x, y, n_components=4)
    design = np.column_stack([np.ones(30), x])
    ols = np.linalg.solve(design.T @ design, design.T @ y)
    err = float(np.max(np.abs(model.coeffs - ols)))
    return err <= 1e-8, f"max coefficient difference {err:.1e}"


def check_anova(trials: int, n_perm: int) -> tuple[bool, str]:
    rejections = 0
    for trial in range(trials):
        rng = np.random.default_rng(derive_seed(trial, "generate"))
        a = rng.standard_normal((10, 7))
        b = rng.standard_normal((10, 7))
        rejections += permutation_functional_anova([a, b], n_perm=n_perm, seed=trial) < 0.05
    rng = np.random.default_rng(99)
    shifted = permutation_functional_anova(
        [rng.standard_normal((10, 7)), rng.standard_normal((10, 7)) + 5.0], n_perm=n_perm, seed=1
    )
    ok = rejections <= 0.10 * trials and shifted <= 0.01
    return ok, f"{rejections}/{trials} null rejections, shifted p = {shifted:.4f}"


def check_determinism() -> tuple[bool, str]:
    record = make_record(GenerateConfig(seed=5, noise_snr_db=0.0), 3, 1)
    config = PipelineConfig(seed=5)
    texts = []
    for _ in range(2):
        entry = signal_entry(record.signal_id, analyze_signal(record.signal, config))
        texts.append(report_to_json(AnalysisReport(signals=[entry])))
    return texts[0] == texts[1], "reports byte-identical" if texts[0] == texts[1] else "reports differ"


def build_checks(args: argparse.Namespace) -> dict[str, Callable[[], tuple[bool, str]]]:
    return {
        "tone": check_tone,
        "concentration": check_concentration,
        "noise": lambda: check_noise(args.seeds),
        "if": check_wandering_if,
        "shape": lambda: check_shape(args.seeds),
        "estimator": check_estimator,
        "power": check_harmonic_power,
        "auc": lambda: check_auc(args.trials),
        "pls": check_pls,
        "anova": lambda: check_anova(args.anova_trials, args.n_perm),
        "determinism": check_determinism,
    }


def main() -> int:
    args = parse_args()
    checks = build_checks(args)
    selected = [name.strip() for name in args.only.split(",") if name.strip()] or list(checks)
    unknown = [name for name in selected if name not in checks]
    if unknown:
        print(f"[!] Unknown checks: {', '.join(unknown)} (choose from {', '.join(checks)})")
        return 2

    failures = 0
    for name in selected:
        print(f"[*] {name} ...")
        started = time.perf_counter()
        try:
            ok, detail = checks[name]()
        except Exception as e:
            ok, detail = False, f"{type(e).__name__}: {e}"
        status = "PASS" if ok else "FAIL"
        failures += not ok
        print(f"    {status:4}  {name:<13} {detail}  [{time.perf_counter() - started:.1f} s]")

    print(f"[i] {len(selected) - failures}/{len(selected)} checks passed")
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())
