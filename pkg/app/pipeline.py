"""Per-signal analysis chain and the batch/dataset stages built on it."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple
import json
import logging
import os

import numpy as np

from app.baselines import cross_check
from app.config import PipelineConfig, dump_config
from app.errors import AliasingRisk, DimensionMismatch, PulseSignatureError, TooFewSamples, error_code
from app.io_formats import (
    load_signal,
    read_labels,
    read_sps_dataset,
    save_tf,
    sps_to_dict,
    write_component_csv,
    write_gps_histogram,
    write_ridge_csv,
    write_roc_csv,
    write_sps_dataset,
)
from app.model_core import SampledSignal
from app.recovery import RecoveredComponent, reconstruct
from app.report import (
    AnalysisReport,
    BaselineSummary,
    DatasetStats,
    RidgeSummary,
    SignalEntry,
    SPSSummary,
    write_report,
)
from app.ridge import Ridge, extract_ridge, ridge_to_if
from app.shape_regression import (
    DesignMatrix,
    SPSRow,
    SPSVector,
    aggregate_by_subject,
    align_phase,
    build_design,
    estimate_sps,
    normalize_sps,
)
from app.stats import (
    fit_pls,
    loocv_accuracy,
    permutation_functional_anova,
    predict_scores,
    roc_analyze,
    save_model,
    select_n_components,
)
from app.tf_engine import TFRepresentation, band_concentration, stft_with_reassignment, synchrosqueeze

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_FATAL = 2
# Bins either side of the ridge counted as its neighbourhood.
CONCENTRATION_HALF_WIDTH = 2


@dataclass(frozen=True, eq=False)
class SignalAnalysis:
    signal: SampledSignal
    stft: TFRepresentation
    sst: TFRepresentation
    ridge: Ridge
    if_track: np.ndarray
    component: RecoveredComponent
    design: DesignMatrix
    sps: SPSVector
    sps_aligned: SPSVector

    @property
    def frames(self) -> np.ndarray:
        return self.design.frames


def analyze_signal(signal: SampledSignal, config: PipelineConfig) -> SignalAnalysis:
    """stft -> reassign -> synchrosqueeze -> ridge -> reconstruct -> design -> SPS -> align."""
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
    sst = synchrosqueeze(tf, rmap)
    ridge = extract_ridge(sst, smooth_penalty=config.ridge_penalty, band=config.ridge_band)
    if_track = ridge_to_if(ridge, refine=config.refine_ridge)
    nyquist = signal.sample_rate / 2.0
    if config.cap_d * float(if_track.max()) >= nyquist:
        raise AliasingRisk(f"harmonic {config.cap_d} of {if_track.max():.3f} Hz reaches Nyquist {nyquist} Hz")

    comp = reconstruct(sst, if_track, band_hz=config.recon_band)
    frames = np.flatnonzero(comp.interior) if config.exclude_boundary else None
    design = build_design(comp, cap_d=config.cap_d, frames=frames)
    y = signal.samples[:: config.hop][design.frames]
    sps = estimate_sps(y, design)
    aligned = normalize_sps(align_phase(sps))
    return SignalAnalysis(
        signal=signal,
        stft=tf,
        sst=sst,
        ridge=ridge,
        if_track=if_track,
        component=comp,
        design=design,
        sps=sps,
        sps_aligned=aligned,
    )


def _sps_summary(sps: SPSVector) -> SPSSummary:
    return SPSSummary(**sps_to_dict(sps))


def ridge_summary(analysis: SignalAnalysis, half_width_bins: int = CONCENTRATION_HALF_WIDTH) -> RidgeSummary:
    """IF statistics over the used frames and how much energy sits next to the ridge."""
    frames = analysis.frames
    if frames.size == 0:
        frames = np.arange(analysis.sst.n_frames)
    track = analysis.if_track[frames]
    bins = analysis.ridge.bin_index
    return RidgeSummary(
        mean_hz=float(track.mean()),
        min_hz=float(track.min()),
        max_hz=float(track.max()),
        std_hz=float(track.std()),
        mean_energy=float(analysis.ridge.energy[frames].mean()),
        objective=float(analysis.ridge.objective) if np.isfinite(analysis.ridge.objective) else None,
        sst_concentration=float(band_concentration(analysis.sst, bins, half_width_bins)[frames].mean()),
        stft_concentration=float(band_concentration(analysis.stft, bins, half_width_bins)[frames].mean()),
    )


def baseline_summary(analysis: SignalAnalysis) -> Optional[BaselineSummary]:
    """Classical cross-checks; a failing baseline never fails the signal."""
    try:
        check = cross_check(
            analysis.signal,
            analysis.component,
            analysis.sps,
            analysis.frames,
            hop=analysis.sst.hop,
        )
    except PulseSignatureError as e:
        logger.warning(f"Baseline cross-check skipped ({e.code}): {e}")
        return None
    return BaselineSummary(
        harmonic_shares=check.harmonic_shares.tolist(),
        sps_shares=check.sps_shares.tolist(),
        fold_residual=check.fold_residual,
        rate_error_hz=check.rate_error_hz,
        n_beats=check.n_beats,
    )


def signal_entry(signal_id: str, analysis: SignalAnalysis, source: str = "") -> SignalEntry:
    comp = analysis.component
    return SignalEntry(
        signal_id=signal_id,
        source=source,
        sample_rate=analysis.signal.sample_rate,
        n_samples=len(analysis.signal),
        sps=_sps_summary(analysis.sps),
        sps_aligned=_sps_summary(analysis.sps_aligned),
        ridge=ridge_summary(analysis),
        baseline=baseline_summary(analysis),
        condition_number=analysis.sps.condition_number,
        flags={
            "boundary_frames": int(comp.boundary.sum()),
            "interpolated_frames": int(comp.interpolated.sum()),
            "frames_used": int(analysis.frames.size),
        },
    )


def failed_entry(signal_id: str, exc: Exception, source: str = "") -> SignalEntry:
    return SignalEntry(signal_id=signal_id, source=source, status="failed", error=error_code(exc), detail=str(exc))


def _export_tracks(signal_id: str, analysis: SignalAnalysis, out_dir: str, export_tf: bool) -> Dict[str, str]:
    track_dir = os.path.join(out_dir, "tracks")
    os.makedirs(track_dir, exist_ok=True)
    exports = {
        "ridge": os.path.join(track_dir, f"{signal_id}_ridge.csv"),
        "component": os.path.join(track_dir, f"{signal_id}_component.csv"),
    }
    write_ridge_csv(analysis.ridge, exports["ridge"])
    write_component_csv(analysis.component, exports["component"])
    if export_tf:
        tf_dir = os.path.join(out_dir, "tf")
        os.makedirs(tf_dir, exist_ok=True)
        for name, tf in (("stft", analysis.stft), ("sst", analysis.sst)):
            paths = save_tf(tf, os.path.join(tf_dir, f"{signal_id}_{name}"))
            exports.update({f"{name}_{key}": path for key, path in paths.items()})
    return exports


def _analyze_one(
    path: str,
    config: PipelineConfig,
    out_dir: Optional[str],
    signal_format: Optional[str],
    position: str,
    labels: Dict[str, int],
) -> Tuple[SignalEntry, Optional[SPSRow]]:
    signal_id = os.path.splitext(os.path.basename(path))[0]
    try:
        signal = load_signal(path, format=signal_format)
        analysis = analyze_signal(signal, config)
        entry = signal_entry(signal_id, analysis, source=path)
        if out_dir:
            entry.exports = _export_tracks(signal_id, analysis, out_dir, config.export_tf)
    except PulseSignatureError as e:
        logger.error(f"Signal {signal_id} failed with {e.code}: {e}", exc_info=True)
        return failed_entry(signal_id, e, source=path), None
    except Exception as e:
        logger.error(f"Signal {signal_id} failed unexpectedly: {e}", exc_info=True)
        return failed_entry(signal_id, e, source=path), None

    label = labels.get(signal_id)
    entry.label = label
    row = SPSRow(
        signal_id=signal_id,
        gamma=analysis.sps_aligned.gamma,
        subject=signal_id,
        position=position,
        label=label,
    )
    return entry, row


def run_analyze(
    config: PipelineConfig,
    paths: Sequence[str],
    out_dir: Optional[str] = None,
    signal_format: Optional[str] = None,
    position: str = "",
    labels_path: Optional[str] = None,
) -> Tuple[AnalysisReport, List[SPSRow], int]:
    """Analyze every signal; failures are recorded, never raised.

    Results keep input order regardless of ``config.workers``. Returns the
    report, the SPS rows of successful signals and the exit code.
    """
    if not paths:
        raise TooFewSamples("no input signals")
    labels = read_labels(labels_path) if labels_path else {}
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)

    def _job(path: str):
        return _analyze_one(path, config, out_dir, signal_format, position, labels)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_job, paths))
    else:
        results = [_job(p) for p in paths]

    report = AnalysisReport(config=_config_dict(config), signals=[entry for entry, _ in results])
    rows = [row for _, row in results if row is not None]
    if out_dir:
        if rows:
            write_sps_dataset(rows, os.path.join(out_dir, "sps.csv"))
        write_report(report, os.path.join(out_dir, "report.json"))

    n_failed = len(report.failed)
    if n_failed == len(paths):
        code = EXIT_FATAL
    elif n_failed:
        code = EXIT_PARTIAL
    else:
        code = EXIT_OK
    logger.info(f"Analyzed {len(paths)} signals, {n_failed} failed")
    return report, rows, code


def _config_dict(config: PipelineConfig) -> dict:
    return json.loads(dump_config(config))


def _dataset_arrays(rows: Sequence[SPSRow], labels: Dict[str, int]) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    ids = [r.signal_id for r in rows]
    if len(labels) != len(rows) or set(labels) != set(ids):
        raise DimensionMismatch(f"{len(labels)} labels for {len(rows)} SPS rows, or signal ids differ")
    features = np.vstack([r.gamma for r in rows])
    y = np.array([labels[i] for i in ids], dtype=np.int64)
    return features, y, ids


def run_classify(
    config: PipelineConfig,
    sps_path: str,
    labels_path: str,
    out_dir: Optional[str] = None,
    position: Optional[str] = None,
    aggregate_subjects: bool = False,
) -> Tuple[AnalysisReport, int]:
    """Fit the GPS model and compute ROC/CI, LOOCV and the permutation ANOVA p-value."""
    rows = read_sps_dataset(sps_path)
    labels = read_labels(labels_path)
    if position:
        rows = [r for r in rows if r.position == position]
        labels = {r.signal_id: labels[r.signal_id] for r in rows if r.signal_id in labels}
        if not rows:
            raise TooFewSamples(f"no SPS rows at position {position!r}")
    if aggregate_subjects:
        rows = aggregate_by_subject(
            [SPSRow(r.signal_id, r.gamma, r.subject, r.position, labels.get(r.signal_id)) for r in rows]
        )
        labels = {r.signal_id: r.label for r in rows}
    features, y, ids = _dataset_arrays(rows, labels)
    report, _ = classify_dataset(config, features, y, ids, position=position, out_dir=out_dir)
    return report, EXIT_OK


def classify_dataset(
    config: PipelineConfig,
    features: np.ndarray,
    labels: np.ndarray,
    ids: Optional[Sequence[str]] = None,
    position: Optional[str] = None,
    out_dir: Optional[str] = None,
) -> Tuple[AnalysisReport, np.ndarray]:
    """Dataset stage on in-memory arrays; returns the report and training GPS scores."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or features.shape[0] != labels.size:
        raise DimensionMismatch(f"features {features.shape} do not match {labels.size} labels")
    ids = list(ids) if ids is not None else [f"row_{i:03d}" for i in range(labels.size)]
    seed = config.seed

    n_components = config.n_components
    if n_components is None and config.select_components:
        n_components = select_n_components(features, labels, seed=seed)
    model = fit_pls(features, labels, n_components=n_components, seed=seed)
    scores = predict_scores(model, features)
    roc = roc_analyze(scores, labels, n_boot=config.n_boot, seed=seed, workers=config.workers)

    loocv = None
    if labels.size >= 5:
        loocv = loocv_accuracy(features, labels, n_components=n_components, repeats=config.loocv_repeats, seed=seed)
    groups = [features[labels == 0], features[labels == 1]]
    anova_p = None
    if min(g.shape[0] for g in groups) >= 3:
        anova_p = permutation_functional_anova(groups, n_perm=config.n_perm, seed=seed)
    else:
        logger.warning("Skipping permutation ANOVA: a class has fewer than 3 members")

    stats = DatasetStats(
        n_samples=int(labels.size),
        n_features=int(features.shape[1]),
        n_components=model.n_components,
        position=position or None,
        coeffs=model.coeffs.tolist(),
        scores={sid: float(s) for sid, s in zip(ids, scores)},
        auc=roc.auc,
        ci_lo=roc.ci[0],
        ci_hi=roc.ci[1],
        optimal_threshold=roc.optimal_threshold,
        accuracy_at_optimal=roc.accuracy_at_optimal,
        loocv_accuracy=loocv,
        anova_p=anova_p,
    )
    report = AnalysisReport(config=_config_dict(config), dataset=stats)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        write_roc_csv(roc, os.path.join(out_dir, "roc.csv"))
        write_gps_histogram(scores, labels, os.path.join(out_dir, "gps_histogram.csv"))
        save_model(model, os.path.join(out_dir, "model.json"))
        write_report(report, os.path.join(out_dir, "classify_report.json"))
    return report, scores
