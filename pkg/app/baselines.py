"""Classical pulse-analysis baselines used to cross-check the adaptive estimates."""

from dataclasses import dataclass
from typing import Optional, Tuple
import logging

import numpy as np
from scipy.signal import find_peaks, periodogram

from app.errors import DimensionMismatch, EmptyBand, InvalidComponent, TooFewSamples, ZeroVariance
from app.model_core import SampledSignal
from app.recovery import RecoveredComponent
from app.shape_regression import SPSVector

logger = logging.getLogger(__name__)

DEFAULT_BAND = (0.5, 3.0)
DEFAULT_MIN_DISTANCE_S = 0.33  # 180 bpm
DEFAULT_FOLD_BINS = 64


@dataclass(frozen=True, eq=False)
class BeatIntervals:
    peak_times: np.ndarray
    intervals: np.ndarray  # seconds between consecutive peaks
    rate_hz: np.ndarray  # 1 / interval
    rate_times: np.ndarray  # interval midpoints


def harmonic_power_spectrum(
    signal: SampledSignal,
    n_harmonics: int,
    fundamental_hz: Optional[float] = None,
    band: Tuple[float, float] = DEFAULT_BAND,
) -> np.ndarray:
    """Share of periodogram energy within +-f0/2 of each harmonic l f0, l = 1..n_harmonics."""
    if n_harmonics < 1:
        raise InvalidComponent("n_harmonics must be >= 1")
    freqs, power = periodogram(signal.samples, fs=signal.sample_rate, window="hann", detrend="constant")
    if fundamental_hz is None:
        in_band = (freqs >= band[0]) & (freqs <= band[1])
        if not in_band.any():
            raise EmptyBand(f"no periodogram bins in band {band}")
        candidates = np.flatnonzero(in_band)
        fundamental_hz = float(freqs[candidates[np.argmax(power[candidates])]])
    if not fundamental_hz > 0:
        raise InvalidComponent("fundamental_hz must be positive")

    energies = np.array(
        [
            power[np.abs(freqs - ell * fundamental_hz) <= fundamental_hz / 2.0].sum()
            for ell in range(1, n_harmonics + 1)
        ]
    )
    total = energies.sum()
    if total <= 0:
        raise ZeroVariance("signal has no energy near its harmonics")
    return energies / total


def beat_intervals(
    signal: SampledSignal,
    min_distance_s: float = DEFAULT_MIN_DISTANCE_S,
    prominence: Optional[float] = None,
) -> BeatIntervals:
    """Peak-to-peak beat lengths and the rate they imply.

    ``prominence`` defaults to half the signal's standard deviation.
    """
    samples = signal.samples
    if prominence is None:
        prominence = 0.5 * float(np.std(samples))
    distance = max(1, int(round(min_distance_s * signal.sample_rate)))
    peaks, _ = find_peaks(samples, distance=distance, prominence=prominence)
    if peaks.size < 2:
        raise TooFewSamples(f"found {peaks.size} peaks, need at least 2")
    times = peaks / signal.sample_rate
    intervals = np.diff(times)
    return BeatIntervals(
        peak_times=times,
        intervals=intervals,
        rate_hz=1.0 / intervals,
        rate_times=(times[1:] + times[:-1]) / 2.0,
    )


def fold_cycle(
    signal_frames: np.ndarray,
    comp: RecoveredComponent,
    n_bins: int = DEFAULT_FOLD_BINS,
    frames: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Mean of Y / A binned by phase mod 1; empty bins are filled circularly."""
    idx = np.arange(len(comp)) if frames is None else np.asarray(frames, dtype=np.int64)
    y = np.asarray(signal_frames, dtype=np.float64)
    if y.shape != idx.shape:
        raise DimensionMismatch(f"{y.size} signal frames for {idx.size} component frames")
    if n_bins < 2:
        raise InvalidComponent("n_bins must be >= 2")

    cycle_pos = np.mod(comp.phase[idx], 1.0)
    slots = np.minimum((cycle_pos * n_bins).astype(np.int64), n_bins - 1)
    counts = np.bincount(slots, minlength=n_bins)
    sums = np.bincount(slots, weights=y / comp.amp[idx], minlength=n_bins)
    grid = (np.arange(n_bins) + 0.5) / n_bins

    filled = counts > 0
    if not filled.any():
        raise TooFewSamples("no frames to fold")
    mean = np.zeros(n_bins)
    mean[filled] = sums[filled] / counts[filled]
    if not filled.all():
        logger.debug(f"fold_cycle: interpolating {int((~filled).sum())} empty phase bins")
        mean[~filled] = np.interp(grid[~filled], grid[filled], mean[filled], period=1.0)
    return grid, mean


@dataclass(frozen=True, eq=False)
class BaselineCheck:
    harmonic_shares: np.ndarray  # periodogram energy share per harmonic
    sps_shares: np.ndarray  # the same shares from the SPS
    fold_residual: float  # |folded cycle - SPS curve| / |SPS curve|
    rate_error_hz: Optional[float]  # mean |beat rate - recovered IF| at beat midpoints
    n_beats: int


def cross_check(
    signal: SampledSignal,
    comp: RecoveredComponent,
    sps: SPSVector,
    frames: np.ndarray,
    hop: int = 1,
) -> BaselineCheck:
    """Classical estimates next to the adaptive ones for the same signal.

    ``sps`` is the raw (unaligned) estimate, so the folded Y / A cycle and the
    SPS curve share the recovered phase origin.
    """
    frames = np.asarray(frames, dtype=np.int64)
    if frames.size == 0:
        raise TooFewSamples("no frames to cross-check")
    fundamental = float(np.median(comp.inst_freq[frames]))
    shares = harmonic_power_spectrum(signal, sps.cap_d, fundamental_hz=fundamental)
    total = float(sps.harmonic_power.sum())
    if total <= 0:
        raise ZeroVariance("SPS has no harmonic power")

    grid, cycle = fold_cycle(signal.samples[::hop][frames], comp, frames=frames)
    arg = 2.0 * np.pi * np.multiply.outer(grid, np.arange(1, sps.cap_d + 1))
    fitted = sps.gamma[0] + np.cos(arg) @ sps.alpha[1:] + np.sin(arg) @ sps.beta
    scale = float(np.linalg.norm(fitted))
    if scale == 0:
        raise ZeroVariance("SPS curve is identically zero")
    fold_residual = float(np.linalg.norm(cycle - fitted) / scale)

    rate_error = None
    n_beats = 0
    try:
        beats = beat_intervals(signal)
    except TooFewSamples as e:
        logger.warning(f"Skipping beat-rate cross-check: {e}")
    else:
        n_beats = int(beats.peak_times.size)
        times = comp.time_axis[frames]
        inside = (beats.rate_times >= times.min()) & (beats.rate_times <= times.max())
        if inside.any():
            at_beats = np.interp(beats.rate_times[inside], comp.time_axis, comp.inst_freq)
            rate_error = float(np.mean(np.abs(beats.rate_hz[inside] - at_beats)))
    return BaselineCheck(
        harmonic_shares=shares,
        sps_shares=sps.harmonic_power / total,
        fold_residual=fold_residual,
        rate_error_hz=rate_error,
        n_beats=n_beats,
    )
