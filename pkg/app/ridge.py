"""Dominant-curve extraction from a synchrosqueezed representation.

The curve maximizes

    sum_m log(|S[m, c_m]|^2 + floor) - penalty * sum_m (f[c_{m+1}] - f[c_m])^2

over all bin paths and is found exactly by dynamic programming. Ties resolve
to the lower bin index.
"""

from dataclasses import dataclass
from typing import Optional, Tuple
import logging

import numpy as np

from app.errors import AllBelowFloor, EmptyBand, GridMismatch
from app.tf_engine import TFRepresentation

logger = logging.getLogger(__name__)

DEFAULT_BAND = (0.5, 3.0)
DEFAULT_PENALTY = 1.0
FLOOR_REL = 1e-12
# Side bins weaker than this share of the ridge bin do not support a parabola.
SIDE_REL = 1e-2


@dataclass(frozen=True, eq=False)
class Ridge:
    freq_hz: np.ndarray
    bin_index: np.ndarray
    energy: np.ndarray  # |S| on the ridge
    side_energy: np.ndarray  # |S| at bin - 1 and bin + 1 (0 off the grid), shape (n_frames, 2)
    time_axis: np.ndarray
    freq_step: float
    band: Tuple[float, float]
    objective: float = float("nan")
    omega: Optional[np.ndarray] = None  # squeezed mean frequency in the ridge bin, Hz

    def __len__(self) -> int:
        return self.freq_hz.size


def band_bins(freq_axis: np.ndarray, band: Optional[Tuple[float, float]]) -> np.ndarray:
    """Indices of grid bins inside ``band`` (whole grid when band is None)."""
    if band is None:
        return np.arange(freq_axis.size)
    lo, hi = band
    idx = np.flatnonzero((freq_axis >= lo) & (freq_axis <= hi))
    if idx.size == 0:
        raise EmptyBand(f"no frequency bins inside band [{lo}, {hi}] Hz")
    return idx


def best_path(score: np.ndarray, transition: np.ndarray) -> np.ndarray:
    """Exact maximizer of sum score[m, c_m] - sum transition[c_m, c_{m+1}].

    ``score`` is (n_frames, n_states), ``transition`` (n_states, n_states) with
    transition[i, j] the cost of moving from state i to state j.
    """
    n_frames, n_states = score.shape
    back = np.zeros((n_frames, n_states), dtype=np.int64)
    acc = score[0].copy()
    for m in range(1, n_frames):
        # cand[i, j]: best total ending in i at m - 1, then moving to j.
        cand = acc[:, None] - transition
        prev = np.argmax(cand, axis=0)
        back[m] = prev
        acc = score[m] + cand[prev, np.arange(n_states)]
    path = np.empty(n_frames, dtype=np.int64)
    path[-1] = int(np.argmax(acc))
    for m in range(n_frames - 1, 0, -1):
        path[m - 1] = back[m, path[m]]
    return path


def ridge_objective(magnitude: np.ndarray, freqs: np.ndarray, path: np.ndarray, penalty: float, floor: float) -> float:
    """Objective value of a bin path (used to compare against exhaustive search)."""
    rows = np.arange(path.size)
    gain = np.sum(np.log(magnitude[rows, path] ** 2 + floor))
    jumps = np.diff(freqs[path])
    return float(gain - penalty * np.sum(jumps**2))


def extract_ridge(
    sst: TFRepresentation,
    smooth_penalty: float = DEFAULT_PENALTY,
    band: Optional[Tuple[float, float]] = DEFAULT_BAND,
) -> Ridge:
    """Penalized dynamic-programming ridge of an SST, restricted to ``band``."""
    if sst.kind != "SST":
        raise GridMismatch(f"ridge extraction expects an SST, got {sst.kind}")
    if band is not None and (band[0] > sst.freq_axis[-1] or band[1] < sst.freq_axis[0]):
        raise EmptyBand(f"band {band} lies outside the frequency grid")
    idx = band_bins(sst.freq_axis, band)
    magnitude = np.abs(sst.values)
    sub = magnitude[:, idx]
    energy_sq = sub**2
    peak = float(energy_sq.max(initial=0.0))
    if peak == 0.0:
        raise AllBelowFloor("SST has no energy inside the ridge band")
    floor = FLOOR_REL * peak

    freqs = sst.freq_axis[idx]
    transition = smooth_penalty * np.subtract.outer(freqs, freqs) ** 2
    local = best_path(np.log(energy_sq + floor), transition)
    bins = idx[local]
    objective = ridge_objective(sub, freqs, local, smooth_penalty, floor)

    rows = np.arange(sst.n_frames)
    padded = np.pad(magnitude, ((0, 0), (1, 1)))
    side = np.stack([padded[rows, bins], padded[rows, bins + 2]], axis=1)
    used_band = (float(freqs[0]), float(freqs[-1])) if band is None else (float(band[0]), float(band[1]))
    logger.debug(f"Ridge extracted over {idx.size} bins, {sst.n_frames} frames, objective {objective:.6g}")
    return Ridge(
        freq_hz=sst.freq_axis[bins],
        bin_index=bins,
        energy=magnitude[rows, bins],
        side_energy=side,
        time_axis=sst.time_axis,
        freq_step=sst.freq_step,
        band=used_band,
        objective=objective,
        omega=None if sst.bin_omega is None else sst.bin_omega[rows, bins],
    )


def ridge_to_if(ridge: Ridge, refine: bool = True) -> np.ndarray:
    """Per-frame IF estimate in Hz.

    With ``refine`` the ridge bin is moved by the vertex of the parabola through
    |S| at bins (c-1, c, c+1), the offset limited to half a bin. Where a side
    bin is (nearly) empty the SST gives no parabola, and the squeezed mean
    frequency of the ridge bin is used instead when the ridge carries it. The
    result is clamped to the ridge band.
    """
    if not refine:
        return ridge.freq_hz.copy()
    left = ridge.side_energy[:, 0]
    right = ridge.side_energy[:, 1]
    center = ridge.energy
    denom = left - 2.0 * center + right
    offset = np.zeros_like(center)
    peaked = denom < 0
    offset[peaked] = 0.5 * (left[peaked] - right[peaked]) / denom[peaked]
    offset = np.clip(offset, -0.5, 0.5)
    refined = ridge.freq_hz + offset * ridge.freq_step
    if ridge.omega is not None:
        lone = (np.minimum(left, right) < SIDE_REL * center) & np.isfinite(ridge.omega)
        refined[lone] = ridge.omega[lone]
    return np.clip(refined, ridge.band[0], ridge.band[1])
