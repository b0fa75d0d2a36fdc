"""Gaussian-window STFT, reassignment frequency and synchrosqueezing.

Conventions: a frame centred at t_m sees offsets tau_j = j / fs, j = -L..L, and

    V[m, k] = sum_j f(t_m + tau_j) h(tau_j) exp(-i 2 pi eta_k tau_j) dt

so that a tone exp(i 2 pi xi t) gives V = exp(i 2 pi xi t_m) h_hat(eta_k - xi):
the coefficient carries the signal phase and its slot sits at +xi. With the
time-reversed derivative window h'(-tau) the time derivative is
d/dt V = V^(h') + i 2 pi eta V, and the reassignment frequency is
omega = Re[-i d/dt V / (2 pi V)].
"""

from dataclasses import dataclass
from typing import Literal, Optional, Tuple
import logging

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from app.errors import EmptySignal, GridMismatch, InvalidComponent
from app.model_core import SampledSignal

logger = logging.getLogger(__name__)

DEFAULT_SIGMA = 0.5
DEFAULT_HALF_WIDTH_SIGMAS = 4.0
DEFAULT_N_BINS = 512
DEFAULT_FREQ_MAX = 10.0
DEFAULT_GAMMA_THRESH_REL = 1e-8
# Frames per matrix product; fixed so results do not depend on input length.
FRAME_BLOCK = 2048


@dataclass(frozen=True, eq=False)
class TFRepresentation:
    """Complex time-frequency matrix (n_frames x n_bins) with its grid."""

    values: np.ndarray
    time_axis: np.ndarray
    freq_axis: np.ndarray
    kind: Literal["STFT", "SST"]
    window_sigma: float
    hop: int
    sample_rate: float
    boundary: np.ndarray  # True for frames within the edge margin
    # SST only: |V|-weighted mean omega of the cells squeezed into each bin (NaN when empty).
    bin_omega: Optional[np.ndarray] = None

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_bins(self) -> int:
        return self.values.shape[1]

    @property
    def freq_step(self) -> float:
        return float(self.freq_axis[1] - self.freq_axis[0])

    @property
    def frame_dt(self) -> float:
        return self.hop / self.sample_rate

    @property
    def interior(self) -> np.ndarray:
        return ~self.boundary

    def magnitude(self) -> np.ndarray:
        return np.abs(self.values)


@dataclass(frozen=True, eq=False)
class ReassignMap:
    omega: np.ndarray  # Hz, n_frames x n_bins
    valid: np.ndarray  # bool, where |V| > threshold
    threshold: float


def gaussian_window(
    sigma: float,
    sample_rate: float,
    half_width_sigmas: float = DEFAULT_HALF_WIDTH_SIGMAS,
) -> np.ndarray:
    """h(t) = (2 pi sigma)^(-1/2) exp(-t^2 / sigma^2) sampled on [-k sigma, k sigma]."""
    if not sigma > 0:
        raise InvalidComponent("sigma must be positive")
    half = int(np.floor(half_width_sigmas * sigma * sample_rate + 1e-9))
    tau = np.arange(-half, half + 1) / sample_rate
    return (2.0 * np.pi * sigma) ** -0.5 * np.exp(-(tau**2) / sigma**2)


def gaussian_window_derivative(
    sigma: float,
    sample_rate: float,
    half_width_sigmas: float = DEFAULT_HALF_WIDTH_SIGMAS,
) -> np.ndarray:
    """h'(t) = -2 t / sigma^2 h(t) on the same support as gaussian_window."""
    h = gaussian_window(sigma, sample_rate, half_width_sigmas)
    half = (h.size - 1) // 2
    tau = np.arange(-half, half + 1) / sample_rate
    return -2.0 * tau / sigma**2 * h


def frequency_grid(n_bins: int, freq_max: float) -> np.ndarray:
    if n_bins < 2:
        raise InvalidComponent("n_bins must be >= 2")
    return np.linspace(0.0, freq_max, n_bins)


def boundary_mask(time_axis: np.ndarray, duration: float, margin: float) -> np.ndarray:
    """Frames closer than ``margin`` seconds to either end of the record."""
    return (time_axis < margin) | (time_axis > duration - margin)


def _windowed_transform(
    samples: np.ndarray,
    window: np.ndarray,
    freqs: np.ndarray,
    sample_rate: float,
    hop: int,
) -> np.ndarray:
    """sum_j x(t_m + tau_j) window(tau_j) exp(-i 2 pi eta tau_j) dt for every frame."""
    half = (window.size - 1) // 2
    tau = np.arange(-half, half + 1) / sample_rate
    phase = 2.0 * np.pi * np.multiply.outer(tau, freqs)
    dt = 1.0 / sample_rate
    kernel_re = (window * dt)[:, None] * np.cos(phase)
    kernel_im = -(window * dt)[:, None] * np.sin(phase)

    padded = np.pad(samples, half)
    frames = sliding_window_view(padded, window.size)[::hop]
    out = np.empty((frames.shape[0], freqs.size), dtype=np.complex128)
    for start in range(0, frames.shape[0], FRAME_BLOCK):
        block = np.ascontiguousarray(frames[start : start + FRAME_BLOCK])
        out[start : start + FRAME_BLOCK] = block @ kernel_re + 1j * (block @ kernel_im)
    return out


def _check_grid(signal: SampledSignal, hop: int, n_bins: int, freq_max: float):
    if len(signal) == 0:
        raise EmptySignal("cannot transform an empty signal")
    if hop < 1:
        raise InvalidComponent("hop must be >= 1")
    if n_bins < 2:
        raise InvalidComponent("n_bins must be >= 2")
    if freq_max > signal.sample_rate / 2.0 + 1e-12:
        raise InvalidComponent(
            f"freq_max {freq_max} Hz exceeds Nyquist {signal.sample_rate / 2.0} Hz"
        )


def _make_tf(
    values: np.ndarray,
    signal: SampledSignal,
    freqs: np.ndarray,
    sigma: float,
    hop: int,
    boundary_sigmas: float,
    kind: str = "STFT",
) -> TFRepresentation:
    time_axis = np.arange(values.shape[0]) * hop / signal.sample_rate
    duration = (len(signal) - 1) / signal.sample_rate
    return TFRepresentation(
        values=values,
        time_axis=time_axis,
        freq_axis=freqs,
        kind=kind,
        window_sigma=float(sigma),
        hop=int(hop),
        sample_rate=signal.sample_rate,
        boundary=boundary_mask(time_axis, duration, boundary_sigmas * sigma),
    )


def stft(
    signal: SampledSignal,
    sigma: float = DEFAULT_SIGMA,
    hop: int = 1,
    n_bins: int = DEFAULT_N_BINS,
    freq_max: float = DEFAULT_FREQ_MAX,
    half_width_sigmas: float = DEFAULT_HALF_WIDTH_SIGMAS,
    boundary_sigmas: float = DEFAULT_HALF_WIDTH_SIGMAS,
) -> TFRepresentation:
    """Gaussian-window STFT on a uniform [0, freq_max] grid of n_bins bins."""
    _check_grid(signal, hop, n_bins, freq_max)
    freqs = frequency_grid(n_bins, freq_max)
    window = gaussian_window(sigma, signal.sample_rate, half_width_sigmas)
    values = _windowed_transform(signal.samples, window, freqs, signal.sample_rate, hop)
    return _make_tf(values, signal, freqs, sigma, hop, boundary_sigmas)


def _reassign_from(
    values: np.ndarray,
    values_dh: np.ndarray,
    freqs: np.ndarray,
    gamma_thresh: Optional[float],
    gamma_thresh_rel: float,
) -> ReassignMap:
    magnitude = np.abs(values)
    if gamma_thresh is None:
        gamma_thresh = gamma_thresh_rel * float(magnitude.max(initial=0.0))
    valid = magnitude > gamma_thresh
    d_t = values_dh + 2j * np.pi * freqs[None, :] * values
    omega = np.full(values.shape, -np.inf)
    omega[valid] = np.real(-1j * d_t[valid] / (2.0 * np.pi * values[valid]))
    return ReassignMap(omega=omega, valid=valid, threshold=float(gamma_thresh))


def stft_with_reassignment(
    signal: SampledSignal,
    sigma: float = DEFAULT_SIGMA,
    hop: int = 1,
    n_bins: int = DEFAULT_N_BINS,
    freq_max: float = DEFAULT_FREQ_MAX,
    gamma_thresh: Optional[float] = None,
    gamma_thresh_rel: float = DEFAULT_GAMMA_THRESH_REL,
    half_width_sigmas: float = DEFAULT_HALF_WIDTH_SIGMAS,
    boundary_sigmas: float = DEFAULT_HALF_WIDTH_SIGMAS,
) -> Tuple[TFRepresentation, ReassignMap]:
    """STFT and its reassignment map from one pass over the frames."""
    _check_grid(signal, hop, n_bins, freq_max)
    freqs = frequency_grid(n_bins, freq_max)
    window = gaussian_window(sigma, signal.sample_rate, half_width_sigmas)
    # Time-reversed derivative window h'(-tau).
    reversed_dh = -gaussian_window_derivative(sigma, signal.sample_rate, half_width_sigmas)
    values = _windowed_transform(signal.samples, window, freqs, signal.sample_rate, hop)
    values_dh = _windowed_transform(signal.samples, reversed_dh, freqs, signal.sample_rate, hop)
    tf = _make_tf(values, signal, freqs, sigma, hop, boundary_sigmas)
    return tf, _reassign_from(values, values_dh, freqs, gamma_thresh, gamma_thresh_rel)


def reassign_freq(
    signal: SampledSignal,
    sigma: float = DEFAULT_SIGMA,
    hop: int = 1,
    n_bins: int = DEFAULT_N_BINS,
    gamma_thresh: Optional[float] = None,
    freq_max: float = DEFAULT_FREQ_MAX,
    gamma_thresh_rel: float = DEFAULT_GAMMA_THRESH_REL,
    half_width_sigmas: float = DEFAULT_HALF_WIDTH_SIGMAS,
) -> ReassignMap:
    """Reassignment frequency omega; cells with |V| <= gamma_thresh are invalid.

    ``gamma_thresh`` None means gamma_thresh_rel * max|V|.
    """
    _, rmap = stft_with_reassignment(
        signal,
        sigma=sigma,
        hop=hop,
        n_bins=n_bins,
        freq_max=freq_max,
        gamma_thresh=gamma_thresh,
        gamma_thresh_rel=gamma_thresh_rel,
        half_width_sigmas=half_width_sigmas,
    )
    return rmap


def synchrosqueeze(stft_out: TFRepresentation, rmap: ReassignMap) -> TFRepresentation:
    """Move each valid STFT coefficient (times d_eta) to the bin nearest its omega."""
    if stft_out.kind != "STFT":
        raise GridMismatch(f"expected an STFT input, got {stft_out.kind}")
    if rmap.omega.shape != stft_out.values.shape or rmap.valid.shape != stft_out.values.shape:
        raise GridMismatch(
            f"reassignment map {rmap.omega.shape} does not match STFT {stft_out.values.shape}"
        )
    n_frames, n_bins = stft_out.values.shape
    f0 = stft_out.freq_axis[0]
    d_eta = stft_out.freq_step

    target = np.full(rmap.omega.shape, -1, dtype=np.int64)
    target[rmap.valid] = np.rint((rmap.omega[rmap.valid] - f0) / d_eta).astype(np.int64)
    keep = rmap.valid & (target >= 0) & (target < n_bins)

    rows = np.broadcast_to(np.arange(n_frames)[:, None], target.shape)
    flat = (rows[keep] * n_bins + target[keep]).ravel()
    moved = stft_out.values[keep] * d_eta
    # bincount sums in input order, so the result is independent of any chunking.
    real = np.bincount(flat, weights=moved.real, minlength=n_frames * n_bins)
    imag = np.bincount(flat, weights=moved.imag, minlength=n_frames * n_bins)
    values = (real + 1j * imag).reshape(n_frames, n_bins)

    weight = np.abs(stft_out.values[keep])
    mass = np.bincount(flat, weights=weight, minlength=n_frames * n_bins)
    pulled = np.bincount(flat, weights=weight * rmap.omega[keep], minlength=n_frames * n_bins)
    bin_omega = np.divide(pulled, mass, out=np.full(mass.shape, np.nan), where=mass > 0)

    return TFRepresentation(
        values=values,
        time_axis=stft_out.time_axis,
        freq_axis=stft_out.freq_axis,
        kind="SST",
        window_sigma=stft_out.window_sigma,
        hop=stft_out.hop,
        sample_rate=stft_out.sample_rate,
        boundary=stft_out.boundary,
        bin_omega=bin_omega.reshape(n_frames, n_bins),
    )


def band_concentration(tf: TFRepresentation, centers: np.ndarray, half_width_bins: int) -> np.ndarray:
    """Share of per-frame energy within +-half_width_bins of ``centers`` (bin indices)."""
    energy = np.abs(tf.values) ** 2
    bins = np.arange(tf.n_bins)[None, :]
    centers = np.asarray(centers)[:, None]
    in_band = np.abs(bins - centers) <= half_width_bins
    total = energy.sum(axis=1)
    share = np.divide(
        (energy * in_band).sum(axis=1),
        total,
        out=np.zeros(tf.n_frames),
        where=total > 0,
    )
    return share


def nearest_bin(tf: TFRepresentation, freq_hz: float) -> int:
    return int(np.argmin(np.abs(tf.freq_axis - freq_hz)))
