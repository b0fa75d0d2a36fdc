"""Component recovery: amplitude and phase from the SST band around a ridge."""

from dataclasses import dataclass
import logging

import numpy as np

from app.errors import EmptyBand, GridMismatch, InvalidComponent
from app.tf_engine import TFRepresentation

logger = logging.getLogger(__name__)

DEFAULT_RECON_BAND = 0.06  # Hz, about 3 bins of the default grid


@dataclass(frozen=True, eq=False)
class RecoveredComponent:
    complex_track: np.ndarray
    amp: np.ndarray
    phase: np.ndarray  # cycles, unwrapped
    inst_freq: np.ndarray  # Hz
    time_axis: np.ndarray
    interpolated: np.ndarray  # frames filled from neighbours
    boundary: np.ndarray

    def __len__(self) -> int:
        return self.amp.size

    @property
    def interior(self) -> np.ndarray:
        return ~self.boundary


def unwrap_cycles(wrapped: np.ndarray) -> np.ndarray:
    """Unwrap a phase in cycles so every step lies in (-0.5, 0.5]."""
    steps = np.diff(wrapped)
    steps = steps - np.ceil(steps - 0.5)
    return wrapped[0] + np.concatenate(([0.0], np.cumsum(steps)))


def differentiate_phase(phase: np.ndarray, frame_dt: float) -> np.ndarray:
    """d(phase)/dt in Hz: central differences inside, one-sided at both ends."""
    phase = np.asarray(phase, dtype=np.float64)
    if phase.size < 3:
        raise InvalidComponent("need at least 3 phase samples to differentiate")
    return np.gradient(phase, frame_dt)


def _fill_empty(track: np.ndarray, empty: np.ndarray) -> np.ndarray:
    good = np.flatnonzero(~empty)
    if good.size == 0:
        raise EmptyBand("no frame has SST energy inside the reconstruction band")
    if not empty.any():
        return track
    frames = np.arange(track.size)
    real = np.interp(frames, good, track.real[good])
    imag = np.interp(frames, good, track.imag[good])
    logger.warning(f"Interpolated {int(empty.sum())} frames with an empty reconstruction band")
    return real + 1j * imag


def reconstruct(sst: TFRepresentation, if_track: np.ndarray, band_hz: float = DEFAULT_RECON_BAND) -> RecoveredComponent:
    """Recover R = A exp(i 2 pi phi) from the SST bins within band_hz of the IF track.

    S already holds bin integrals (coefficient times d_eta), so the band sum
    integrates the density over xi. The factor 2 restores the real signal's
    amplitude from its positive-frequency half, so 2 cos(2 pi 1.2 t) gives A = 2.
    """
    if sst.kind != "SST":
        raise GridMismatch(f"reconstruction expects an SST, got {sst.kind}")
    if not band_hz > 0:
        raise InvalidComponent("band_hz must be positive")
    if_track = np.asarray(if_track, dtype=np.float64)
    if if_track.shape != (sst.n_frames,):
        raise GridMismatch(f"IF track has shape {if_track.shape}, expected ({sst.n_frames},)")

    h0 = (2.0 * np.pi * sst.window_sigma) ** -0.5
    in_band = np.abs(sst.freq_axis[None, :] - if_track[:, None]) <= band_hz
    track = 2.0 / h0 * np.sum(np.where(in_band, sst.values, 0.0), axis=1)
    empty = ~in_band.any(axis=1) | (track == 0)
    track = _fill_empty(track, empty)

    amp = np.abs(track)
    phase = unwrap_cycles(np.mod(np.angle(track) / (2.0 * np.pi), 1.0))
    interior = np.flatnonzero(~sst.boundary)
    anchor = interior[0] if interior.size else 0
    phase = phase - np.floor(phase[anchor])

    inst_freq = differentiate_phase(phase, sst.frame_dt)
    return RecoveredComponent(
        complex_track=track,
        amp=amp,
        phase=phase,
        inst_freq=inst_freq,
        time_axis=sst.time_axis,
        interpolated=empty,
        boundary=sst.boundary,
    )
