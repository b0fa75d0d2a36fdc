"""Functional least-squares estimate of the wave-shape Fourier coefficients.

Given the recovered amplitude A and phase phi (cycles), the regressors are

    c_0 = A,  c_l = A cos(2 pi l phi),  d_l = A sin(2 pi l phi),  l = 1..D

and the signal Y is fitted as gamma^T c. The resulting gamma is the spectral
pulse signature (SPS): alpha_0, alpha_1..alpha_D, beta_1..beta_D.
"""

from collections import OrderedDict
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional
import logging

import numpy as np
from scipy import linalg

from app.errors import DimensionMismatch, IllConditioned, InvalidComponent, TooShort, ZeroFundamental
from app.model_core import WaveShape, make_wave_shape
from app.recovery import RecoveredComponent

logger = logging.getLogger(__name__)

DEFAULT_CAP_D = 6
MAX_CONDITION = 1e8
# Minimum frames per unknown coefficient.
MIN_FRAMES_PER_COEFF = 4


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    rows: np.ndarray  # (2D + 1, N): c_0, c_1..c_D, d_1..d_D
    cap_d: int
    frames: np.ndarray  # indices of the frames used

    @property
    def n_samples(self) -> int:
        return self.rows.shape[1]


@dataclass(frozen=True, eq=False)
class SPSVector:
    gamma: np.ndarray
    harmonic_power: np.ndarray
    harmonic_phase: np.ndarray
    aligned: bool = False
    normalized: bool = False
    condition_number: float = float("nan")

    @property
    def cap_d(self) -> int:
        return (self.gamma.size - 1) // 2

    @property
    def alpha(self) -> np.ndarray:
        return self.gamma[: self.cap_d + 1]

    @property
    def beta(self) -> np.ndarray:
        return self.gamma[self.cap_d + 1 :]


@dataclass(frozen=True, eq=False)
class SPSRow:
    """One dataset row: an SPS vector with its bookkeeping columns."""

    signal_id: str
    gamma: np.ndarray
    subject: str = ""
    position: str = ""
    label: Optional[int] = None


def _harmonics(gamma: np.ndarray):
    cap_d = (gamma.size - 1) // 2
    alpha = gamma[1 : cap_d + 1]
    beta = gamma[cap_d + 1 :]
    power = (alpha**2 + beta**2) / 4.0
    phase = np.mod(np.arctan2(-beta, alpha), 2.0 * np.pi)
    return power, phase


def _sps(gamma: np.ndarray, **kwargs) -> SPSVector:
    power, phase = _harmonics(gamma)
    return SPSVector(gamma=gamma, harmonic_power=power, harmonic_phase=phase, **kwargs)


def build_design(
    comp: RecoveredComponent,
    cap_d: int = DEFAULT_CAP_D,
    frames: Optional[np.ndarray] = None,
) -> DesignMatrix:
    """Regressor rows for the frames in ``frames`` (all frames when None)."""
    if cap_d < 1:
        raise InvalidComponent("cap_d must be >= 1")
    idx = np.arange(len(comp)) if frames is None else np.asarray(frames, dtype=np.int64)
    n = idx.size
    needed = MIN_FRAMES_PER_COEFF * (2 * cap_d + 1)
    if n < needed:
        raise TooShort(f"{n} frames for {2 * cap_d + 1} coefficients, need at least {needed}")

    amp = comp.amp[idx]
    arg = 2.0 * np.pi * np.multiply.outer(np.arange(1, cap_d + 1), comp.phase[idx])
    rows = np.vstack([amp[None, :], amp * np.cos(arg), amp * np.sin(arg)])
    return DesignMatrix(rows=rows, cap_d=int(cap_d), frames=idx)


def estimate_sps(signal_frames: np.ndarray, design: DesignMatrix) -> SPSVector:
    """gamma = (Y c^T)(c c^T)^-1, solved by least squares on c^T."""
    y = np.asarray(signal_frames, dtype=np.float64)
    if y.shape != (design.n_samples,):
        raise DimensionMismatch(f"signal has {y.size} frames, design has {design.n_samples}")
    gram = design.rows @ design.rows.T
    singular = linalg.svdvals(gram)
    cond = float(singular[0] / singular[-1]) if singular[-1] > 0 else np.inf
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise IllConditioned(f"design Gram matrix condition number {cond:.3g} exceeds {MAX_CONDITION:g}")
    gamma, *_ = linalg.lstsq(design.rows.T, y)
    logger.debug(f"SPS estimated with D={design.cap_d}, cond={cond:.3g}")
    return _sps(gamma, condition_number=cond)


def align_phase(sps: SPSVector) -> SPSVector:
    """Rotate harmonic phases so theta_1 = 0: theta_l <- theta_l - l theta_1."""
    amps = np.sqrt(sps.harmonic_power)  # a_l
    if amps[0] == 0:
        raise ZeroFundamental("cannot align an SPS with a zero fundamental")
    ell = np.arange(1, sps.cap_d + 1)
    theta = np.mod(sps.harmonic_phase - ell * sps.harmonic_phase[0], 2.0 * np.pi)
    theta[0] = 0.0
    gamma = np.concatenate(([sps.gamma[0]], 2.0 * amps * np.cos(theta), -2.0 * amps * np.sin(theta)))
    return replace(
        sps,
        gamma=gamma,
        harmonic_power=sps.harmonic_power.copy(),
        harmonic_phase=theta,
        aligned=True,
    )


def reconstruct_fit(sps: SPSVector, design: DesignMatrix) -> np.ndarray:
    """Fitted signal gamma^T c."""
    if sps.gamma.size != design.rows.shape[0]:
        raise DimensionMismatch(f"SPS has {sps.gamma.size} entries, design has {design.rows.shape[0]} rows")
    return sps.gamma @ design.rows


def normalize_sps(sps: SPSVector) -> SPSVector:
    """Scale gamma to unit wave-shape energy; the A/s scale split is not identifiable."""
    energy = float(sps.gamma[0] ** 2 + 0.5 * np.sum(sps.gamma[1:] ** 2))
    if energy <= 0:
        raise ZeroFundamental("cannot normalize an all-zero SPS")
    return replace(
        sps,
        gamma=sps.gamma / np.sqrt(energy),
        harmonic_power=sps.harmonic_power / energy,
        normalized=True,
    )


def sps_from_shape(shape: WaveShape) -> SPSVector:
    """SPS holding a known shape's coefficients (reference for recovered estimates)."""
    return _sps(np.concatenate((shape.alpha, shape.beta)))


def sps_to_wave_shape(sps: SPSVector, delta: Optional[float] = None) -> WaveShape:
    """Unit-energy WaveShape from an SPS; delta None records the observed dominance ratio."""
    amps = np.sqrt(sps.harmonic_power)
    if delta is None:
        delta = float(np.max(amps[1:]) / amps[0]) if sps.cap_d > 1 and amps[0] > 0 else 0.0
    return make_wave_shape(sps.alpha, sps.beta, delta, normalize=True)


def aggregate_by_subject(rows: Iterable[SPSRow]) -> List[SPSRow]:
    """Mean SPS per (subject, position), in order of first appearance."""
    groups: "OrderedDict[tuple, list]" = OrderedDict()
    for row in rows:
        groups.setdefault((row.subject or row.signal_id, row.position), []).append(row)

    merged = []
    for (subject, position), members in groups.items():
        sizes = {m.gamma.size for m in members}
        if len(sizes) != 1:
            raise DimensionMismatch(f"subject {subject!r} has SPS vectors of different lengths")
        labels = {m.label for m in members}
        if len(labels) != 1:
            raise InvalidComponent(f"subject {subject!r} has conflicting labels {sorted(labels, key=str)}")
        merged.append(
            SPSRow(
                signal_id=subject,
                gamma=np.mean([m.gamma for m in members], axis=0),
                subject=subject,
                position=position,
                label=members[0].label,
            )
        )
    logger.info(f"Aggregated {sum(len(m) for m in groups.values())} recordings into {len(merged)} subjects")
    return merged
