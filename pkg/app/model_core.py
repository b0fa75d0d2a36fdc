"""Adaptive non-harmonic signal model.

A recorded pulse is modelled as ``Y(t) = A(t) s(phi(t)) + noise`` where ``s`` is a
1-periodic, unit-energy wave shape given by its truncated Fourier series, ``A``
the amplitude modulation and ``phi`` the phase in cycles (so ``phi'`` is in Hz).
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence
import logging

import numpy as np
from scipy.integrate import cumulative_trapezoid

from app.errors import (
    AliasingRisk,
    DominanceViolation,
    EmptySignal,
    InvalidComponent,
    NonFinite,
    NotUnitEnergy,
    ZeroFundamental,
)

logger = logging.getLogger(__name__)

ENERGY_TOL = 1e-9
# Relative slack on the dominance bound so a shape built exactly at the bound validates.
DOMINANCE_SLACK = 1e-9
DEFAULT_EPS = 0.05


def _frozen_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SampledSignal:
    """Uniformly sampled real waveform."""

    samples: np.ndarray
    sample_rate: float
    label: Optional[str] = None

    def __post_init__(self):
        samples = _frozen_array(self.samples)
        if samples.size == 0:
            raise EmptySignal("signal has no samples")
        if samples.ndim != 1 or samples.size < 2:
            raise InvalidComponent("a signal needs at least 2 samples")
        if not np.all(np.isfinite(samples)):
            raise NonFinite("signal contains non-finite samples")
        if not (np.isfinite(self.sample_rate) and self.sample_rate > 0):
            raise InvalidComponent(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def time_axis(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate


@dataclass(frozen=True, eq=False)
class WaveShape:
    """Truncated Fourier description of a wave-shape function.

    ``alpha`` holds alpha_0..alpha_D, ``beta`` holds beta_1..beta_D, and
    ``s(t) = alpha_0 + sum_l alpha_l cos(2 pi l t) + beta_l sin(2 pi l t)``.
    """

    alpha: np.ndarray
    beta: np.ndarray
    delta: float
    cap_d: int
    theta_tail: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", _frozen_array(self.alpha))
        object.__setattr__(self, "beta", _frozen_array(self.beta))

    @property
    def amplitudes(self) -> np.ndarray:
        """a_l = sqrt(alpha_l^2 + beta_l^2) / 2 for l = 1..D."""
        return np.hypot(self.alpha[1:], self.beta) / 2.0

    @property
    def phases(self) -> np.ndarray:
        """theta_l in [0, 2 pi) with alpha_l = 2 a_l cos(theta_l), beta_l = -2 a_l sin(theta_l)."""
        return np.mod(np.arctan2(-self.beta, self.alpha[1:]), 2.0 * np.pi)

    @property
    def energy(self) -> float:
        return shape_energy(self.alpha, self.beta)

    @property
    def dominance_ratio(self) -> float:
        """max_{l >= 2} a_l / a_1 (0 for D = 1)."""
        amps = self.amplitudes
        if self.cap_d < 2 or amps[0] == 0:
            return 0.0
        return float(np.max(amps[1:]) / amps[0])


@dataclass(frozen=True, eq=False)
class IMTComponent:
    """Discretized amplitude, phase (cycles) and IF (Hz) tracks."""

    amp: np.ndarray
    phase: np.ndarray
    inst_freq: np.ndarray
    eps: float
    sample_rate: float

    def __post_init__(self):
        amp = _frozen_array(self.amp)
        phase = _frozen_array(self.phase)
        inst_freq = _frozen_array(self.inst_freq)
        if not (amp.shape == phase.shape == inst_freq.shape) or amp.ndim != 1:
            raise InvalidComponent("amp, phase and inst_freq must be 1-D and equally long")
        if amp.size < 2:
            raise InvalidComponent("a component needs at least 2 samples")
        for name, arr in (("amp", amp), ("phase", phase), ("inst_freq", inst_freq)):
            if not np.all(np.isfinite(arr)):
                raise NonFinite(f"{name} contains non-finite values")
        if np.any(amp <= 0):
            raise InvalidComponent("amplitude must be positive")
        if np.any(inst_freq <= 0):
            raise InvalidComponent("instantaneous frequency must be positive")
        if np.any(np.diff(phase) <= 0):
            raise InvalidComponent("phase must be strictly increasing")
        if not self.eps > 0:
            raise InvalidComponent("eps must be positive")
        if not self.sample_rate > 0:
            raise InvalidComponent("sample_rate must be positive")
        object.__setattr__(self, "amp", amp)
        object.__setattr__(self, "phase", phase)
        object.__setattr__(self, "inst_freq", inst_freq)

    def __len__(self) -> int:
        return self.amp.size

    @property
    def time_axis(self) -> np.ndarray:
        return np.arange(self.amp.size) / self.sample_rate


@dataclass(frozen=True)
class RegularityReport:
    max_am_ratio: float
    max_if_ratio: float
    passed: bool = field(default=False)


def shape_energy(alpha: np.ndarray, beta: np.ndarray) -> float:
    """alpha_0^2 + sum (alpha_l^2 + beta_l^2) / 2, the squared L2 norm over one period."""
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    return float(alpha[0] ** 2 + 0.5 * (np.sum(alpha[1:] ** 2) + np.sum(beta**2)))


def make_wave_shape(
    alpha: Sequence[float],
    beta: Sequence[float],
    delta: float,
    normalize: bool = False,
    theta_tail: float = 0.0,
) -> WaveShape:
    """Validate Fourier coefficients and build a WaveShape.

    Raises:
        NonFinite: on NaN/inf coefficients or delta.
        NotUnitEnergy: when ``normalize`` is off and the energy is not 1.
        ZeroFundamental: when a_1 = 0.
        DominanceViolation: when some a_l > delta * a_1 for l >= 2.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if alpha.ndim != 1 or beta.ndim != 1 or alpha.size < 2 or beta.size != alpha.size - 1:
        raise InvalidComponent("need len(alpha) = D + 1 >= 2 and len(beta) = D")
    if not (np.all(np.isfinite(alpha)) and np.all(np.isfinite(beta)) and np.isfinite(delta)):
        raise NonFinite("wave-shape coefficients must be finite")
    if delta < 0 or theta_tail < 0:
        raise InvalidComponent("delta and theta_tail must be non-negative")

    energy = shape_energy(alpha, beta)
    if normalize:
        if energy <= 0:
            raise ZeroFundamental("cannot normalize an all-zero shape")
        scale = 1.0 / np.sqrt(energy)
        alpha = alpha * scale
        beta = beta * scale
    elif abs(energy - 1.0) > ENERGY_TOL:
        raise NotUnitEnergy(f"shape energy is {energy:.12g}, expected 1")

    shape = WaveShape(
        alpha=alpha,
        beta=beta,
        delta=float(delta),
        cap_d=int(beta.size),
        theta_tail=float(theta_tail),
    )
    amps = shape.amplitudes
    if amps[0] == 0:
        raise ZeroFundamental("fundamental coefficient a_1 is zero")
    if shape.cap_d >= 2:
        worst = int(np.argmax(amps[1:])) + 2
        if amps[worst - 1] > delta * amps[0] * (1.0 + DOMINANCE_SLACK):
            raise DominanceViolation(
                f"harmonic {worst} has a_l/a_1 = {amps[worst - 1] / amps[0]:.4f} > delta = {delta}"
            )
    return shape


def shape_from_harmonics(
    amplitudes: Sequence[float],
    phases: Sequence[float],
    alpha0: float = 0.0,
    delta: Optional[float] = None,
) -> WaveShape:
    """Build a unit-energy shape from harmonic magnitudes a_l and phases theta_l.

    When ``delta`` is None the observed dominance ratio is used as the bound.
    """
    amplitudes = np.asarray(amplitudes, dtype=np.float64)
    phases = np.asarray(phases, dtype=np.float64)
    if amplitudes.shape != phases.shape:
        raise InvalidComponent("amplitudes and phases must have equal length")
    alpha = np.concatenate(([alpha0], 2.0 * amplitudes * np.cos(phases)))
    beta = -2.0 * amplitudes * np.sin(phases)
    if delta is None:
        delta = float(np.max(amplitudes[1:]) / amplitudes[0]) if amplitudes.size > 1 and amplitudes[0] > 0 else 0.0
    return make_wave_shape(alpha, beta, delta, normalize=True)


# Pulse-like preset: strong fundamental, second harmonic at the dominance bound,
# higher harmonics phased to leave a weaker late bump in the cycle.
PULSE_PRESET_AMPLITUDES = (1.0, 0.59, 0.36, 0.2, 0.1)
PULSE_PRESET_PHASES = tuple(
    float(np.mod(-2.0 * np.pi * ell * 0.2 + offset, 2.0 * np.pi))
    for ell, offset in zip(range(1, 6), (0.0, 0.0, 0.4, 1.2, 1.8))
)
PULSE_PRESET_DELTA = 0.59


def pulse_shape_preset() -> WaveShape:
    """D = 5, delta = 0.59, theta = 0 pulse-like wave shape."""
    return shape_from_harmonics(
        PULSE_PRESET_AMPLITUDES,
        PULSE_PRESET_PHASES,
        alpha0=0.0,
        delta=PULSE_PRESET_DELTA,
    )


def eval_wave_shape(shape: WaveShape, t) -> np.ndarray | float:
    """Evaluate s(t) for scalar or array t (t in cycles)."""
    t_arr = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(t_arr)):
        raise NonFinite("t must be finite")
    # Reduce to [0, 1) so s(t) and s(t + k) see the same argument.
    frac = t_arr - np.floor(t_arr)
    ell = np.arange(1, shape.cap_d + 1)
    arg = 2.0 * np.pi * np.multiply.outer(frac, ell)
    value = shape.alpha[0] + np.cos(arg) @ shape.alpha[1:] + np.sin(arg) @ shape.beta
    if np.ndim(value) == 0:
        return float(value)
    return value


def shape_l2_distance(a: WaveShape, b: WaveShape) -> float:
    """L2 distance over one period between two truncated shapes (Parseval)."""
    d = max(a.cap_d, b.cap_d)

    def _padded(shape: WaveShape):
        alpha = np.zeros(d + 1)
        beta = np.zeros(d)
        alpha[: shape.cap_d + 1] = shape.alpha
        beta[: shape.cap_d] = shape.beta
        return alpha, beta

    alpha_a, beta_a = _padded(a)
    alpha_b, beta_b = _padded(b)
    return float(np.sqrt(shape_energy(alpha_a - alpha_b, beta_a - beta_b)))


def make_imt_component(
    amp,
    inst_freq,
    sample_rate: float,
    eps: float = DEFAULT_EPS,
    phase0: float = 0.0,
) -> IMTComponent:
    """Build a component whose phase integrates the IF track (trapezoid rule)."""
    inst_freq = np.asarray(inst_freq, dtype=np.float64)
    phase = phase0 + cumulative_trapezoid(inst_freq, dx=1.0 / sample_rate, initial=0.0)
    return IMTComponent(
        amp=np.asarray(amp, dtype=np.float64),
        phase=phase,
        inst_freq=inst_freq,
        eps=eps,
        sample_rate=sample_rate,
    )


def synthesize_imt(shape: WaveShape, comp: IMTComponent, label: Optional[str] = None) -> SampledSignal:
    """Noiseless IMT realization: samples[n] = A[n] * s(phi[n])."""
    nyquist = comp.sample_rate / 2.0
    top = float(np.max(comp.inst_freq)) * shape.cap_d
    if top >= nyquist:
        raise AliasingRisk(
            f"harmonic {shape.cap_d} reaches {top:.3f} Hz, above Nyquist {nyquist:.3f} Hz"
        )
    samples = comp.amp * eval_wave_shape(shape, comp.phase)
    return SampledSignal(samples=samples, sample_rate=comp.sample_rate, label=label)


def check_imt_regularity(comp: IMTComponent) -> RegularityReport:
    """Forward-difference check of |A'| <= eps phi' and |phi''| <= eps phi'."""
    dt = 1.0 / comp.sample_rate
    am_rate = np.abs(np.diff(comp.amp)) / dt
    if_rate = np.abs(np.diff(comp.inst_freq)) / dt
    ref = comp.inst_freq[:-1]
    max_am_ratio = float(np.max(am_rate / ref))
    max_if_ratio = float(np.max(if_rate / ref))
    passed = max_am_ratio <= comp.eps and max_if_ratio <= comp.eps
    if not passed:
        logger.debug(
            f"IMT regularity fails: am={max_am_ratio:.4g} if={max_if_ratio:.4g} eps={comp.eps}"
        )
    return RegularityReport(max_am_ratio=max_am_ratio, max_if_ratio=max_if_ratio, passed=passed)
