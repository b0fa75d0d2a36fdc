"""Heavy-tailed ARMA(1,1) noise and SNR-controlled mixing."""

from typing import Tuple
import logging
import math

import numpy as np
from scipy.signal import lfilter

from app.errors import BadDof, InvalidComponent, ZeroVariance
from app.model_core import SampledSignal

logger = logging.getLogger(__name__)

BURN_IN = 200
DEFAULT_AR = 0.5
DEFAULT_MA = -0.3
DEFAULT_DOF = 3.0


def gen_arma_t_noise(
    n: int,
    seed: int,
    dof: float = DEFAULT_DOF,
    ar_coeff: float = DEFAULT_AR,
    ma_coeff: float = DEFAULT_MA,
) -> np.ndarray:
    """ARMA(1,1) driven by i.i.d. Student-t innovations.

    Lag polynomials a(z) = ar_coeff*z + 1 and b(z) = ma_coeff*z + 1 act on the
    backshift operator, a(B) x_t = b(B) w_t, i.e.
    x_t = -ar_coeff x_{t-1} + w_t + ma_coeff w_{t-1}. The first BURN_IN samples
    are discarded.
    """
    if n < 1:
        raise InvalidComponent("n must be >= 1")
    if not dof > 2:
        raise BadDof(f"dof must be > 2 for finite variance, got {dof}")
    rng = np.random.default_rng(seed)
    innovations = rng.standard_t(dof, size=n + BURN_IN)
    series = lfilter([1.0, ma_coeff], [1.0, ar_coeff], innovations)
    return series[BURN_IN:]


def arma_lag1_autocorrelation(ar_coeff: float = DEFAULT_AR, ma_coeff: float = DEFAULT_MA) -> float:
    """Theoretical lag-1 autocorrelation of a(B) x = b(B) w."""
    phi = -ar_coeff
    theta = ma_coeff
    return (1.0 + phi * theta) * (phi + theta) / (1.0 + 2.0 * phi * theta + theta**2)


def mix_at_snr(
    signal: SampledSignal,
    noise: np.ndarray,
    snr_db: float,
    interval: Tuple[int, int],
) -> SampledSignal:
    """Add noise over ``interval`` = [start, stop) scaled to the requested SNR.

    SNR is 20 log10(std(signal on interval) / std(scaled noise)); snr_db = +inf
    returns the input unchanged.
    """
    start, stop = int(interval[0]), int(interval[1])
    if not 0 <= start < stop <= len(signal):
        raise InvalidComponent(f"interval {interval} outside signal of length {len(signal)}")
    noise = np.asarray(noise, dtype=np.float64)
    if noise.size != stop - start:
        raise InvalidComponent(f"noise length {noise.size} != interval length {stop - start}")
    if math.isinf(snr_db) and snr_db > 0:
        return signal

    signal_std = float(np.std(signal.samples[start:stop]))
    noise_std = float(np.std(noise))
    if signal_std == 0 or noise_std == 0:
        raise ZeroVariance("signal and noise need non-zero std over the interval")

    scale = signal_std / (noise_std * 10.0 ** (snr_db / 20.0))
    mixed = np.array(signal.samples, copy=True)
    mixed[start:stop] += scale * noise
    return SampledSignal(samples=mixed, sample_rate=signal.sample_rate, label=signal.label)


def seconds_to_interval(signal: SampledSignal, start_s: float, stop_s: float) -> Tuple[int, int]:
    """Convert a time range in seconds to a clipped [start, stop) sample range."""
    start = max(0, int(round(start_s * signal.sample_rate)))
    stop = min(len(signal), int(round(stop_s * signal.sample_rate)))
    return start, stop
