"""Synthetic two-class pulse cohorts built from the IMT model."""

from dataclasses import dataclass
from typing import List, Optional
import logging

import numpy as np

from app.config import GenerateConfig, derive_seed
from app.model_core import (
    IMTComponent,
    SampledSignal,
    WaveShape,
    check_imt_regularity,
    make_imt_component,
    pulse_shape_preset,
    shape_from_harmonics,
    synthesize_imt,
)
from app.noise import gen_arma_t_noise, mix_at_snr, seconds_to_interval

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SyntheticRecord:
    signal_id: str
    signal: SampledSignal
    label: int
    shape: WaveShape
    component: IMTComponent


def class_shape(label: int, class_shift: float, rng: Optional[np.random.Generator] = None, jitter: float = 0.0) -> WaveShape:
    """Preset shape; class 1 scales the second harmonic by (1 - class_shift).

    With ``rng`` each harmonic amplitude above the fundamental gets a relative
    jitter of standard deviation ``jitter``.
    """
    base = pulse_shape_preset()
    amps = base.amplitudes / base.amplitudes[0]
    phases = base.phases.copy()
    if label == 1 and amps.size > 1:
        amps[1] *= 1.0 - class_shift
    if rng is not None and jitter > 0:
        amps[1:] *= np.clip(1.0 + jitter * rng.standard_normal(amps.size - 1), 0.5, 1.5)
    return shape_from_harmonics(amps, phases, alpha0=0.0)


def wandering_component(
    n: int,
    sample_rate: float,
    base_freq: float,
    if_wander: float,
    if_wander_freq: float,
    am_depth: float,
    am_freq: float,
    eps: float,
    if_offset: float = 0.0,
    am_offset: float = 0.0,
    phase0: float = 0.0,
) -> IMTComponent:
    """phi' = base + wander sin(2 pi f_w t + if_offset), A = 1 + depth sin(2 pi f_a t + am_offset)."""
    t = np.arange(n) / sample_rate
    inst_freq = base_freq + if_wander * np.sin(2.0 * np.pi * if_wander_freq * t + if_offset)
    amp = 1.0 + am_depth * np.sin(2.0 * np.pi * am_freq * t + am_offset)
    return make_imt_component(amp, inst_freq, sample_rate, eps=eps, phase0=phase0)


def make_record(config: GenerateConfig, index: int, label: int) -> SyntheticRecord:
    rng = np.random.default_rng(derive_seed(config.seed, "generate", index))
    n = int(round(config.duration_s * config.sample_rate))
    shape = class_shape(label, config.class_shift, rng, config.jitter)
    comp = wandering_component(
        n,
        config.sample_rate,
        base_freq=config.base_freq,
        if_wander=config.if_wander,
        if_wander_freq=config.if_wander_freq,
        am_depth=config.am_depth,
        am_freq=config.am_freq,
        eps=config.eps,
        if_offset=rng.uniform(0.0, 2.0 * np.pi),
        am_offset=rng.uniform(0.0, 2.0 * np.pi),
        phase0=rng.uniform(),
    )
    regularity = check_imt_regularity(comp)
    if not regularity.passed:
        logger.warning(
            f"Record {index} exceeds eps={config.eps}: am={regularity.max_am_ratio:.3g}, if={regularity.max_if_ratio:.3g}"
        )

    signal_id = f"sig_{index:03d}"
    signal = synthesize_imt(shape, comp, label=signal_id)
    if config.noise_snr_db is not None:
        start, stop = seconds_to_interval(signal, *config.noise_interval_s)
        if stop > start:
            noise = gen_arma_t_noise(stop - start, derive_seed(config.seed, "noise", index), dof=config.noise_dof)
            signal = mix_at_snr(signal, noise, config.noise_snr_db, (start, stop))
    return SyntheticRecord(signal_id=signal_id, signal=signal, label=label, shape=shape, component=comp)


def make_cohort(config: GenerateConfig) -> List[SyntheticRecord]:
    """n_per_class class-0 records followed by n_per_class class-1 records."""
    labels = [0] * config.n_per_class + [1] * config.n_per_class
    records = [make_record(config, i, label) for i, label in enumerate(labels)]
    logger.info(f"Generated {len(records)} synthetic records")
    return records
