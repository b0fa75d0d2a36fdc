"""Tests for the classical periodogram, beat-interval and folding baselines."""

import numpy as np
import pytest

from app.baselines import beat_intervals, cross_check, fold_cycle, harmonic_power_spectrum
from app.config import PipelineConfig
from app.errors import DimensionMismatch, InvalidComponent, TooFewSamples
from app.model_core import (
    SampledSignal,
    eval_wave_shape,
    make_imt_component,
    pulse_shape_preset,
    shape_from_harmonics,
    synthesize_imt,
)
from app.pipeline import analyze_signal
from app.recovery import RecoveredComponent

FS = 100.0


def _steady_pulse(freq_hz=1.2, seconds=10.0):
    n = int(seconds * FS)
    comp = make_imt_component(np.ones(n), np.full(n, freq_hz), FS)
    return synthesize_imt(pulse_shape_preset(), comp), comp


def test_periodogram_harmonics_follow_shape_amplitudes():
    signal, _ = _steady_pulse()
    amps = pulse_shape_preset().amplitudes
    expected = amps**2 / np.sum(amps**2)
    shares = harmonic_power_spectrum(signal, 5, fundamental_hz=1.2)
    assert shares.sum() == pytest.approx(1.0)
    assert np.max(np.abs(shares - expected)) <= 0.01


def test_periodogram_finds_fundamental_in_band():
    signal, _ = _steady_pulse()
    assert np.allclose(harmonic_power_spectrum(signal, 3), harmonic_power_spectrum(signal, 3, fundamental_hz=1.2))
    with pytest.raises(InvalidComponent):
        harmonic_power_spectrum(signal, 0)


def test_beat_intervals_of_steady_rhythm():
    t = np.arange(1000) / FS
    signal = SampledSignal(samples=np.cos(2.0 * np.pi * 1.25 * t), sample_rate=FS)
    beats = beat_intervals(signal)
    assert np.allclose(beats.intervals, 0.8)
    assert np.allclose(beats.rate_hz, 1.25)
    assert np.allclose(beats.rate_times, (beats.peak_times[1:] + beats.peak_times[:-1]) / 2.0)


def test_beat_intervals_needs_two_peaks():
    t = np.arange(50) / FS
    signal = SampledSignal(samples=np.cos(2.0 * np.pi * 1.2 * t), sample_rate=FS)
    with pytest.raises(TooFewSamples):
        beat_intervals(signal)


def _true_component(comp):
    n = len(comp)
    return RecoveredComponent(
        complex_track=comp.amp * np.exp(2j * np.pi * comp.phase),
        amp=np.array(comp.amp),
        phase=np.array(comp.phase),
        inst_freq=np.array(comp.inst_freq),
        time_axis=comp.time_axis,
        interpolated=np.zeros(n, dtype=bool),
        boundary=np.zeros(n, dtype=bool),
    )


def test_fold_cycle_recovers_shape():
    n = 2000
    t = np.arange(n) / FS
    amp = 1.0 + 0.1 * np.sin(2.0 * np.pi * 0.05 * t)
    comp = make_imt_component(amp, 1.2 + 0.1 * np.sin(2.0 * np.pi * 0.07 * t), FS, eps=0.1)
    signal = synthesize_imt(pulse_shape_preset(), comp)
    grid, cycle = fold_cycle(signal.samples, _true_component(comp))
    assert grid.size == 64
    assert np.max(np.abs(cycle - eval_wave_shape(pulse_shape_preset(), grid))) <= 0.1


def test_fold_cycle_fills_empty_bins():
    _, comp = _steady_pulse(seconds=1.0)
    signal, _ = _steady_pulse(seconds=1.0)
    grid, cycle = fold_cycle(signal.samples, _true_component(comp), n_bins=500)
    assert np.all(np.isfinite(cycle))
    with pytest.raises(DimensionMismatch):
        fold_cycle(signal.samples[:-1], _true_component(comp))


def _wandering_cosine(seconds=10.0):
    n = int(seconds * FS)
    t = np.arange(n) / FS
    comp = make_imt_component(np.ones(n), 1.2 + 0.1 * np.sin(2.0 * np.pi * 0.07 * t), FS, eps=0.1)
    return synthesize_imt(shape_from_harmonics([1.0], [0.0]), comp)


def test_cross_check_agrees_with_recovered_cosine():
    signal = _wandering_cosine()
    analysis = analyze_signal(signal, PipelineConfig(cap_d=3))
    check = cross_check(signal, analysis.component, analysis.sps, analysis.frames)
    assert check.harmonic_shares.size == 3
    assert check.harmonic_shares[0] >= 0.99
    assert check.sps_shares[0] >= 0.99
    assert check.fold_residual <= 0.05
    assert check.n_beats >= 10
    assert check.rate_error_hz is not None and check.rate_error_hz <= 0.05


def test_cross_check_needs_frames():
    signal = _wandering_cosine()
    analysis = analyze_signal(signal, PipelineConfig(cap_d=3))
    with pytest.raises(TooFewSamples):
        cross_check(signal, analysis.component, analysis.sps, np.array([], dtype=np.int64))
