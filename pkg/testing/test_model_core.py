"""Tests for the wave-shape and IMT signal model."""

import numpy as np
import pytest

from app.errors import (
    AliasingRisk,
    DominanceViolation,
    EmptySignal,
    InvalidComponent,
    NonFinite,
    NotUnitEnergy,
    ZeroFundamental,
)
from app.model_core import (
    SampledSignal,
    check_imt_regularity,
    eval_wave_shape,
    make_imt_component,
    make_wave_shape,
    pulse_shape_preset,
    shape_from_harmonics,
    shape_l2_distance,
    synthesize_imt,
)

FS = 100.0


def _cosine_shape():
    return make_wave_shape([0.0, np.sqrt(2.0)], [0.0], delta=0.0)


def _constant_component(freq_hz=1.2, amp=1.0, seconds=10.0):
    n = int(seconds * FS)
    return make_imt_component(np.full(n, amp), np.full(n, freq_hz), FS)


def test_pulse_preset_is_unit_energy_and_dominated():
    shape = pulse_shape_preset()
    assert shape.cap_d == 5
    assert shape.delta == pytest.approx(0.59)
    assert abs(shape.energy - 1.0) <= 1e-9
    assert shape.dominance_ratio <= 0.59 + 1e-9
    assert shape.theta_tail == 0.0


def test_make_wave_shape_rejects_wrong_energy():
    with pytest.raises(NotUnitEnergy):
        make_wave_shape([0.0, 1.0], [0.0], delta=0.5)


def test_make_wave_shape_normalizes_on_request():
    shape = make_wave_shape([0.0, 1.0], [0.0], delta=0.5, normalize=True)
    assert abs(shape.energy - 1.0) <= 1e-12
    assert shape.alpha[1] == pytest.approx(np.sqrt(2.0))


def test_make_wave_shape_rejects_zero_fundamental():
    with pytest.raises(ZeroFundamental):
        make_wave_shape([0.0, 0.0, 1.0], [0.0, 1.0], delta=1.0)


def test_make_wave_shape_rejects_dominance_violation():
    with pytest.raises(DominanceViolation):
        shape_from_harmonics([1.0, 0.8], [0.0, 0.0], delta=0.5)


def test_make_wave_shape_rejects_non_finite():
    with pytest.raises(NonFinite):
        make_wave_shape([np.nan, 1.0], [0.0], delta=0.5)


def test_shape_from_harmonics_keeps_amplitude_ratios_and_phases():
    shape = shape_from_harmonics([1.0, 0.5], [0.3, 1.0])
    assert shape.amplitudes[1] / shape.amplitudes[0] == pytest.approx(0.5)
    assert np.allclose(shape.phases, [0.3, 1.0])
    assert shape.delta == pytest.approx(0.5)


def test_cosine_shape_vanishes_at_quarter_period():
    assert abs(eval_wave_shape(_cosine_shape(), 0.25)) <= 1e-12


def test_eval_wave_shape_is_one_periodic():
    shape = pulse_shape_preset()
    t = np.random.default_rng(0).uniform(-5.0, 5.0, 100)
    assert np.max(np.abs(eval_wave_shape(shape, t) - eval_wave_shape(shape, t + 1.0))) <= 1e-12


def test_eval_wave_shape_rejects_non_finite_time():
    with pytest.raises(NonFinite):
        eval_wave_shape(_cosine_shape(), np.inf)


def test_shape_l2_distance_matches_parseval():
    sine = make_wave_shape([0.0, 0.0], [np.sqrt(2.0)], delta=0.0)
    assert shape_l2_distance(_cosine_shape(), _cosine_shape()) == 0.0
    assert shape_l2_distance(_cosine_shape(), sine) == pytest.approx(np.sqrt(2.0))
    # Shorter shape is zero-padded.
    assert shape_l2_distance(_cosine_shape(), pulse_shape_preset()) > 0.0


def test_make_imt_component_integrates_constant_frequency():
    comp = _constant_component(1.2)
    assert np.allclose(comp.phase, 1.2 * np.arange(len(comp)) / FS, atol=1e-12)


def test_imt_component_rejects_bad_tracks():
    n = 50
    with pytest.raises(InvalidComponent):
        make_imt_component(-np.ones(n), np.full(n, 1.2), FS)
    with pytest.raises(InvalidComponent):
        make_imt_component(np.ones(n), np.zeros(n), FS)
    with pytest.raises(InvalidComponent):
        make_imt_component(np.ones(n), np.full(n - 1, 1.2), FS)


def test_synthesize_imt_pure_cosine():
    comp = _constant_component(1.2, amp=2.0)
    signal = synthesize_imt(_cosine_shape(), comp)
    expected = 2.0 * np.sqrt(2.0) * np.cos(2.0 * np.pi * 1.2 * signal.time_axis)
    assert np.max(np.abs(signal.samples - expected)) <= 1e-9


def test_synthesize_imt_envelope_follows_amplitude_ramp():
    n = int(10 * FS)
    amp = np.linspace(1.0, 1.2, n)
    comp = make_imt_component(amp, np.full(n, 1.2), FS, eps=0.05)
    assert check_imt_regularity(comp).passed
    shape = pulse_shape_preset()
    signal = synthesize_imt(shape, comp)
    assert np.max(np.abs(signal.samples / amp - eval_wave_shape(shape, comp.phase))) <= 1e-12


def test_synthesize_imt_rejects_aliasing():
    comp = make_imt_component(np.ones(100), np.full(100, 1.2), 10.0)
    with pytest.raises(AliasingRisk):
        synthesize_imt(pulse_shape_preset(), comp)


def test_check_imt_regularity_flags_fast_modulation():
    assert check_imt_regularity(_constant_component()).passed
    n = 1000
    t = np.arange(n) / FS
    fast = make_imt_component(1.0 + 0.5 * np.sin(2.0 * np.pi * 2.0 * t), np.full(n, 1.2), FS, eps=0.05)
    report = check_imt_regularity(fast)
    assert not report.passed
    assert report.max_am_ratio > 0.05


def test_sampled_signal_validation():
    with pytest.raises(EmptySignal):
        SampledSignal(samples=np.array([]), sample_rate=FS)
    with pytest.raises(NonFinite):
        SampledSignal(samples=np.array([0.0, np.nan, 1.0]), sample_rate=FS)
    with pytest.raises(InvalidComponent):
        SampledSignal(samples=np.zeros(10), sample_rate=0.0)

    signal = SampledSignal(samples=np.zeros(250), sample_rate=FS)
    assert signal.duration == pytest.approx(2.5)
    assert not signal.samples.flags.writeable
