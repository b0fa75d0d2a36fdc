"""Tests for the functional regression behind the spectral pulse signature."""

import numpy as np
import pytest

from app.config import GenerateConfig, PipelineConfig
from app.errors import DimensionMismatch, IllConditioned, InvalidComponent, TooShort
from app.model_core import eval_wave_shape, pulse_shape_preset, shape_l2_distance
from app.pipeline import analyze_signal
from app.recovery import RecoveredComponent
from app.shape_regression import (
    SPSRow,
    aggregate_by_subject,
    align_phase,
    build_design,
    estimate_sps,
    normalize_sps,
    reconstruct_fit,
    sps_from_shape,
    sps_to_wave_shape,
)
from app.synthetic import make_record

FS = 100.0


def _component(amp, phase):
    n = len(phase)
    return RecoveredComponent(
        complex_track=amp * np.exp(2j * np.pi * phase),
        amp=np.asarray(amp, dtype=np.float64) * np.ones(n),
        phase=np.asarray(phase, dtype=np.float64),
        inst_freq=np.gradient(phase, 1.0 / FS),
        time_axis=np.arange(n) / FS,
        interpolated=np.zeros(n, dtype=bool),
        boundary=np.zeros(n, dtype=bool),
    )


def _wandering_component(n=1500, c=0.0):
    t = np.arange(n) / FS
    phase = 1.1 * t + 0.3 * np.sin(2.0 * np.pi * 0.1 * t) + c
    amp = 1.0 + 0.1 * np.cos(2.0 * np.pi * 0.07 * t)
    return _component(amp, phase)


def test_gram_matrix_of_whole_cycles_is_diagonal():
    n, cap_d = 1000, 3
    design = build_design(_component(1.0, np.arange(n) / FS), cap_d=cap_d)
    gram = design.rows @ design.rows.T
    expected = np.diag([float(n)] + [n / 2.0] * (2 * cap_d))
    assert np.allclose(gram, expected, atol=1e-8)


def test_exact_model_recovers_gamma():
    design = build_design(_wandering_component(), cap_d=4)
    gamma = np.random.default_rng(0).standard_normal(9)
    y = gamma @ design.rows
    sps = estimate_sps(y, design)
    assert np.linalg.norm(sps.gamma - gamma) <= 1e-8 * np.linalg.norm(gamma)
    assert np.allclose(reconstruct_fit(sps, design), y, rtol=1e-8, atol=1e-10)
    assert np.array_equal(sps.harmonic_power, (sps.alpha[1:] ** 2 + sps.beta**2) / 4.0)
    assert sps.condition_number < 1e8


def test_residual_is_orthogonal_to_design_rows():
    design = build_design(_wandering_component(), cap_d=3)
    y = np.random.default_rng(1).standard_normal(design.n_samples)
    resid = y - reconstruct_fit(estimate_sps(y, design), design)
    assert np.max(np.abs(design.rows @ resid)) <= 1e-8 * np.linalg.norm(y) * np.sqrt(design.n_samples)


def test_design_guards():
    with pytest.raises(TooShort):
        build_design(_component(1.0, np.arange(20) / FS), cap_d=3)
    with pytest.raises(InvalidComponent):
        build_design(_wandering_component(), cap_d=0)

    flat = build_design(_component(1.0, np.zeros(200)), cap_d=2)
    with pytest.raises(IllConditioned):
        estimate_sps(np.ones(200), flat)

    design = build_design(_wandering_component(), cap_d=2)
    with pytest.raises(DimensionMismatch):
        estimate_sps(np.ones(design.n_samples - 1), design)


def test_align_phase_sets_first_phase_to_zero():
    sps = sps_from_shape(pulse_shape_preset())
    aligned = align_phase(sps)
    assert aligned.aligned
    assert aligned.harmonic_phase[0] == 0.0
    assert np.allclose(aligned.harmonic_power, sps.harmonic_power, rtol=1e-12)
    again = align_phase(aligned)
    assert np.max(np.abs(again.gamma - aligned.gamma)) <= 1e-12


def test_aligned_sps_ignores_recording_start():
    shape = pulse_shape_preset()
    comp = _wandering_component()
    y = comp.amp * eval_wave_shape(shape, comp.phase)
    original = estimate_sps(y, build_design(comp, cap_d=5))
    shifted = estimate_sps(y, build_design(_wandering_component(c=-0.37), cap_d=5))
    assert np.max(np.abs(original.gamma - shifted.gamma)) > 0.1
    assert np.max(np.abs(align_phase(original).gamma - align_phase(shifted).gamma)) <= 1e-9


def test_normalize_and_convert_to_wave_shape():
    sps = estimate_sps(
        3.0 * _wandering_component().amp * eval_wave_shape(pulse_shape_preset(), _wandering_component().phase),
        build_design(_wandering_component(), cap_d=5),
    )
    unit = normalize_sps(sps)
    assert unit.normalized
    assert unit.gamma[0] ** 2 + 0.5 * np.sum(unit.gamma[1:] ** 2) == pytest.approx(1.0)
    shape = sps_to_wave_shape(unit)
    assert shape.energy == pytest.approx(1.0)
    assert shape_l2_distance(shape, pulse_shape_preset()) <= 1e-8


def test_aggregate_by_subject():
    rows = [
        SPSRow("a1", np.array([1.0, 2.0, 3.0]), subject="a", position="chi", label=1),
        SPSRow("a2", np.array([3.0, 2.0, 1.0]), subject="a", position="chi", label=1),
        SPSRow("b1", np.array([0.0, 0.0, 0.0]), subject="", position="chi", label=0),
    ]
    merged = aggregate_by_subject(rows)
    assert [r.signal_id for r in merged] == ["a", "b1"]
    assert np.allclose(merged[0].gamma, [2.0, 2.0, 2.0])
    assert merged[0].label == 1

    with pytest.raises(InvalidComponent):
        aggregate_by_subject(rows + [SPSRow("a3", np.zeros(3), subject="a", position="chi", label=0)])
    with pytest.raises(DimensionMismatch):
        aggregate_by_subject(rows + [SPSRow("a3", np.zeros(5), subject="a", position="chi", label=1)])


def _shape_errors(snr_db=None, seeds=20):
    errors = []
    for seed in range(seeds):
        record = make_record(GenerateConfig(seed=seed, jitter=0.0, noise_snr_db=snr_db), 0, 0)
        analysis = analyze_signal(record.signal, PipelineConfig())
        reference = sps_to_wave_shape(normalize_sps(align_phase(sps_from_shape(record.shape))))
        errors.append(shape_l2_distance(sps_to_wave_shape(analysis.sps_aligned), reference))
    return np.array(errors)


def test_pipeline_recovers_generated_shape():
    assert np.median(_shape_errors()) <= 0.05


def test_pipeline_recovers_shape_through_interval_noise():
    assert np.median(_shape_errors(snr_db=0.0)) <= 0.15


def test_recovered_harmonic_powers_match_generator():
    record = make_record(GenerateConfig(seed=0, jitter=0.0), 0, 0)
    analysis = analyze_signal(record.signal, PipelineConfig(cap_d=5))
    truth = normalize_sps(sps_from_shape(record.shape)).harmonic_power
    recovered = analysis.sps_aligned.harmonic_power
    total = truth.sum()
    for ell in range(5):
        assert abs(recovered[ell] - truth[ell]) <= 0.02 * total, f"harmonic {ell + 1}"
