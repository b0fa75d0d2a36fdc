"""Tests for penalized ridge extraction and IF refinement."""

import itertools
from dataclasses import replace

import numpy as np
import pytest

from app.config import derive_seed
from app.errors import AllBelowFloor, EmptyBand, GridMismatch
from app.model_core import SampledSignal, make_imt_component, shape_from_harmonics, synthesize_imt
from app.noise import gen_arma_t_noise, mix_at_snr, seconds_to_interval
from app.ridge import FLOOR_REL, extract_ridge, ridge_objective, ridge_to_if
from app.tf_engine import TFRepresentation, nearest_bin, stft_with_reassignment, synchrosqueeze

FS = 100.0


def _hand_sst(magnitude, freq_step=0.1, kind="SST"):
    magnitude = np.asarray(magnitude, dtype=np.float64)
    n_frames, n_bins = magnitude.shape
    return TFRepresentation(
        values=magnitude.astype(np.complex128),
        time_axis=np.arange(n_frames) / FS,
        freq_axis=np.arange(n_bins) * freq_step,
        kind=kind,
        window_sigma=0.5,
        hop=1,
        sample_rate=FS,
        boundary=np.zeros(n_frames, dtype=bool),
    )


def _sst_of(samples):
    tf, rmap = stft_with_reassignment(SampledSignal(samples=samples, sample_rate=FS))
    return synchrosqueeze(tf, rmap)


def _best_by_search(sst, penalty):
    magnitude = np.abs(sst.values)
    floor = FLOOR_REL * float((magnitude**2).max())
    paths = itertools.product(range(sst.n_bins), repeat=sst.n_frames)
    return max(ridge_objective(magnitude, sst.freq_axis, np.array(p), penalty, floor) for p in paths)


def _objective(sst, ridge, penalty):
    magnitude = np.abs(sst.values)
    floor = FLOOR_REL * float((magnitude**2).max())
    return ridge_objective(magnitude, sst.freq_axis, ridge.bin_index, penalty, floor)


def test_toy_ridge_matches_exhaustive_search():
    sst = _hand_sst([[1.0, 3.0, 0.5], [2.0, 0.2, 2.1], [0.4, 3.0, 1.0]], freq_step=1.0)
    for penalty in (0.0, 0.1, 1.0, 10.0):
        ridge = extract_ridge(sst, smooth_penalty=penalty, band=None)
        assert _objective(sst, ridge, penalty) == pytest.approx(_best_by_search(sst, penalty), abs=1e-12)


def test_random_ridges_match_exhaustive_search():
    rng = np.random.default_rng(3)
    for _ in range(20):
        sst = _hand_sst(rng.uniform(0.1, 2.0, (4, 4)), freq_step=0.5)
        ridge = extract_ridge(sst, smooth_penalty=2.0, band=None)
        assert _objective(sst, ridge, 2.0) == pytest.approx(_best_by_search(sst, 2.0), abs=1e-12)


def test_flat_matrix_resolves_ties_to_lowest_bin():
    ridge = extract_ridge(_hand_sst(np.ones((5, 4))), band=None)
    assert np.all(ridge.bin_index == 0)


def test_extract_ridge_rejects_bad_inputs():
    with pytest.raises(GridMismatch):
        extract_ridge(_hand_sst(np.ones((3, 3)), kind="STFT"), band=None)
    with pytest.raises(EmptyBand):
        extract_ridge(_hand_sst(np.ones((3, 3))), band=(20.0, 30.0))
    with pytest.raises(AllBelowFloor):
        extract_ridge(_hand_sst(np.zeros((3, 3))), band=None)


def test_ridge_restricted_to_band():
    magnitude = np.ones((4, 10))
    magnitude[:, 1] = 5.0  # strong line outside the band
    magnitude[:, 6] = 2.0
    ridge = extract_ridge(_hand_sst(magnitude), band=(0.5, 0.9))
    assert np.all(ridge.bin_index == 6)
    assert ridge.band == (0.5, 0.9)


def test_refinement_on_symmetric_and_skewed_peaks():
    magnitude = np.array(
        [
            [0.0, 1.0, 2.0, 1.0, 0.0],
            [0.0, 1.0, 2.0, 1.5, 0.0],
            [0.0, 0.0, 1.0, 1.0, 0.0],
        ]
    )
    ridge = extract_ridge(_hand_sst(magnitude), smooth_penalty=0.0, band=None)
    assert np.all(ridge.bin_index == 2)
    refined = ridge_to_if(ridge)
    assert refined[0] == pytest.approx(0.2)
    # denom = 1 - 4 + 1.5, offset = 0.5 (1 - 1.5) / denom = 1/6 bin
    assert refined[1] == pytest.approx(0.2 + 0.1 / 6.0)
    # Offset limited to half a bin.
    assert refined[2] == pytest.approx(0.25)
    assert np.array_equal(ridge_to_if(ridge, refine=False), ridge.freq_hz)


def test_refinement_clamped_to_band():
    magnitude = np.zeros((2, 6))
    magnitude[:, 3] = 2.0
    magnitude[:, 4] = 1.9
    ridge = extract_ridge(_hand_sst(magnitude), band=(0.25, 0.32))
    assert np.all(ridge.bin_index == 3)
    assert np.all(ridge_to_if(ridge) == 0.32)


def test_tone_ridge_within_one_bin():
    t = np.arange(1000) / FS
    sst = _sst_of(np.cos(2.0 * np.pi * 1.2 * t))
    ridge = extract_ridge(sst)
    hits = np.abs(ridge.bin_index[sst.interior] - nearest_bin(sst, 1.2)) <= 1
    assert hits.mean() >= 0.99


def test_ridge_follows_elongated_beat():
    # One slow beat around 5.3 s: 1 / 1.15 s = 0.87 Hz at the bottom of the dip.
    n = 1000
    t = np.arange(n) / FS
    inst_freq = 1.2 - (1.2 - 1.0 / 1.15) * np.exp(-((t - 5.3) ** 2) / 2.0)
    comp = make_imt_component(np.ones(n), inst_freq, FS, eps=0.5)
    signal = synthesize_imt(shape_from_harmonics([1.0], [0.0]), comp)
    sst = _sst_of(signal.samples)
    estimate = ridge_to_if(extract_ridge(sst))
    frame = int(np.argmin(np.abs(sst.time_axis - 5.3)))
    assert abs(estimate[frame] - 0.87) <= 0.05
    assert np.max(np.abs(estimate - inst_freq)[sst.interior]) <= 0.05


def test_refinement_between_grid_bins_uses_squeezed_frequency():
    t = np.arange(1000) / FS
    signal = SampledSignal(samples=np.cos(2.0 * np.pi * 1.25 * t), sample_rate=FS)
    tf, rmap = stft_with_reassignment(signal, n_bins=101)
    assert tf.freq_step == pytest.approx(0.1)
    sst = synchrosqueeze(tf, rmap)
    estimate = ridge_to_if(extract_ridge(sst))
    assert np.max(np.abs(estimate[sst.interior] - 1.25)) <= 0.02


def test_lone_bin_takes_its_squeezed_frequency():
    magnitude = np.array([[0.0, 0.0, 2.0, 0.0, 0.0], [0.0, 1.0, 2.0, 1.5, 0.0]])
    bin_omega = np.full(magnitude.shape, np.nan)
    bin_omega[:, 2] = 0.23
    sst = replace(_hand_sst(magnitude), bin_omega=bin_omega)
    ridge = extract_ridge(sst, smooth_penalty=0.0, band=None)
    refined = ridge_to_if(ridge)
    assert refined[0] == pytest.approx(0.23)
    # Both neighbours populated: the parabola still decides.
    assert refined[1] == pytest.approx(0.2 + 0.1 / 6.0)


def test_ridge_ignores_amplitude_scale():
    rng = np.random.default_rng(8)
    magnitude = rng.uniform(0.1, 2.0, (12, 9))
    base = extract_ridge(_hand_sst(magnitude), smooth_penalty=0.5, band=None)
    scaled = extract_ridge(_hand_sst(7.3 * magnitude), smooth_penalty=0.5, band=None)
    assert np.array_equal(base.bin_index, scaled.bin_index)


def test_huge_penalty_gives_constant_best_bin():
    rng = np.random.default_rng(9)
    magnitude = rng.uniform(0.1, 2.0, (10, 7))
    ridge = extract_ridge(_hand_sst(magnitude), smooth_penalty=1e9, band=None)
    floor = FLOOR_REL * float((magnitude**2).max())
    best = int(np.argmax(np.log(magnitude**2 + floor).sum(axis=0)))
    assert np.all(ridge.bin_index == best)


def test_ridge_objective_is_carried():
    sst = _hand_sst([[1.0, 3.0, 0.5], [2.0, 0.2, 2.1], [0.4, 3.0, 1.0]], freq_step=1.0)
    ridge = extract_ridge(sst, smooth_penalty=0.1, band=None)
    assert ridge.objective == pytest.approx(_objective(sst, ridge, 0.1), abs=1e-12)


def test_ridge_survives_interval_noise_at_0db():
    t = np.arange(1000) / FS
    tone = SampledSignal(samples=np.cos(2.0 * np.pi * 1.2 * t), sample_rate=FS)
    start, stop = seconds_to_interval(tone, 2.5, 5.5)
    for seed in range(20):
        noise = gen_arma_t_noise(stop - start, derive_seed(seed, "noise"), dof=3.0)
        sst = _sst_of(mix_at_snr(tone, noise, 0.0, (start, stop)).samples)
        ridge = extract_ridge(sst)
        hits = np.abs(ridge.bin_index[sst.interior] - nearest_bin(sst, 1.2)) <= 3
        assert hits.mean() >= 0.90, f"seed {seed}"
