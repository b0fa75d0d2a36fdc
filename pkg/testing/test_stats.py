"""Tests for GPS scoring, ROC/AUC, bootstrap, LOOCV and the permutation ANOVA."""

import itertools
import logging

import numpy as np
import pytest

from app.errors import InvalidComponent, ParseError, SingleClass, TooFewSamples
from app.shape_regression import SPSVector
from app.stats import (
    bootstrap_auc_ci,
    fit_pls,
    gps_score,
    load_model,
    loocv_accuracy,
    mann_whitney_auc,
    permutation_functional_anova,
    pointwise_f,
    predict_scores,
    roc_analyze,
    save_model,
    select_n_components,
)


def _pair_count_auc(scores, labels):
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = sum((p > q) + 0.5 * (p == q) for p, q in itertools.product(pos, neg))
    return wins / (pos.size * neg.size)


def _two_clusters(n_per_class=10, p=4, shift=2.0, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((2 * n_per_class, p))
    y = np.repeat([0, 1], n_per_class)
    x[y == 1, 0] += shift
    return x, y


def test_auc_equals_pair_count_on_small_datasets():
    rng = np.random.default_rng(0)
    for _ in range(300):
        n = int(rng.integers(2, 13))
        labels = rng.permutation(np.arange(n) % 2)
        scores = rng.integers(0, 4, n).astype(np.float64)
        expected = _pair_count_auc(scores, labels)
        assert abs(roc_analyze(scores, labels).auc - expected) <= 1e-12
        assert abs(mann_whitney_auc(scores, labels) - expected) <= 1e-12


def test_roc_on_separable_scores():
    roc = roc_analyze([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1])
    assert roc.auc == 1.0
    assert roc.optimal_threshold == 0.8
    assert roc.accuracy_at_optimal == 1.0
    assert roc.thresholds[-1] == np.inf
    assert roc.sens[0] == 1.0 and roc.spec[0] == 0.0
    assert roc.sens[-1] == 0.0 and roc.spec[-1] == 1.0
    assert np.isnan(roc.ci[0]) and np.isnan(roc.ci[1])


def test_roc_requires_both_classes():
    with pytest.raises(SingleClass):
        roc_analyze([0.1, 0.2, 0.3], [1, 1, 1])


def test_pls_with_all_components_matches_least_squares():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((30, 4))
    y = (x[:, 0] + 0.5 * rng.standard_normal(30) > 0).astype(int)
    model = fit_pls(x, y, n_components=4)
    design = np.column_stack([np.ones(30), x])
    ols = np.linalg.solve(design.T @ design, design.T @ y)
    assert np.max(np.abs(model.coeffs - ols)) <= 1e-8


def test_pls_stops_on_rank_deficiency(caplog):
    rng = np.random.default_rng(2)
    z = rng.standard_normal(12)
    x = np.column_stack([z, 2.0 * z])
    y = (z > 0).astype(int)
    with caplog.at_level(logging.WARNING, logger="app.stats"):
        model = fit_pls(x, y, n_components=2)
    assert model.n_components == 1
    assert "RankDeficient" in caplog.text


def test_pls_input_guards():
    x, y = _two_clusters()
    with pytest.raises(SingleClass):
        fit_pls(x, np.zeros(20, dtype=int))
    with pytest.raises(TooFewSamples):
        fit_pls(x[:3], y[:3])
    with pytest.raises(InvalidComponent):
        fit_pls(x, y, n_components=9)


def test_gps_score_matches_batch_scores():
    x, y = _two_clusters()
    model = fit_pls(x, y)
    scores = predict_scores(model, x)
    gamma = x[3]
    sps = SPSVector(gamma=gamma, harmonic_power=np.zeros(1), harmonic_phase=np.zeros(1))
    assert gps_score(model, sps) == pytest.approx(scores[3])
    assert gps_score(model, gamma) == pytest.approx(scores[3])


def test_bootstrap_ci_is_seeded_and_worker_independent():
    x, y = _two_clusters(shift=1.0)
    scores = x[:, 0]
    first = bootstrap_auc_ci(scores, y, n_boot=200, seed=5)
    assert first == bootstrap_auc_ci(scores, y, n_boot=200, seed=5)
    assert first == bootstrap_auc_ci(scores, y, n_boot=200, seed=5, workers=4)
    assert first[0] <= first[1]
    with pytest.raises(InvalidComponent):
        bootstrap_auc_ci(scores, y, n_boot=50)


def test_roc_with_bootstrap_brackets_auc():
    x, y = _two_clusters(shift=1.5)
    roc = roc_analyze(x[:, 0], y, n_boot=300, seed=1)
    assert roc.ci[0] <= roc.auc <= roc.ci[1]


def test_loocv_on_hand_worked_dataset():
    # Fold-by-fold: holding out x=2 leaves a training threshold of 3, so it is
    # the only miss under the Youden rule. The midpoint rule also misses x=3.
    x = np.array([[0.0], [1.0], [2.0], [3.0], [10.0]])
    y = np.array([0, 0, 1, 1, 1])
    assert loocv_accuracy(x, y) == pytest.approx(0.8)
    assert loocv_accuracy(x, y, threshold_rule="midpoint") == pytest.approx(0.6)


def test_loocv_guards():
    x, y = _two_clusters()
    with pytest.raises(TooFewSamples):
        loocv_accuracy(x[:4], y[:4])
    with pytest.raises(InvalidComponent):
        loocv_accuracy(x, y, threshold_rule="median")


def test_loocv_repeats_are_seeded():
    x, y = _two_clusters(shift=1.0, seed=3)
    a = loocv_accuracy(x, y, n_components=1, repeats=3, seed=9)
    assert a == loocv_accuracy(x, y, n_components=1, repeats=3, seed=9)
    assert 0.0 <= a <= 1.0


def test_separated_clusters_classify_well():
    x, y = _two_clusters(shift=4.0)
    model = fit_pls(x, y, n_components=1)
    assert roc_analyze(predict_scores(model, x), y).auc >= 0.95
    assert loocv_accuracy(x, y, n_components=1) >= 0.85
    assert 1 <= select_n_components(x, y, max_components=3) <= 3


def test_pointwise_f_handles_constant_columns():
    values = np.array([[1.0, 0.0], [1.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    f = pointwise_f(values, np.array([0, 0, 1, 1]), 2)
    assert f[0] == 0.0
    assert np.isinf(f[1])


def test_permutation_anova():
    rng = np.random.default_rng(4)
    same = permutation_functional_anova([rng.standard_normal((10, 5)), rng.standard_normal((10, 5))], n_perm=200)
    shifted = permutation_functional_anova(
        [rng.standard_normal((10, 5)), rng.standard_normal((10, 5)) + 5.0], n_perm=200
    )
    assert 1.0 / 201 <= same <= 1.0
    assert shifted <= 0.01
    with pytest.raises(TooFewSamples):
        permutation_functional_anova([np.zeros((2, 5)), np.zeros((5, 5))])


def test_model_round_trip(tmp_path):
    x, y = _two_clusters()
    model = fit_pls(x, y, n_components=2, seed=7)
    path = tmp_path / "model.json"
    save_model(model, str(path))
    loaded = load_model(str(path))
    assert np.array_equal(loaded.coeffs, model.coeffs)
    assert loaded.n_components == 2
    assert loaded.training_meta["seed"] == 7

    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ParseError):
        load_model(str(path))


def test_gps_score_is_affine():
    x, y = _two_clusters()
    model = fit_pls(x, y, n_components=2)
    rng = np.random.default_rng(6)
    first, second = rng.standard_normal(4), rng.standard_normal(4)
    lhs = gps_score(model, first + second) + gps_score(model, np.zeros(4))
    rhs = gps_score(model, first) + gps_score(model, second)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_roc_points_follow_ascending_thresholds():
    scores = np.array([0.3, 0.1, 0.3, 0.7, 0.5, 0.5])
    labels = np.array([0, 0, 1, 1, 0, 1])
    roc = roc_analyze(scores, labels)
    assert list(roc.thresholds) == [0.1, 0.3, 0.5, 0.7, np.inf]
    assert list(roc.sens) == pytest.approx([1.0, 1.0, 2.0 / 3.0, 1.0 / 3.0, 0.0])
    assert list(roc.spec) == pytest.approx([0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 1.0])
    # J ties at 0.3, 0.5 and 0.7; the lowest threshold wins.
    assert roc.optimal_threshold == 0.3


def test_bootstrap_replicas_keep_both_classes():
    # One positive among many negatives: an unstratified draw would often lose it.
    scores = np.arange(12, dtype=np.float64)
    labels = np.zeros(12, dtype=int)
    labels[-1] = 1
    lo, hi = bootstrap_auc_ci(scores, labels, n_boot=200, seed=3)
    assert lo == hi == 1.0
