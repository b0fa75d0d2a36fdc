"""GPS scoring (PLS1), ROC analysis, bootstrap CI, LOOCV and permutation ANOVA."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence, Tuple
import json
import logging
import math

import numpy as np
from sklearn.metrics import roc_auc_score, roc_curve
from sklearn.utils import resample

from app.config import derive_seed
from app.errors import (
    DimensionMismatch,
    InvalidComponent,
    ParseError,
    SingleClass,
    TooFewSamples,
)
from app.shape_regression import SPSVector

logger = logging.getLogger(__name__)

DEFAULT_MAX_COMPONENTS = 5
DEFAULT_N_BOOT = 1000
DEFAULT_N_PERM = 1000
MIN_BOOT = 100
# A weight vector this much smaller than the first one counts as zero.
RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    """Linear GPS model y = coeffs[0] + x . coeffs[1:] in raw SPS units."""

    coeffs: np.ndarray
    n_components: int
    x_mean: np.ndarray
    x_scale: np.ndarray
    training_meta: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return self.coeffs.size - 1


@dataclass(frozen=True, eq=False)
class ROCResult:
    thresholds: np.ndarray  # ascending, last entry +inf
    sens: np.ndarray
    spec: np.ndarray
    auc: float
    ci: Tuple[float, float]
    optimal_threshold: float
    accuracy_at_optimal: float


def _check_xy(features, labels) -> Tuple[np.ndarray, np.ndarray]:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(labels)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.size:
        raise DimensionMismatch(f"features {x.shape} do not match {y.size} labels")
    if not np.all(np.isin(y, (0, 1))):
        raise InvalidComponent("labels must be 0 or 1")
    if not np.all(np.isfinite(x)):
        raise InvalidComponent("features must be finite")
    return x, y.astype(np.int64)


def _check_scores(scores, labels) -> Tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.ndim != 1 or s.shape != y.shape:
        raise DimensionMismatch(f"{s.size} scores for {y.size} labels")
    if not np.all(np.isin(y, (0, 1))):
        raise InvalidComponent("labels must be 0 or 1")
    y = y.astype(np.int64)
    if y.min(initial=1) == y.max(initial=0) or y.size == 0:
        raise SingleClass("both classes must be present")
    return s, y


def default_n_components(n_samples: int, n_features: int) -> int:
    return max(1, min(DEFAULT_MAX_COMPONENTS, n_features, n_samples - 1))


def fit_pls(features, labels, n_components: Optional[int] = None, seed: int = 0) -> ClassifierModel:
    """PLS1 by NIPALS on standardized features, collapsed to one linear model.

    Stops early (with a warning) when a weight vector vanishes; the returned
    model then records the number of components actually extracted.
    """
    x, y = _check_xy(features, labels)
    n, p = x.shape
    if n < 4:
        raise TooFewSamples(f"need at least 4 samples, got {n}")
    if y.min() == y.max():
        raise SingleClass("both classes must be present to fit")
    if n_components is None:
        n_components = default_n_components(n, p)
    if not 1 <= n_components <= min(p, n - 1):
        raise InvalidComponent(f"n_components must be in [1, {min(p, n - 1)}], got {n_components}")

    x_mean = x.mean(axis=0)
    x_scale = x.std(axis=0)
    x_scale[x_scale == 0] = 1.0
    resid_x = (x - x_mean) / x_scale
    y_mean = float(y.mean())
    resid_y = y - y_mean

    weights, loadings, y_loadings = [], [], []
    first_norm = None
    for _ in range(n_components):
        w = resid_x.T @ resid_y
        norm = float(np.linalg.norm(w))
        if first_norm is None:
            first_norm = norm
        if norm == 0 or norm <= RANK_TOL * first_norm:
            logger.warning(
                f"RankDeficient: PLS stopped after {len(weights)} of {n_components} components"
            )
            break
        w /= norm
        t = resid_x @ w
        tt = float(t @ t)
        p_load = resid_x.T @ t / tt
        q_load = float(resid_y @ t) / tt
        resid_x = resid_x - np.outer(t, p_load)
        resid_y = resid_y - q_load * t
        weights.append(w)
        loadings.append(p_load)
        y_loadings.append(q_load)

    if weights:
        w_mat = np.column_stack(weights)
        p_mat = np.column_stack(loadings)
        b_std = w_mat @ np.linalg.solve(p_mat.T @ w_mat, np.asarray(y_loadings))
    else:
        b_std = np.zeros(p)

    beta = b_std / x_scale
    intercept = y_mean - float(x_mean @ beta)
    logger.debug(f"PLS fit: n={n}, p={p}, components={len(weights)}")
    return ClassifierModel(
        coeffs=np.concatenate(([intercept], beta)),
        n_components=len(weights),
        x_mean=x_mean,
        x_scale=x_scale,
        training_meta={"n_samples": int(n), "seed": int(seed)},
    )


def gps_score(model: ClassifierModel, sps) -> float:
    """GPS index [1, gamma] . coeffs."""
    gamma = sps.gamma if isinstance(sps, SPSVector) else np.asarray(sps, dtype=np.float64)
    if gamma.shape != (model.n_features,):
        raise DimensionMismatch(f"SPS has {gamma.size} entries, model expects {model.n_features}")
    return float(model.coeffs[0] + gamma @ model.coeffs[1:])


def predict_scores(model: ClassifierModel, features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] != model.n_features:
        raise DimensionMismatch(f"features have {x.shape[1]} columns, model expects {model.n_features}")
    return model.coeffs[0] + x @ model.coeffs[1:]


def _roc_points(scores: np.ndarray, labels: np.ndarray):
    """Operating points for every distinct score, ascending, with a final +inf.

    Predicted positive when score >= threshold.
    """
    fpr, tpr, desc = roc_curve(labels, scores, drop_intermediate=False)
    # roc_curve leads with a threshold above every score; it becomes the +inf entry.
    thresholds = np.append(desc[1:][::-1], np.inf)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    tp = np.rint(tpr[::-1] * n_pos).astype(np.int64)
    fp = np.rint(fpr[::-1] * n_neg).astype(np.int64)
    sens = tp / n_pos
    spec = 1.0 - fp / n_neg
    return thresholds, sens, spec, tp, fp


def mann_whitney_auc(scores, labels) -> float:
    """U / (n1 n0); ties earn half credit."""
    s, y = _check_scores(scores, labels)
    return float(roc_auc_score(y, s))


def roc_analyze(scores, labels, n_boot: int = 0, seed: int = 0, workers: int = 1) -> ROCResult:
    """ROC sweep over all distinct scores, its AUC and the Youden-optimal threshold.

    With n_boot > 0 a stratified bootstrap CI is attached; otherwise ci is (nan, nan).
    """
    s, y = _check_scores(scores, labels)
    thresholds, sens, spec, tp, fp = _roc_points(s, y)
    auc = float(roc_auc_score(y, s))

    youden = sens + spec - 1.0
    best = int(np.argmax(youden))
    n_neg = int((y == 0).sum())
    accuracy = float((tp[best] + (n_neg - fp[best])) / y.size)

    ci = (math.nan, math.nan)
    if n_boot:
        ci = bootstrap_auc_ci(s, y, n_boot=n_boot, seed=seed, workers=workers)
        if not ci[0] - 1e-12 <= auc <= ci[1] + 1e-12:
            logger.warning(f"AUC {auc:.4f} falls outside its bootstrap CI ({ci[0]:.4f}, {ci[1]:.4f})")
    return ROCResult(
        thresholds=thresholds,
        sens=sens,
        spec=spec,
        auc=auc,
        ci=ci,
        optimal_threshold=float(thresholds[best]),
        accuracy_at_optimal=accuracy,
    )


def bootstrap_auc_ci(
    scores,
    labels,
    n_boot: int = DEFAULT_N_BOOT,
    seed: int = 0,
    workers: int = 1,
) -> Tuple[float, float]:
    """Percentile 95% CI of the AUC over class-stratified resamples.

    Replica b draws from its own derived seed, so the result does not depend
    on ``workers``.
    """
    s, y = _check_scores(scores, labels)
    if n_boot < MIN_BOOT:
        raise InvalidComponent(f"n_boot must be >= {MIN_BOOT}")
    index = np.arange(y.size)

    def _replica(b: int) -> float:
        # Stratified draws keep both class counts, so every replica has an AUC.
        picked = resample(index, n_samples=y.size, stratify=y, random_state=derive_seed(seed, "bootstrap", b))
        return float(roc_auc_score(y[picked], s[picked]))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            aucs = np.fromiter(pool.map(_replica, range(n_boot)), dtype=np.float64, count=n_boot)
    else:
        aucs = np.fromiter((_replica(b) for b in range(n_boot)), dtype=np.float64, count=n_boot)
    lo, hi = np.percentile(aucs, [2.5, 97.5])
    return float(lo), float(hi)


def _pick_threshold(
    scores: np.ndarray,
    labels: np.ndarray,
    rule: str,
    rng: Optional[np.random.Generator],
) -> float:
    if rule == "midpoint":
        return float((scores[labels == 1].mean() + scores[labels == 0].mean()) / 2.0)
    thresholds, sens, spec, _, _ = _roc_points(scores, labels)
    youden = sens + spec - 1.0
    tied = np.flatnonzero(youden >= youden.max() - 1e-12)
    if rng is None:
        return float(thresholds[tied[0]])
    return float(thresholds[rng.choice(tied)])


def loocv_accuracy(
    features,
    labels,
    n_components: Optional[int] = None,
    threshold_rule: Literal["youden", "midpoint"] = "youden",
    repeats: int = 1,
    seed: int = 0,
) -> float:
    """Leave-one-out accuracy of PLS + training-set threshold.

    The first pass breaks Youden ties toward the lowest threshold; extra
    ``repeats`` break them with seeded draws and the mean accuracy is returned.
    """
    x, y = _check_xy(features, labels)
    n, p = x.shape
    if n < 5:
        raise TooFewSamples(f"LOOCV needs at least 5 samples, got {n}")
    if threshold_rule not in ("youden", "midpoint"):
        raise InvalidComponent(f"unknown threshold rule {threshold_rule!r}")
    if repeats < 1:
        raise InvalidComponent("repeats must be >= 1")

    accuracies = []
    for r in range(repeats):
        rng = None if r == 0 else np.random.default_rng(derive_seed(seed, "loocv", r))
        correct = 0
        evaluated = 0
        for i in range(n):
            train = np.arange(n) != i
            y_train = y[train]
            if y_train.min() == y_train.max():
                logger.warning(f"Skipping LOOCV fold {i}: training labels are single-class")
                continue
            k = n_components or default_n_components(n - 1, p)
            k = min(k, p, n - 2)
            model = fit_pls(x[train], y_train, n_components=k, seed=seed)
            train_scores = predict_scores(model, x[train])
            threshold = _pick_threshold(train_scores, y_train, threshold_rule, rng)
            predicted = int(predict_scores(model, x[i : i + 1])[0] >= threshold)
            correct += int(predicted == y[i])
            evaluated += 1
        if evaluated == 0:
            raise SingleClass("every LOOCV fold was single-class")
        accuracies.append(correct / evaluated)
    return float(np.mean(accuracies))


def select_n_components(features, labels, max_components: Optional[int] = None, seed: int = 0) -> int:
    """Component count with the best LOOCV accuracy; ties go to fewer components."""
    x, y = _check_xy(features, labels)
    n, p = x.shape
    limit = min(max_components or DEFAULT_MAX_COMPONENTS, p, n - 2)
    best_k, best_acc = 1, -1.0
    for k in range(1, max(limit, 1) + 1):
        acc = loocv_accuracy(x, y, n_components=k, seed=seed)
        logger.debug(f"LOOCV accuracy with {k} components: {acc:.4f}")
        if acc > best_acc:
            best_k, best_acc = k, acc
    return best_k


def pointwise_f(values: np.ndarray, groups: np.ndarray, n_groups: int) -> np.ndarray:
    """One-way ANOVA F statistic per column; 0/0 counts as 0."""
    n = values.shape[0]
    counts = np.bincount(groups, minlength=n_groups).astype(np.float64)
    sums = np.zeros((n_groups, values.shape[1]))
    np.add.at(sums, groups, values)
    means = sums / counts[:, None]
    grand = values.mean(axis=0)
    between = (counts[:, None] * (means - grand) ** 2).sum(axis=0) / (n_groups - 1)
    within = ((values - means[groups]) ** 2).sum(axis=0) / (n - n_groups)
    f = np.zeros_like(between)
    np.divide(between, within, out=f, where=within > 0)
    f[(within == 0) & (between > 0)] = np.inf
    return f


def permutation_functional_anova(groups: Sequence, n_perm: int = DEFAULT_N_PERM, seed: int = 0) -> float:
    """Permutation p-value of the summed pointwise F statistic across SPS coordinates."""
    arrays = [np.atleast_2d(np.asarray(g, dtype=np.float64)) for g in groups]
    if len(arrays) < 2 or any(a.shape[0] < 3 for a in arrays):
        raise TooFewSamples("need at least 2 groups with at least 3 members each")
    if len({a.shape[1] for a in arrays}) != 1:
        raise DimensionMismatch("all groups must have the same SPS length")
    if n_perm < 1:
        raise InvalidComponent("n_perm must be >= 1")

    values = np.vstack(arrays)
    membership = np.concatenate([np.full(a.shape[0], g) for g, a in enumerate(arrays)])
    n_groups = len(arrays)
    observed = float(pointwise_f(values, membership, n_groups).sum())

    exceed = 0
    tol = 1e-9 * max(1.0, abs(observed)) if np.isfinite(observed) else 0.0
    for b in range(n_perm):
        rng = np.random.default_rng(derive_seed(seed, "permutation", b))
        stat = float(pointwise_f(values, rng.permutation(membership), n_groups).sum())
        if stat >= observed - tol:
            exceed += 1
    p_value = (1 + exceed) / (1 + n_perm)
    logger.debug(f"Permutation ANOVA: statistic={observed:.4g}, p={p_value:.4g}")
    return p_value


def model_to_dict(model: ClassifierModel) -> dict:
    return {
        "coeffs": model.coeffs.tolist(),
        "n_components": model.n_components,
        "x_mean": model.x_mean.tolist(),
        "x_scale": model.x_scale.tolist(),
        "training_meta": dict(model.training_meta),
    }


def save_model(model: ClassifierModel, path: str):
    with open(path, "w") as f:
        json.dump(model_to_dict(model), f, indent=4, sort_keys=True)


def load_model(path: str) -> ClassifierModel:
    try:
        with open(path, "r") as f:
            data = json.load(f)
        model = ClassifierModel(
            coeffs=np.asarray(data["coeffs"], dtype=np.float64),
            n_components=int(data["n_components"]),
            x_mean=np.asarray(data["x_mean"], dtype=np.float64),
            x_scale=np.asarray(data["x_scale"], dtype=np.float64),
            training_meta=dict(data.get("training_meta", {})),
        )
    except (OSError, ValueError, KeyError, TypeError) as e:
        raise ParseError(f"could not read model from {path}: {e}") from e
    if model.x_mean.size != model.n_features or model.x_scale.size != model.n_features:
        raise ParseError(f"model file {path} has inconsistent dimensions")
    return model
