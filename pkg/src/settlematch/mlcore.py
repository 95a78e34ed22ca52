"""L2-regularized logistic regression with nested cross-validation.

The classifier explains where settlement datasets agree. Training
minimizes

    (1/n) sum_i log(1 + exp(-y_i (w . x_i + b))) + lambda ||w||^2

with labels in {-1, +1} and an unpenalized intercept, via deterministic
full-batch L-BFGS with Armijo backtracking. Hyperparameters come from an
inner stratified k-fold selecting on mean F1; evaluation uses an outer
group k-fold where all rows of a country share a fold, so no country
leaks between train and test. Odds-ratio confidence intervals come from
row bootstrap refits.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import ComputationError
from .featurize import NUMERIC_FEATURES, FeatureTable
from .rng import SplitMix64, derive_seed

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelConfig:
    lambda_grid: tuple[float, ...] = (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0)
    outer_folds: int = 5
    inner_folds: int = 5
    max_iterations: int = 1000
    tolerance: float = 1e-6
    seed: int = 0
    bootstrap_samples: int = 100

    def __post_init__(self):
        if self.outer_folds < 2 or self.inner_folds < 2:
            raise ValueError("folds must be at least 2")
        if not self.lambda_grid or any(l <= 0 for l in self.lambda_grid):
            raise ValueError("lambda grid must be nonempty and positive")

    def as_dict(self) -> dict:
        return {"lambda_grid": list(self.lambda_grid), "outer_folds": self.outer_folds,
                "inner_folds": self.inner_folds, "max_iterations": self.max_iterations,
                "tolerance": self.tolerance, "seed": self.seed,
                "bootstrap_samples": self.bootstrap_samples}


@dataclass(frozen=True)
class FittedModel:
    """Coefficients in standardized feature space plus the training stats."""

    feature_names: list[str]
    coefficients: np.ndarray
    intercept: float
    means: np.ndarray   # per feature; 0 for unstandardized columns
    stds: np.ndarray    # per feature; 1 for unstandardized columns
    regularization: float
    converged: bool
    n_iterations: int

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        Xs = (X - self.means) / self.stds
        return expit(Xs @ self.coefficients + self.intercept)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int8)

    def as_dict(self) -> dict:
        return {"coefficients": {n: float(c) for n, c in
                                 zip(self.feature_names, self.coefficients)},
                "intercept": self.intercept,
                "regularization": self.regularization,
                "converged": self.converged,
                "n_iterations": self.n_iterations}


def loss_and_gradient(X: np.ndarray, y01: np.ndarray, w: np.ndarray, b: float,
                      lam: float) -> tuple[float, np.ndarray, float]:
    """Objective value and its analytic gradient (w part, b part).

    Stable for margins of any magnitude: log(1+exp(t)) goes through
    logaddexp and the sigmoid through expit, so a margin of -1e4 yields a
    finite loss instead of overflow.
    """
    n = y01.size
    y_pm = 2.0 * y01 - 1.0
    margins = X @ w + b
    ym = y_pm * margins
    loss = float(np.logaddexp(0.0, -ym).mean()) + lam * float(w @ w)
    s = expit(-ym)
    gw = -(X.T @ (y_pm * s)) / n + 2.0 * lam * w
    gb = -float((y_pm * s).mean())
    return loss, gw, gb


def _lbfgs_minimize(fg, theta0: np.ndarray, max_iterations: int, tolerance: float,
                    memory: int = 10) -> tuple[np.ndarray, bool, int]:
    """Deterministic L-BFGS with Armijo backtracking line search.

    Stops when the relative loss change drops below ``tolerance`` or the
    iteration budget runs out.
    """
    theta = theta0.copy()
    f, g = fg(theta)
    s_list: list[np.ndarray] = []
    y_list: list[np.ndarray] = []
    rho_list: list[float] = []
    for it in range(1, max_iterations + 1):
        if s_list:
            q = g.copy()
            alphas = []
            for s, yv, rho in zip(reversed(s_list), reversed(y_list), reversed(rho_list)):
                a = rho * (s @ q)
                q -= a * yv
                alphas.append(a)
            gamma = (s_list[-1] @ y_list[-1]) / (y_list[-1] @ y_list[-1])
            r = gamma * q
            for (s, yv, rho), a in zip(zip(s_list, y_list, rho_list), reversed(alphas)):
                beta = rho * (yv @ r)
                r += s * (a - beta)
            direction = -r
        else:
            direction = -g
        gd = float(g @ direction)
        if gd >= 0.0:  # not a descent direction; restart from steepest descent
            direction = -g
            gd = float(g @ direction)
            if gd >= 0.0:
                return theta, True, it  # gradient numerically zero
        step = 1.0
        while True:
            theta_new = theta + step * direction
            f_new, g_new = fg(theta_new)
            if f_new <= f + 1e-4 * step * gd:
                break
            step *= 0.5
            if step < 1e-20:
                return theta, False, it
        s = theta_new - theta
        yv = g_new - g
        sy = float(s @ yv)
        if sy > 1e-12:
            s_list.append(s)
            y_list.append(yv)
            rho_list.append(1.0 / sy)
            if len(s_list) > memory:
                s_list.pop(0)
                y_list.pop(0)
                rho_list.pop(0)
        rel = abs(f - f_new) / max(abs(f), 1e-12)
        theta, f, g = theta_new, f_new, g_new
        if rel < tolerance:
            return theta, True, it
    return theta, False, max_iterations


def _standardization(X: np.ndarray, feature_names: list[str]) -> tuple[np.ndarray, np.ndarray]:
    """Training means/stds; one-hot indicator columns stay untouched."""
    means = np.zeros(X.shape[1])
    stds = np.ones(X.shape[1])
    for j, name in enumerate(feature_names):
        if name in NUMERIC_FEATURES:
            means[j] = X[:, j].mean()
            sd = X[:, j].std()
            stds[j] = sd if sd > 1e-12 else 1.0
    return means, stds


def fit(X: np.ndarray, y: np.ndarray, lam: float, config: ModelConfig,
        feature_names: list[str] | None = None) -> FittedModel:
    """Fit the regularized model on (X, y) with labels in {0, 1}.

    Numeric features are standardized with statistics of these training
    rows only; the intercept is never penalized.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if feature_names is None:
        feature_names = [f"x{j}" if j < 3 else f"class_{j}" for j in range(X.shape[1])]
        feature_names[:min(3, X.shape[1])] = NUMERIC_FEATURES[:min(3, X.shape[1])]
    if not np.isfinite(X).all():
        raise ComputationError("design matrix contains non-finite values")
    classes = np.unique(y)
    if classes.size < 2:
        raise ComputationError("training data contains a single class")
    means, stds = _standardization(X, feature_names)
    Xs = (X - means) / stds
    d = X.shape[1]

    def fg(theta):
        loss, gw, gb = loss_and_gradient(Xs, y, theta[:d], float(theta[d]), lam)
        return loss, np.append(gw, gb)

    theta, converged, iters = _lbfgs_minimize(fg, np.zeros(d + 1),
                                              config.max_iterations, config.tolerance)
    if not converged:
        log.warning("optimizer hit the iteration budget (%d) without converging", iters)
    return FittedModel(list(feature_names), theta[:d].copy(), float(theta[d]),
                       means, stds, lam, converged, iters)


# -- metrics -------------------------------------------------------------------


def f1_score(predictions, labels) -> float:
    """F1 of the positive class; 0 by convention when P + R = 0."""
    p = np.asarray(predictions).astype(np.int8)
    t = np.asarray(labels).astype(np.int8)
    if p.shape != t.shape:
        raise ValueError("predictions and labels must have equal length")
    tp = int(((p == 1) & (t == 1)).sum())
    fp = int(((p == 1) & (t == 0)).sum())
    fn = int(((p == 0) & (t == 1)).sum())
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def balanced_accuracy(predictions, labels) -> float:
    """(TPR + TNR) / 2; requires both classes among the labels."""
    p = np.asarray(predictions).astype(np.int8)
    t = np.asarray(labels).astype(np.int8)
    if p.shape != t.shape:
        raise ValueError("predictions and labels must have equal length")
    pos = t == 1
    neg = t == 0
    if not pos.any() or not neg.any():
        raise ComputationError("balanced accuracy needs both classes in the labels")
    tpr = float((p[pos] == 1).mean())
    tnr = float((p[neg] == 0).mean())
    return 0.5 * (tpr + tnr)


# -- fold assignment -------------------------------------------------------------


def group_kfold(groups, k: int, seed: int) -> np.ndarray:
    """Assign whole groups (countries) to folds, balancing row counts.

    Greedy: largest group first into the currently smallest fold, ties
    broken by fold index; the seed only shuffles the order of equal-sized
    groups. Every group lands in exactly one fold.
    """
    groups = np.asarray(groups)
    uniq, counts = np.unique(groups, return_counts=True)
    if uniq.size < k:
        raise ComputationError(f"need at least {k} groups, got {uniq.size}")
    rng = SplitMix64(derive_seed(seed, "group_kfold"))
    tiebreak = rng.permutation(uniq.size)
    order = sorted(range(uniq.size), key=lambda i: (-counts[i], tiebreak[i]))
    fold_sizes = [0] * k
    fold_of = {}
    for i in order:
        f = min(range(k), key=lambda j: (fold_sizes[j], j))
        fold_of[uniq[i]] = f
        fold_sizes[f] += counts[i]
    assign = np.empty(groups.size, dtype=np.int32)
    for g, f in fold_of.items():
        assign[groups == g] = f
    return assign


def stratified_kfold(labels, k: int, seed: int) -> np.ndarray:
    """Per-class round-robin after a seeded shuffle.

    Keeps each fold's class proportions within one row of exact; every
    class must have at least k rows.
    """
    labels = np.asarray(labels)
    assign = np.empty(labels.size, dtype=np.int32)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        if idx.size < k:
            raise ComputationError(f"class {c} has {idx.size} rows, fewer than {k} folds")
        rng = SplitMix64(derive_seed(seed, "stratified_kfold", int(c)))
        shuffled = idx[rng.permutation(idx.size)]
        assign[shuffled] = np.arange(idx.size) % k
    return assign


# -- nested cross-validation ------------------------------------------------------


@dataclass(frozen=True)
class FoldResult:
    fold: int
    test_countries: list[str]
    chosen_lambda: float
    f1: float
    balanced_accuracy: float
    model: FittedModel


@dataclass(frozen=True)
class ModelResult:
    """Per-fold scores, aggregate mean and total range, odds ratios."""

    folds: list[FoldResult]
    f1_mean: float
    f1_range: tuple[float, float]
    balanced_accuracy_mean: float
    balanced_accuracy_range: tuple[float, float]
    config: ModelConfig
    odds_ratios: list[dict] = field(default_factory=list)
    selected_lambda: float | None = None

    def as_dict(self) -> dict:
        return {
            "schema_version": 1,
            "folds": [{
                "fold": fr.fold,
                "test_countries": list(fr.test_countries),
                "lambda": fr.chosen_lambda,
                "f1": fr.f1,
                "balanced_accuracy": fr.balanced_accuracy,
                "model": fr.model.as_dict(),
            } for fr in self.folds],
            "aggregate": {
                "f1_mean": self.f1_mean,
                "f1_range": list(self.f1_range),
                "balanced_accuracy_mean": self.balanced_accuracy_mean,
                "balanced_accuracy_range": list(self.balanced_accuracy_range),
            },
            "odds_ratios": self.odds_ratios,
            "selected_lambda": self.selected_lambda,
            "config": self.config.as_dict(),
        }

    def csv_header(self) -> list[str]:
        return ["feature", "odds_ratio", "ci_low", "ci_high"]

    def csv_rows(self) -> list[list]:
        return [[o["feature"], o["point"], o["lo"], o["hi"]] for o in self.odds_ratios]


def nested_cv(table: FeatureTable, config: ModelConfig) -> ModelResult:
    """Outer group k-fold evaluation around inner stratified selection.

    The inner loop picks the regularization maximizing mean F1 across its
    folds; the winning value refits on the full outer training split and
    is scored once on the held-out countries. Aggregates report the mean
    and the total range (lowest to highest fold).
    """
    names, X, y, groups = table.design_matrix()
    outer = group_kfold(groups, config.outer_folds, derive_seed(config.seed, "outer"))
    fold_results = []
    for f in range(config.outer_folds):
        test = outer == f
        train = ~test
        train_countries = set(groups[train].tolist())
        test_countries = set(groups[test].tolist())
        if train_countries & test_countries:
            raise AssertionError("country leaked between train and test folds")
        Xtr, ytr = X[train], y[train]
        inner = stratified_kfold(ytr, config.inner_folds,
                                 derive_seed(config.seed, "inner", f))
        best_lam = None
        best_score = -1.0
        for lam in config.lambda_grid:
            scores = []
            for g in range(config.inner_folds):
                val = inner == g
                model = fit(Xtr[~val], ytr[~val], lam, config, names)
                scores.append(f1_score(model.predict(Xtr[val]), ytr[val]))
            mean_f1 = sum(scores) / len(scores)
            if mean_f1 > best_score:
                best_score = mean_f1
                best_lam = lam
        model = fit(Xtr, ytr, best_lam, config, names)
        preds = model.predict(X[test])
        fold_results.append(FoldResult(
            fold=f,
            test_countries=sorted(table.countries[int(c)] for c in test_countries),
            chosen_lambda=best_lam,
            f1=f1_score(preds, y[test]),
            balanced_accuracy=balanced_accuracy(preds, y[test]),
            model=model,
        ))
    f1s = [fr.f1 for fr in fold_results]
    bas = [fr.balanced_accuracy for fr in fold_results]
    return ModelResult(
        folds=fold_results,
        f1_mean=sum(f1s) / len(f1s),
        f1_range=(min(f1s), max(f1s)),
        balanced_accuracy_mean=sum(bas) / len(bas),
        balanced_accuracy_range=(min(bas), max(bas)),
        config=config,
    )


def bootstrap_odds_ratios(table: FeatureTable, lam: float, config: ModelConfig) -> list[dict]:
    """Odds ratios exp(coef) with percentile bootstrap confidence bands.

    Rows are resampled with replacement (same size) and the model refit
    per replicate; the interval is the [2.5th, 97.5th] percentile of the
    replicate odds ratios (linear interpolation) around the full-data
    point estimate. A replicate that draws a single class is redrawn, at
    most 10 times.
    """
    names, X, y, _ = table.design_matrix()
    n = y.size
    point = fit(X, y, lam, config, names)
    samples = np.empty((config.bootstrap_samples, len(names)))
    for rep in range(config.bootstrap_samples):
        rng = SplitMix64(derive_seed(config.seed, "bootstrap", rep))
        for attempt in range(10):
            idx = rng.integers(n, n)
            if np.unique(y[idx]).size == 2:
                break
        else:
            raise ComputationError(f"bootstrap replicate {rep} degenerate after 10 redraws")
        samples[rep] = fit(X[idx], y[idx], lam, config, names).coefficients
    ors = np.exp(samples)
    lo, hi = np.percentile(ors, [2.5, 97.5], axis=0)
    return [{"feature": name, "point": float(np.exp(c)), "lo": float(l), "hi": float(h)}
            for name, c, l, h in zip(names, point.coefficients, lo, hi)]


def choose_lambda(result: ModelResult) -> float:
    """Most frequently selected fold lambda; ties resolve to the smallest,
    matching the inner loop's preference for the first best candidate."""
    lams = [fr.chosen_lambda for fr in result.folds]
    counts = {}
    for l in lams:
        counts[l] = counts.get(l, 0) + 1
    best = max(counts.values())
    return min(l for l, c in counts.items() if c == best)


def train_model(table: FeatureTable, config: ModelConfig) -> ModelResult:
    """Nested CV plus bootstrap odds ratios at the modal fold lambda."""
    result = nested_cv(table, config)
    lam = choose_lambda(result)
    odds = bootstrap_odds_ratios(table, lam, config)
    return ModelResult(
        folds=result.folds,
        f1_mean=result.f1_mean,
        f1_range=result.f1_range,
        balanced_accuracy_mean=result.balanced_accuracy_mean,
        balanced_accuracy_range=result.balanced_accuracy_range,
        config=config,
        odds_ratios=odds,
        selected_lambda=lam,
    )
