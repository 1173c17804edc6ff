"""Regression learners: a CART-style tree, a bagged ensemble, and the
dummy mean baseline.

Splits minimise the summed squared deviation of the two children from
their means; ties are broken by lowest feature index, then lowest
threshold, so fitting is bit-reproducible. The ensemble exposes
per-learner predictions and their population variance, which the online
loop uses as its uncertainty signal, and tracks per-learner ages
(predictions since last (re)train) for TTL-based refresh.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, FitError, ShapeError


@dataclass
class TreeParams:
    max_depth: int = 8
    min_samples_leaf: int = 1
    n_candidate_splits: Optional[int] = None  # None = all midpoints

    def __post_init__(self):
        if self.max_depth < 1 or self.min_samples_leaf < 1:
            raise ConfigError("max_depth and min_samples_leaf must be >= 1")
        if self.n_candidate_splits is not None and self.n_candidate_splits < 1:
            raise ConfigError("n_candidate_splits must be >= 1")

    def to_dict(self) -> dict:
        return {"max_depth": self.max_depth,
                "min_samples_leaf": self.min_samples_leaf,
                "n_candidate_splits": self.n_candidate_splits}

    @classmethod
    def from_dict(cls, d: dict) -> "TreeParams":
        return cls(**d)


@dataclass
class LabeledSet:
    """Training rows: features (n, d) and target bpm (n,)."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2 or self.y.ndim != 1 or self.X.shape[0] != self.y.size:
            raise ShapeError(f"bad labeled-set shapes {self.X.shape} / {self.y.shape}")
        if self.X.size and not np.isfinite(self.X).all():
            raise ShapeError("non-finite feature value")
        if self.y.size and not np.isfinite(self.y).all():
            raise ShapeError("non-finite target value")

    def __len__(self) -> int:
        return self.y.size

    @classmethod
    def from_records(cls, records) -> "LabeledSet":
        X = np.stack([r.features for r in records]) if records else np.empty((0, 0))
        y = np.array([r.bpm for r in records], dtype=float)
        return cls(X, y)


class _Node:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, value, feature=None, threshold=None, left=None, right=None):
        self.value = value
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right

    @property
    def is_leaf(self) -> bool:
        return self.feature is None


def _best_split(X: np.ndarray, y: np.ndarray, params: TreeParams):
    """Exhaustive (feature, midpoint) search; returns (cost, j, thr) or None.

    All features are scanned in one set of 2D array operations; the
    flattened feature-major argmin keeps the documented tie-break (lowest
    feature index, then lowest threshold).
    """
    if params.n_candidate_splits is not None:
        return _best_split_subsampled(X, y, params)
    n, d = X.shape
    msl = params.min_samples_leaf
    if n < 2 * msl:
        return None
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    ys = y[order]
    cy = np.cumsum(ys, axis=0)
    cy2 = np.cumsum(ys * ys, axis=0)
    p = np.arange(1, n)  # boundary index: p rows go left
    nl = p.astype(float)[:, None]
    sse_l = cy2[:-1] - cy[:-1] ** 2 / nl
    sse_r = (cy2[-1] - cy2[:-1]) - (cy[-1] - cy[:-1]) ** 2 / (n - nl)
    cost = sse_l + sse_r
    valid = xs[1:] != xs[:-1]
    if msl > 1:
        valid &= ((p >= msl) & (n - p >= msl))[:, None]
    cost = np.where(valid, cost, np.inf)
    k = int(np.argmin(cost.T))
    j, pk = divmod(k, n - 1)
    if not np.isfinite(cost[pk, j]):
        return None
    thr = 0.5 * (xs[pk, j] + xs[pk + 1, j])
    return (float(cost[pk, j]), int(j), float(thr))


def _best_split_subsampled(X: np.ndarray, y: np.ndarray, params: TreeParams):
    """Per-feature scan honouring `n_candidate_splits` subsampling."""
    n = y.size
    msl = params.min_samples_leaf
    best = None
    total_y = y.sum()
    total_y2 = (y * y).sum()
    for j in range(X.shape[1]):
        xs = X[:, j]
        order = np.argsort(xs, kind="stable")
        xs_s = xs[order]
        ys = y[order]
        change = np.nonzero(xs_s[1:] != xs_s[:-1])[0] + 1
        pos = change[(change >= msl) & (n - change >= msl)]
        if pos.size == 0:
            continue
        if params.n_candidate_splits is not None and pos.size > params.n_candidate_splits:
            keep = np.unique(np.linspace(0, pos.size - 1,
                                         params.n_candidate_splits).round().astype(int))
            pos = pos[keep]
        cy = np.concatenate(([0.0], np.cumsum(ys)))
        cy2 = np.concatenate(([0.0], np.cumsum(ys * ys)))
        nl = pos.astype(float)
        sse_l = cy2[pos] - cy[pos] ** 2 / nl
        sse_r = (total_y2 - cy2[pos]) - (total_y - cy[pos]) ** 2 / (n - nl)
        cost = sse_l + sse_r
        k = int(np.argmin(cost))  # first minimum -> lowest threshold on ties
        if best is None or cost[k] < best[0]:
            thr = 0.5 * (xs_s[pos[k] - 1] + xs_s[pos[k]])
            best = (float(cost[k]), j, float(thr))
    return best


def _grow(X: np.ndarray, y: np.ndarray, params: TreeParams, depth: int) -> _Node:
    node_value = float(y.mean())
    n = y.size
    if depth >= params.max_depth or n < 2 * params.min_samples_leaf:
        return _Node(node_value)
    sse = float(((y - node_value) ** 2).sum())
    if sse <= 1e-12:
        return _Node(node_value)
    best = _best_split(X, y, params)
    if best is None or not (best[0] < sse - 1e-12):
        return _Node(node_value)
    _, j, thr = best
    left = X[:, j] <= thr
    return _Node(node_value, j, thr,
                 _grow(X[left], y[left], params, depth + 1),
                 _grow(X[~left], y[~left], params, depth + 1))


@dataclass
class RegressionTree:
    root: _Node
    params: TreeParams

    def predict(self, features) -> float:
        node = self.root
        f = np.asarray(features, dtype=float)
        while not node.is_leaf:
            node = node.left if f[node.feature] <= node.threshold else node.right
        return node.value

    def to_dict(self) -> dict:
        def encode(node: _Node):
            if node.is_leaf:
                return {"value": node.value}
            return {"value": node.value, "feature": node.feature,
                    "threshold": node.threshold,
                    "left": encode(node.left), "right": encode(node.right)}
        return {"params": self.params.to_dict(), "root": encode(self.root)}

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        def decode(nd) -> _Node:
            if "feature" not in nd:
                return _Node(nd["value"])
            return _Node(nd["value"], nd["feature"], nd["threshold"],
                         decode(nd["left"]), decode(nd["right"]))
        return cls(decode(d["root"]), TreeParams.from_dict(d["params"]))


def fit_tree(data: LabeledSet, params: TreeParams, seed: int = 0) -> RegressionTree:
    """Fit a CART tree. Deterministic given (data, params); `seed` is kept
    in the signature for symmetry with the ensemble API (tie-breaking is
    already deterministic)."""
    if len(data) == 0:
        raise FitError("cannot fit a tree on an empty labeled set")
    return RegressionTree(_grow(data.X, data.y, params, 0), params)


MIN_BOOTSTRAP_ROWS = 4


@dataclass
class Ensemble:
    learners: list[RegressionTree]
    ages: list[int]
    params: TreeParams
    rng_seed: int

    def __post_init__(self):
        if len(self.learners) != len(self.ages) or not self.learners:
            raise ConfigError("learners and ages must have equal length >= 1")

    @property
    def n_learners(self) -> int:
        return len(self.learners)

    def to_dict(self) -> dict:
        return {"params": self.params.to_dict(), "rng_seed": self.rng_seed,
                "ages": list(self.ages),
                "learners": [t.to_dict() for t in self.learners]}

    @classmethod
    def from_dict(cls, d: dict) -> "Ensemble":
        return cls([RegressionTree.from_dict(t) for t in d["learners"]],
                   list(d["ages"]), TreeParams.from_dict(d["params"]), d["rng_seed"])


def bootstrap_indices(n: int, rng: np.random.Generator) -> np.ndarray:
    """Resample indices (size n, with replacement); identity below the
    diversity floor where resampling 1-3 rows only destroys information."""
    if n < MIN_BOOTSTRAP_ROWS:
        return np.arange(n)
    return rng.integers(0, n, n)


def fit_ensemble(data: LabeledSet, L: int, params: TreeParams, seed: int) -> Ensemble:
    """Bag L trees over per-learner bootstrap resamples of `data`."""
    if len(data) == 0:
        raise FitError("cannot fit an ensemble on an empty labeled set")
    if L < 1:
        raise ConfigError("L must be >= 1")
    learners = []
    for i in range(L):
        rng = np.random.default_rng([seed, i])
        idx = bootstrap_indices(len(data), rng)
        learners.append(fit_tree(LabeledSet(data.X[idx], data.y[idx]), params, seed))
    return Ensemble(learners, [0] * L, params, seed)


def predict_ensemble(ensemble: Ensemble, features) -> tuple[float, float, list[float]]:
    """(mean bpm, population variance, per-learner predictions).

    Every call counts as one prediction: all learner ages increment.
    """
    per_learner = [t.predict(features) for t in ensemble.learners]
    arr = np.array(per_learner)
    mean = float(arr.mean())
    variance = float(arr.var())
    for i in range(ensemble.n_learners):
        ensemble.ages[i] += 1
    return mean, variance, per_learner


def retrain_learner(ensemble: Ensemble, i: int, recent: LabeledSet,
                    seed_salt: int = 0) -> None:
    """Replace learner i with a tree fit on `recent` (no bootstrap) and
    reset its age."""
    if len(recent) == 0:
        raise FitError("cannot retrain on an empty labeled set")
    if not 0 <= i < ensemble.n_learners:
        raise ConfigError(f"learner index {i} out of range")
    ensemble.learners[i] = fit_tree(recent, ensemble.params,
                                    seed=ensemble.rng_seed + seed_salt)
    ensemble.ages[i] = 0


def dummy_fit(data: LabeledSet) -> float:
    """The dummy baseline: memorise the training-set mean bpm."""
    if len(data) == 0:
        raise FitError("cannot fit the dummy predictor on empty data")
    return float(data.y.mean())


def dummy_predict(model: float, features=None) -> float:
    return model
