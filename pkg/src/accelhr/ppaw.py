"""Online active-learning loop: predict heart rate each minute, query the
energy-expensive sensor only when the ensemble variance is an outlier.

Per minute: the ensemble predicts (mean, variance) from the acceleration
features. If the variance is an outlier against the last N variances
(above mean + O * population std; always while the history is still
filling), the true heart rate is queried, pushed into the labeled buffer,
and the learners are taught; any learner whose own prediction missed the
truth by more than T bpm is retrained on the buffer. Independently, any
learner that has made TTL predictions since its last (re)train is
retrained and its age reset.

Teaching vs retraining: teaching refits every learner on a fresh
bootstrap resample of the labeled buffer without touching ages, keeping
the ensemble diverse; error-path retraining refits on the full buffer
and resets the learner's age; the TTL refresh refits each expired
learner on its own bootstrap resample (and resets its age) so that the
lockstep expiry of ages cannot collapse the ensemble into identical
learners with zero variance.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, InitError, RunError, SensorError
from .ingest import MinuteRecord
from .regress import (
    Ensemble,
    LabeledSet,
    TreeParams,
    bootstrap_indices,
    fit_ensemble,
    fit_tree,
    predict_ensemble,
    retrain_learner,
)


@dataclass
class PpawConfig:
    L: int = 10
    N: int = 5
    O: float = 3.0
    T: float = 10.0
    TTL: int = 10
    tree: TreeParams = field(default_factory=TreeParams)
    seed: int = 42

    def __post_init__(self):
        if self.L < 1:
            raise ConfigError("L must be >= 1")
        if self.N < 2:
            raise ConfigError("N must be >= 2")
        if not self.O > 0:
            raise ConfigError("O must be > 0")
        if not self.T > 0:
            raise ConfigError("T must be > 0")
        if self.TTL < 1:
            raise ConfigError("TTL must be >= 1")

    def to_dict(self) -> dict:
        return {"L": self.L, "N": self.N, "O": self.O, "T": self.T,
                "TTL": self.TTL, "tree": self.tree.to_dict(), "seed": self.seed}

    @classmethod
    def from_dict(cls, d: dict) -> "PpawConfig":
        d = dict(d)
        d["tree"] = TreeParams.from_dict(d.get("tree", TreeParams().to_dict()))
        return cls(**d)


@dataclass
class PpawState:
    ensemble: Ensemble
    var_history: deque  # last N prediction variances
    labeled_X: deque    # last N feature vectors with ground-truth labels
    labeled_y: deque
    minutes_seen: int = 0

    def buffer(self) -> LabeledSet:
        return LabeledSet(np.stack(list(self.labeled_X)),
                          np.array(list(self.labeled_y)))


@dataclass
class StepOutcome:
    minute_index: int
    predicted_bpm: float
    variance: float
    queried: bool
    true_bpm: Optional[float]
    retrained_on_error: int
    retrained_on_ttl: int


def is_outlier(var_history: deque, variance: float, O: float) -> bool:
    """Outlier test against the variance history; appends `variance` after
    the check (evicting the oldest entry once the buffer is full).

    While the history still holds fewer than N entries the answer is
    always True: cold start queries unconditionally.
    """
    if len(var_history) < var_history.maxlen:
        result = True
    else:
        arr = np.array(var_history)
        result = bool(variance > arr.mean() + O * arr.std())
    var_history.append(variance)
    return result


def ppaw_init(cfg: PpawConfig, first_n: Sequence[tuple[np.ndarray, float]]) -> PpawState:
    """Build the initial state from exactly N labeled (features, bpm) pairs."""
    if len(first_n) != cfg.N:
        raise InitError(f"need exactly N={cfg.N} labeled records, got {len(first_n)}")
    X = np.stack([f for f, _ in first_n])
    y = np.array([b for _, b in first_n], dtype=float)
    ensemble = fit_ensemble(LabeledSet(X, y), cfg.L, cfg.tree, cfg.seed)
    return PpawState(
        ensemble=ensemble,
        var_history=deque(maxlen=cfg.N),
        labeled_X=deque((f for f, _ in first_n), maxlen=cfg.N),
        labeled_y=deque((b for _, b in first_n), maxlen=cfg.N),
    )


def _teach(state: PpawState, cfg: PpawConfig) -> None:
    """Refit every learner on a bootstrap resample of the labeled buffer.

    Ages are preserved: teaching is the routine update, not a forced
    retrain. The resample stream is keyed by the step counter so repeated
    teaching keeps the learners diverse yet fully reproducible.
    """
    data = state.buffer()
    ens = state.ensemble
    for i in range(ens.n_learners):
        rng = np.random.default_rng([cfg.seed, 7, state.minutes_seen, i])
        idx = bootstrap_indices(len(data), rng)
        ens.learners[i] = fit_tree(LabeledSet(data.X[idx], data.y[idx]),
                                   ens.params)


def ppaw_step(state: PpawState, minute: MinuteRecord,
              query: Callable[[MinuteRecord], float],
              cfg: PpawConfig) -> StepOutcome:
    """Run one minute of the online loop; returns the step's outcome.

    The reported prediction is always the pre-query one, so a queried
    label never leaks into its own minute's prediction.
    """
    ens = state.ensemble
    predicted, variance, per_learner = predict_ensemble(ens, minute.features)
    outlier = is_outlier(state.var_history, variance, cfg.O)

    queried = False
    true_bpm: Optional[float] = None
    retrained_on_error = 0
    retrained_on_ttl = 0

    if outlier:
        try:
            true_bpm = float(query(minute))
        except Exception as exc:
            # Leave the model untouched: roll back the age increments from
            # the prediction above (the variance history keeps its entry).
            for i in range(ens.n_learners):
                ens.ages[i] -= 1
            raise SensorError(f"heart-rate query failed: {exc}") from exc
        queried = True
        state.labeled_X.append(np.asarray(minute.features, dtype=float))
        state.labeled_y.append(true_bpm)
        _teach(state, cfg)
        buffer = state.buffer()
        for i, pred_i in enumerate(per_learner):
            if abs(pred_i - true_bpm) > cfg.T:
                retrain_learner(ens, i, buffer, seed_salt=state.minutes_seen)
                retrained_on_error += 1

    # TTL refresh: expired learners are refit on their own bootstrap
    # resample of the buffer and their age reset. Using the full buffer
    # here (as the error path does) would make every expired learner
    # identical; since ages expire in lockstep, that pins the ensemble
    # variance to exactly zero and the loop can never query again.
    ttl_buffer = None
    for i in range(ens.n_learners):
        if ens.ages[i] >= cfg.TTL:
            if ttl_buffer is None:
                ttl_buffer = state.buffer()
            rng = np.random.default_rng([cfg.seed, 13, state.minutes_seen, i])
            idx = bootstrap_indices(len(ttl_buffer), rng)
            ens.learners[i] = fit_tree(
                LabeledSet(ttl_buffer.X[idx], ttl_buffer.y[idx]), ens.params)
            ens.ages[i] = 0
            retrained_on_ttl += 1

    state.minutes_seen += 1
    return StepOutcome(minute.minute_index, predicted, variance, queried,
                       true_bpm, retrained_on_error, retrained_on_ttl)


def ppaw_run(cfg: PpawConfig, stream: Sequence[MinuteRecord]) -> list[StepOutcome]:
    """Replay the online loop over a fully labeled stream.

    The first N records bootstrap the ensemble (counted as queried for
    metric purposes by the evaluation layer); the rest are stepped in
    order with the recorded bpm serving as the sensor.
    """
    if len(stream) <= cfg.N:
        raise RunError(f"stream must hold more than N={cfg.N} records, "
                       f"got {len(stream)}")
    for r in stream:
        if r.bpm is None:
            raise RunError(f"minute {r.minute_index} lacks a true bpm (replay "
                           "requires a fully labeled stream)")
    state = ppaw_init(cfg, [(r.features, r.bpm) for r in stream[:cfg.N]])
    return [ppaw_step(state, rec, lambda r: r.bpm, cfg) for rec in stream[cfg.N:]]
