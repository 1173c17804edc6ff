"""Experiment runners and metrics: same-phase 60/40 split, cross-phase
transfer, online active-learning runs, and the O-parameter sweep.

All error figures use the pre-query prediction for every minute, so a
queried label never flatters the minute it was queried on; the lenient
variant over non-queried minutes only is reported as `mae_unqueried`.
Query accounting includes the N bootstrap minutes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ExperimentError, MetricError
from .ingest import MinuteRecord
from .ppaw import PpawConfig, StepOutcome, ppaw_run
from .regress import (
    LabeledSet,
    TreeParams,
    dummy_fit,
    dummy_predict,
    fit_ensemble,
    predict_ensemble,
)


@dataclass
class RunReport:
    mae: float
    mse: float
    mae_unqueried: Optional[float]
    query_fraction: float
    n_minutes: int
    config: dict
    trace_path: Optional[str] = None

    def to_json_dict(self) -> dict:
        return {
            "mae": self.mae,
            "mse": self.mse,
            "mae_unqueried": self.mae_unqueried,
            "query_fraction": self.query_fraction,
            "n_minutes": self.n_minutes,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"


def mae(pred: Sequence[float], truth: Sequence[float]) -> float:
    p = np.asarray(pred, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.size == 0 or p.shape != t.shape:
        raise MetricError(f"need equal non-empty lengths, got {p.size}/{t.size}")
    return float(np.abs(p - t).mean())


def mse(pred: Sequence[float], truth: Sequence[float]) -> float:
    p = np.asarray(pred, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.size == 0 or p.shape != t.shape:
        raise MetricError(f"need equal non-empty lengths, got {p.size}/{t.size}")
    return float(((p - t) ** 2).mean())


def _require_labeled(records: Sequence[MinuteRecord], context: str) -> None:
    for r in records:
        if r.bpm is None:
            raise ExperimentError(f"{context}: minute {r.minute_index} is unlabeled")


def _offline_eval(train: Sequence[MinuteRecord], test: Sequence[MinuteRecord],
                  L: int, tree: TreeParams, seed: int,
                  predictor: str) -> tuple[float, float]:
    data = LabeledSet.from_records(train)
    truth = [r.bpm for r in test]
    if predictor == "dummy":
        model = dummy_fit(data)
        preds = [dummy_predict(model, r.features) for r in test]
    elif predictor == "forest":
        ensemble = fit_ensemble(data, L, tree, seed)
        preds = [predict_ensemble(ensemble, r.features)[0] for r in test]
    else:
        raise ExperimentError(f"unknown predictor '{predictor}'")
    return mae(preds, truth), mse(preds, truth)


def split_same_phase(n: int, train_frac: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded uniform shuffle split; train and test partition range(n)."""
    if not 0.0 < train_frac < 1.0:
        raise ExperimentError("train_frac must be in (0, 1)")
    perm = np.random.default_rng([seed, 11]).permutation(n)
    cut = int(round(n * train_frac))
    if cut == 0 or cut == n:
        raise ExperimentError("split leaves an empty side")
    return perm[:cut], perm[cut:]


def run_offline_same_phase(records: Sequence[MinuteRecord], train_frac: float,
                           L: int = 10, tree: TreeParams | None = None,
                           seed: int = 42, predictor: str = "forest") -> RunReport:
    """Shuffle one phase's records, fit on `train_frac`, test on the rest."""
    if len(records) < 10:
        raise ExperimentError(f"need >= 10 records, got {len(records)}")
    _require_labeled(records, "same-phase split")
    tree = tree or TreeParams()
    train_idx, test_idx = split_same_phase(len(records), train_frac, seed)
    train = [records[i] for i in train_idx]
    test = [records[i] for i in test_idx]
    m_abs, m_sq = _offline_eval(train, test, L, tree, seed, predictor)
    return RunReport(m_abs, m_sq, m_abs, 1.0, len(records), {
        "mode": "offline-same-phase", "predictor": predictor,
        "train_frac": train_frac, "L": L, "tree": tree.to_dict(), "seed": seed,
    })


def run_offline_cross_phase(train: Sequence[MinuteRecord],
                            test: Sequence[MinuteRecord],
                            L: int = 10, tree: TreeParams | None = None,
                            seed: int = 42, predictor: str = "forest") -> RunReport:
    """Fit on one whole phase, evaluate on another."""
    if len(train) < 10 or len(test) < 10:
        raise ExperimentError("need >= 10 records per phase")
    _require_labeled(train, "cross-phase train")
    _require_labeled(test, "cross-phase test")
    tree = tree or TreeParams()
    m_abs, m_sq = _offline_eval(train, test, L, tree, seed, predictor)
    return RunReport(m_abs, m_sq, m_abs, 1.0, len(train) + len(test), {
        "mode": "offline-cross-phase", "predictor": predictor,
        "L": L, "tree": tree.to_dict(), "seed": seed,
    })


def run_ppaw_experiment(records: Sequence[MinuteRecord],
                        cfg: PpawConfig) -> tuple[RunReport, list[StepOutcome]]:
    """Online run over the full labeled stream.

    MAE/MSE cover every minute after the initial N (pre-query predictions
    throughout); `mae_unqueried` covers only the minutes the sensor was
    not asked for; query_fraction counts the N bootstrap minutes as
    queried.
    """
    _require_labeled(records, "online run")
    outcomes = ppaw_run(cfg, list(records))
    truth = [r.bpm for r in records[cfg.N:]]
    preds = [o.predicted_bpm for o in outcomes]
    n_queried = sum(o.queried for o in outcomes)
    unq = [(o.predicted_bpm, t) for o, t in zip(outcomes, truth) if not o.queried]
    mae_unq = mae([p for p, _ in unq], [t for _, t in unq]) if unq else None
    report = RunReport(
        mae=mae(preds, truth),
        mse=mse(preds, truth),
        mae_unqueried=mae_unq,
        query_fraction=(cfg.N + n_queried) / len(records),
        n_minutes=len(records),
        config={"mode": "ppaw", **cfg.to_dict()},
    )
    return report, outcomes


def sweep_O(records: Sequence[MinuteRecord], base_cfg: PpawConfig,
            O_values: Sequence[float]) -> list[RunReport]:
    """One online run per O on the identical stream and seed."""
    if not O_values:
        raise ExperimentError("O_values must be non-empty")
    reports = []
    for o in O_values:
        cfg = PpawConfig.from_dict({**base_cfg.to_dict(), "O": float(o)})
        report, _ = run_ppaw_experiment(records, cfg)
        reports.append(report)
    return reports


def sweep_table_csv(reports: Sequence[RunReport]) -> str:
    """`O,mae,mse,query_fraction` comparison table."""
    lines = ["O,mae,mse,query_fraction"]
    for r in reports:
        lines.append(f"{r.config['O']!r},{r.mae!r},{r.mse!r},{r.query_fraction!r}")
    return "\n".join(lines) + "\n"


def trace_csv(outcomes: Sequence[StepOutcome]) -> str:
    """Per-minute trace export."""
    lines = ["minute_index,predicted_bpm,variance,queried,true_bpm,"
             "retrained_on_error,retrained_on_ttl"]
    for o in outcomes:
        true_bpm = "" if o.true_bpm is None else repr(o.true_bpm)
        lines.append(f"{o.minute_index},{o.predicted_bpm!r},{o.variance!r},"
                     f"{'true' if o.queried else 'false'},{true_bpm},"
                     f"{o.retrained_on_error},{o.retrained_on_ttl}")
    return "\n".join(lines) + "\n"


def parse_trace_csv(text: str) -> list[StepOutcome]:
    lines = [ln for ln in text.split("\n") if ln]
    header = ("minute_index,predicted_bpm,variance,queried,true_bpm,"
              "retrained_on_error,retrained_on_ttl")
    if not lines or lines[0] != header:
        raise MetricError("trace CSV header mismatch")
    out = []
    for line in lines[1:]:
        m, p, v, q, t, roe, rot = line.split(",")
        out.append(StepOutcome(int(m), float(p), float(v), q == "true",
                               None if t == "" else float(t), int(roe), int(rot)))
    return out


def plot_data_csv(outcomes: Sequence[StepOutcome],
                  truth_by_minute: dict[int, float] | None = None) -> str:
    """`minute_index,true_bpm,predicted_bpm` rows for figure rendering.

    True bpm comes from the provided lookup when available, else from the
    queried value in the trace, else is left blank.
    """
    lines = ["minute_index,true_bpm,predicted_bpm"]
    for o in outcomes:
        t = None
        if truth_by_minute is not None and o.minute_index in truth_by_minute:
            t = truth_by_minute[o.minute_index]
        elif o.true_bpm is not None:
            t = o.true_bpm
        lines.append(f"{o.minute_index},{'' if t is None else repr(t)},"
                     f"{o.predicted_bpm!r}")
    return "\n".join(lines) + "\n"
