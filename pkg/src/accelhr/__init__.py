"""Minute-level heart rate prediction from wrist accelerometry.

Feature extraction over one-second windows, offline forest/dummy
baselines, an online active-learning loop that queries the expensive
heart-rate sensor only when the prediction ensemble is uncertain, and a
wearable/gateway link simulation with an energy ledger.
"""

from .errors import AccelHrError
from .features import FEATURE_NAMES, N_FEATURES, window_features
from .ingest import (
    AccelSample,
    AccelSeries,
    HrSample,
    HrSeries,
    MinuteRecord,
    SynthConfig,
    align_minutes,
    parse_accel_csv,
    parse_hr_csv,
    synth_stream,
)
from .ppaw import PpawConfig, PpawState, StepOutcome, ppaw_run
from .regress import Ensemble, LabeledSet, TreeParams, fit_ensemble, fit_tree
from .evaluate import (
    RunReport,
    mae,
    mse,
    run_offline_cross_phase,
    run_offline_same_phase,
    run_ppaw_experiment,
    sweep_O,
)
from .link import EnergyLedger, EnergyModel, run_local_session

__version__ = "0.1.0"

__all__ = [
    "AccelHrError", "AccelSample", "AccelSeries", "Ensemble", "EnergyLedger",
    "EnergyModel", "FEATURE_NAMES", "HrSample", "HrSeries", "LabeledSet",
    "MinuteRecord", "N_FEATURES", "PpawConfig", "PpawState", "RunReport",
    "StepOutcome", "SynthConfig", "TreeParams", "align_minutes", "fit_ensemble",
    "fit_tree", "mae", "mse", "parse_accel_csv", "parse_hr_csv", "ppaw_run",
    "run_local_session", "run_offline_cross_phase", "run_offline_same_phase",
    "run_ppaw_experiment", "sweep_O", "synth_stream", "window_features",
]
