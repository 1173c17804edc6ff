"""Statistical and spectral features of one-second acceleration windows.

Thirteen features are computed per axis (39 total for x/y/z) and then
averaged over the seconds of a minute so the feature stream lines up with
minute-resolution heart rate. Conventions are fixed so that tests can pin
exact values:

* standard deviation is the population std (ddof=0)
* percentiles interpolate linearly between order statistics
* skewness is m3 / m2**1.5, kurtosis is excess kurtosis m4 / m2**2 - 3,
  both defined as 0 when m2 < 1e-12
* zero crossings are counted on the mean-centred signal; exact zeros are
  skipped and never contribute a crossing on their own
* spectral energy is (1/M) * sum |X_k|^2 over the full DFT of the raw
  window (equals sum s[n]^2 by Parseval)
* spectral entropy is the Shannon entropy (natural log) of the normalised
  one-sided power spectrum, DC included; 0 when total power < 1e-12
"""

from __future__ import annotations

import numpy as np

from .errors import InsufficientDataError, ShapeError

AXES = ("x", "y", "z")
PER_AXIS_FEATURES = (
    "min", "max", "std", "median", "mean", "p25", "p75", "iqr",
    "skew", "kurt", "zc", "spec_energy", "spec_entropy",
)
FEATURE_NAMES = tuple(f"{a}_{f}" for a in AXES for f in PER_AXIS_FEATURES)
N_FEATURES = len(FEATURE_NAMES)  # 39

_VAR_EPS = 1e-12
_POWER_EPS = 1e-12

# Minimum number of valid one-second windows for a minute to count.
MIN_SECONDS_PER_MINUTE = 30


def _as_window(w) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1:
        raise ShapeError(f"axis window must be 1-D, got shape {w.shape}")
    if w.size < 2:
        raise ShapeError(f"axis window needs >= 2 samples, got {w.size}")
    if not np.isfinite(w).all():
        raise ShapeError("axis window contains non-finite values")
    return w


def _zero_crossings_block(centred: np.ndarray) -> np.ndarray:
    """Count sign changes per row, skipping exact zeros.

    A crossing is scored at index i when sign(s[i]) differs from the sign
    of the most recent earlier nonzero sample.
    """
    k, m = centred.shape
    s = np.sign(centred)
    nonzero = s != 0
    # Index of the latest nonzero sample at or before each position (-1 if none).
    idx = np.where(nonzero, np.arange(m)[None, :], -1)
    last = np.maximum.accumulate(idx, axis=1)
    prev = np.concatenate([np.full((k, 1), -1, dtype=np.int64), last[:, :-1]], axis=1)
    prev_sign = np.take_along_axis(s, np.maximum(prev, 0), axis=1)
    prev_sign = np.where(prev >= 0, prev_sign, 0.0)
    crossing = nonzero & (s * prev_sign < 0)
    return crossing.sum(axis=1)


def axis_feature_block(windows: np.ndarray) -> np.ndarray:
    """Features for a batch of same-length windows of one axis.

    ``windows`` has shape (k, m); returns shape (k, 13) with columns in
    PER_AXIS_FEATURES order. This is the vectorised workhorse behind both
    the scalar API and minute alignment.
    """
    w = np.asarray(windows, dtype=float)
    if w.ndim != 2 or w.shape[1] < 2:
        raise ShapeError(f"window batch must be (k, m>=2), got {w.shape}")

    mean = w.mean(axis=1)
    centred = w - mean[:, None]
    m2 = np.mean(centred ** 2, axis=1)
    m3 = np.mean(centred ** 3, axis=1)
    m4 = np.mean(centred ** 4, axis=1)
    std = np.sqrt(m2)
    safe_m2 = np.where(m2 >= _VAR_EPS, m2, 1.0)
    skew = np.where(m2 >= _VAR_EPS, m3 / safe_m2 ** 1.5, 0.0)
    kurt = np.where(m2 >= _VAR_EPS, m4 / safe_m2 ** 2 - 3.0, 0.0)

    p25, median, p75 = np.percentile(w, [25.0, 50.0, 75.0], axis=1)
    zc = _zero_crossings_block(centred).astype(float)

    spectrum = np.fft.rfft(w, axis=1)
    power = np.abs(spectrum) ** 2
    m = w.shape[1]
    # Weights reconstructing the full two-sided power sum from rfft bins.
    weights = np.full(power.shape[1], 2.0)
    weights[0] = 1.0
    if m % 2 == 0:
        weights[-1] = 1.0
    energy = power @ weights / m

    total = power.sum(axis=1)
    safe_total = np.where(total >= _POWER_EPS, total, 1.0)
    p = power / safe_total[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, p * np.log(p), 0.0)
    entropy = np.where(total >= _POWER_EPS, -terms.sum(axis=1), 0.0)

    out = np.empty((w.shape[0], len(PER_AXIS_FEATURES)))
    out[:, 0] = w.min(axis=1)
    out[:, 1] = w.max(axis=1)
    out[:, 2] = std
    out[:, 3] = median
    out[:, 4] = mean
    out[:, 5] = p25
    out[:, 6] = p75
    out[:, 7] = p75 - p25
    out[:, 8] = skew
    out[:, 9] = kurt
    out[:, 10] = zc
    out[:, 11] = energy
    out[:, 12] = entropy
    return out


def zero_crossings(window) -> int:
    """Zero crossings of a mean-centred one-second window."""
    w = _as_window(window)
    return int(_zero_crossings_block((w - w.mean())[None, :])[0])


def spectral_energy(window) -> float:
    """(1/M) * sum |X_k|^2 over the full DFT of the raw window."""
    w = _as_window(window)
    return float(axis_feature_block(w[None, :])[0, 11])


def spectral_entropy(window) -> float:
    """Shannon entropy (nats) of the one-sided power spectrum, DC included."""
    w = _as_window(window)
    return float(axis_feature_block(w[None, :])[0, 12])


def window_features(x, y, z) -> np.ndarray:
    """All 39 features of one second of tri-axial acceleration.

    Returns a vector ordered as FEATURE_NAMES (x block, y block, z block).
    """
    wx, wy, wz = _as_window(x), _as_window(y), _as_window(z)
    if not (wx.size == wy.size == wz.size):
        raise ShapeError(
            f"axis windows must share a length, got {wx.size}/{wy.size}/{wz.size}"
        )
    batch = axis_feature_block(np.stack([wx, wy, wz]))
    return batch.reshape(-1)


def minute_aggregate(seconds) -> np.ndarray:
    """Field-wise mean of per-second feature vectors over one minute."""
    arr = np.asarray(seconds, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != N_FEATURES:
        raise ShapeError(f"expected (k, {N_FEATURES}) feature vectors, got {arr.shape}")
    if arr.shape[0] < MIN_SECONDS_PER_MINUTE:
        raise InsufficientDataError(
            f"minute aggregation needs >= {MIN_SECONDS_PER_MINUTE} "
            f"second vectors, got {arr.shape[0]}"
        )
    return arr.mean(axis=0)
