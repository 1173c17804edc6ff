"""Time-series data model, CSV parsing, synthetic streams and alignment.

Acceleration is held column-wise (numpy arrays) because realistic streams
run to ~10^8 samples; `AccelSample` / `HrSample` remain available as the
per-row view. Timestamps are integer milliseconds since the stream epoch
and minute m covers [m*60000, (m+1)*60000), half-open.

The synthetic generator produces regime-switching activity (rest / walk /
exercise bouts) and drives heart rate from a lagged (30 s EMA) response to
the latent activity intensity, with a per-phase shift of the mapping so
the accel->HR relationship drifts between phases.
"""

from __future__ import annotations

import json
import math
import os
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np
import polars as pl
from scipy.signal import lfilter

from . import features as feat
from .errors import (
    AlignmentError,
    ConfigError,
    OrderingError,
    ParseError,
    RangeError,
)

ACCEL_HEADER = "t_ms,x,y,z"
HR_HEADER = "minute_index,bpm"
BPM_MIN = 20.0
BPM_MAX = 250.0
MS_PER_MINUTE = 60_000


class AccelSample(NamedTuple):
    t_ms: int
    x: float
    y: float
    z: float


class HrSample(NamedTuple):
    minute_index: int
    bpm: float


@dataclass
class MinuteRecord:
    """One time-aligned unit of the stream: features, optional label, phase."""

    minute_index: int
    features: np.ndarray
    bpm: Optional[float] = None
    phase: int = 0


class AccelSeries:
    """Columnar, strictly time-ordered tri-axial acceleration."""

    __slots__ = ("t_ms", "x", "y", "z")

    def __init__(self, t_ms, x, y, z, validate: bool = True):
        self.t_ms = np.asarray(t_ms, dtype=np.int64)
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.z = np.asarray(z, dtype=float)
        if validate:
            n = self.t_ms.size
            if not (self.x.size == self.y.size == self.z.size == n):
                raise RangeError("accel columns differ in length")
            if n and self.t_ms[0] < 0:
                raise RangeError("negative timestamp")
            if n > 1 and not (np.diff(self.t_ms) > 0).all():
                bad = int(np.argmax(np.diff(self.t_ms) <= 0)) + 1
                raise OrderingError(f"timestamps not strictly increasing at row {bad}")
            for name in ("x", "y", "z"):
                if not np.isfinite(getattr(self, name)).all():
                    raise RangeError(f"non-finite value in column {name}")

    def __len__(self) -> int:
        return self.t_ms.size

    def __getitem__(self, i: int) -> AccelSample:
        return AccelSample(int(self.t_ms[i]), float(self.x[i]),
                           float(self.y[i]), float(self.z[i]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, AccelSeries):
            return NotImplemented
        return (
            np.array_equal(self.t_ms, other.t_ms)
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.z, other.z)
        )


class HrSeries:
    """Minute-indexed heart rate, strictly increasing minute index."""

    __slots__ = ("minute_index", "bpm")

    def __init__(self, minute_index, bpm, validate: bool = True):
        self.minute_index = np.asarray(minute_index, dtype=np.int64)
        self.bpm = np.asarray(bpm, dtype=float)
        if validate:
            if self.minute_index.size != self.bpm.size:
                raise RangeError("hr columns differ in length")
            if self.minute_index.size and self.minute_index[0] < 0:
                raise RangeError("negative minute index")
            if self.minute_index.size > 1 and not (np.diff(self.minute_index) > 0).all():
                bad = int(np.argmax(np.diff(self.minute_index) <= 0)) + 1
                raise OrderingError(f"minute_index not strictly increasing at row {bad}")
            out = (self.bpm < BPM_MIN) | (self.bpm > BPM_MAX) | ~np.isfinite(self.bpm)
            if out.any():
                bad = int(np.argmax(out))
                raise RangeError(
                    f"bpm {self.bpm[bad]} outside [{BPM_MIN}, {BPM_MAX}] at row {bad}"
                )

    def __len__(self) -> int:
        return self.minute_index.size

    def __getitem__(self, i: int) -> HrSample:
        return HrSample(int(self.minute_index[i]), float(self.bpm[i]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, HrSeries):
            return NotImplemented
        return np.array_equal(self.minute_index, other.minute_index) and np.array_equal(
            self.bpm, other.bpm
        )


# ---------------------------------------------------------------------------
# CSV parsing / writing
# ---------------------------------------------------------------------------

def _read_bytes(source) -> bytes:
    if isinstance(source, bytes):
        return source
    if isinstance(source, str):
        with open(source, "rb") as fh:
            return fh.read()
    if hasattr(source, "read"):
        data = source.read()
        return data.encode() if isinstance(data, str) else data
    raise ParseError(f"unsupported source type {type(source).__name__}")


def _parse_csv(source, header: str, n_cols: int, col_types) -> list[tuple]:
    """Line-by-line parser with exact line numbers in errors (line 1 = header)."""
    text = _read_bytes(source).decode("utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0].strip() != header:
        got = lines[0].strip() if lines else "<empty>"
        raise ParseError(f"expected header '{header}', got '{got}' at line 1")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != n_cols:
            raise ParseError(f"expected {n_cols} fields, got {len(parts)} at line {lineno}")
        try:
            rows.append(tuple(t(p) for t, p in zip(col_types, parts)))
        except ValueError:
            raise ParseError(f"non-numeric field in '{line}' at line {lineno}") from None
    return rows


def parse_accel_csv(source) -> AccelSeries:
    """Parse `t_ms,x,y,z` CSV bytes (or file / path) into an AccelSeries."""
    data = _read_bytes(source)
    if data.split(b"\n", 1)[0].strip() != ACCEL_HEADER.encode():
        got = data.split(b"\n", 1)[0].decode("utf-8", "replace").strip()
        raise ParseError(f"expected header '{ACCEL_HEADER}', got '{got}' at line 1")
    try:
        df = pl.read_csv(
            data,
            schema={"t_ms": pl.Int64, "x": pl.Float64, "y": pl.Float64, "z": pl.Float64},
        )
        if any(df[c].null_count() for c in df.columns):
            raise ParseError("ragged rows")  # retry on the slow path
        cols = [df["t_ms"].to_numpy(), df["x"].to_numpy(),
                df["y"].to_numpy(), df["z"].to_numpy()]
    except Exception:
        # Slow path pins down the offending line for the error message.
        rows = _parse_csv(data, ACCEL_HEADER, 4, (int, float, float, float))
        cols = [np.array(c) for c in zip(*rows)] if rows else [np.array([])] * 4
    try:
        return AccelSeries(*cols)
    except (OrderingError, RangeError) as exc:
        # Row index in series == data line - 2; re-raise with a line number.
        raise type(exc)(f"{exc} (line = row + 2)") from None


def parse_hr_csv(source) -> HrSeries:
    """Parse `minute_index,bpm` CSV; rejects bpm outside [20, 250]."""
    data = _read_bytes(source)
    if data.split(b"\n", 1)[0].strip() != HR_HEADER.encode():
        got = data.split(b"\n", 1)[0].decode("utf-8", "replace").strip()
        raise ParseError(f"expected header '{HR_HEADER}', got '{got}' at line 1")
    try:
        df = pl.read_csv(data, schema={"minute_index": pl.Int64, "bpm": pl.Float64})
        if any(df[c].null_count() for c in df.columns):
            raise ParseError("ragged rows")  # retry on the slow path
        cols = [df["minute_index"].to_numpy(), df["bpm"].to_numpy()]
    except Exception:
        rows = _parse_csv(data, HR_HEADER, 2, (int, float))
        cols = [np.array(c) for c in zip(*rows)] if rows else [np.array([])] * 2
    try:
        return HrSeries(*cols)
    except (OrderingError, RangeError) as exc:
        raise type(exc)(f"{exc} (line = row + 2)") from None


def write_accel_csv(dest, series: AccelSeries | None = None, *,
                    t_ms=None, x=None, y=None, z=None,
                    include_header: bool = True) -> None:
    """Write acceleration as CSV with 5-decimal fixed-point columns.

    ``dest`` may be a path or an open binary file (for chunked appends).
    Values are expected to be quantised to 5 decimals (the synthetic
    generator guarantees this), which makes write->parse an exact roundtrip.
    """
    if series is not None:
        t_ms, x, y, z = series.t_ms, series.x, series.y, series.z
    df = pl.DataFrame({"t_ms": np.asarray(t_ms, np.int64),
                       "x": np.asarray(x, float),
                       "y": np.asarray(y, float),
                       "z": np.asarray(z, float)})
    if hasattr(dest, "write"):
        df.write_csv(dest, float_precision=5, include_header=include_header)
    else:
        with open(dest, "wb") as fh:
            df.write_csv(fh, float_precision=5, include_header=include_header)


def write_hr_csv(dest, series: HrSeries) -> None:
    """Write heart rate as CSV with 3-decimal fixed-point bpm."""
    df = pl.DataFrame({"minute_index": series.minute_index, "bpm": series.bpm})
    if hasattr(dest, "write"):
        df.write_csv(dest, float_precision=3)
    else:
        with open(dest, "wb") as fh:
            df.write_csv(fh, float_precision=3)


# ---------------------------------------------------------------------------
# Synthetic drifting streams
# ---------------------------------------------------------------------------

# (duration range in minutes, intensity range in g): rest, walk, exercise.
DEFAULT_REGIMES = (
    ((3, 10), (0.0, 0.06)),
    ((1, 6), (0.08, 0.35)),
    ((1, 4), (0.4, 1.0)),
)

_EMA_TAU_S = 30.0
_BASE_BPM = 55.0
_GAIN_BPM = 25.0


@dataclass
class SynthConfig:
    n_minutes_per_phase: int
    n_phases: int = 1
    sample_rate_hz: int = 50
    seed: int = 42
    drift_strength: float = 0.0
    noise_bpm_std: float = 0.0
    activity_regimes: Sequence = DEFAULT_REGIMES

    def __post_init__(self):
        if self.n_minutes_per_phase < 1:
            raise ConfigError("n_minutes_per_phase must be >= 1")
        if self.n_phases < 1:
            raise ConfigError("n_phases must be >= 1")
        if self.sample_rate_hz < 2:
            raise ConfigError("sample_rate_hz must be >= 2")
        if self.drift_strength < 0 or self.noise_bpm_std < 0:
            raise ConfigError("drift_strength and noise_bpm_std must be >= 0")
        if not self.activity_regimes:
            raise ConfigError("activity_regimes must be non-empty")

    def to_dict(self) -> dict:
        return {
            "n_minutes_per_phase": self.n_minutes_per_phase,
            "n_phases": self.n_phases,
            "sample_rate_hz": self.sample_rate_hz,
            "seed": self.seed,
            "drift_strength": self.drift_strength,
            "noise_bpm_std": self.noise_bpm_std,
            "activity_regimes": [list(map(list, r)) for r in self.activity_regimes],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        regimes = tuple(
            (tuple(r[0]), tuple(r[1])) for r in d.get("activity_regimes", DEFAULT_REGIMES)
        )
        return cls(
            n_minutes_per_phase=d["n_minutes_per_phase"],
            n_phases=d.get("n_phases", 1),
            sample_rate_hz=d.get("sample_rate_hz", 50),
            seed=d.get("seed", 42),
            drift_strength=d.get("drift_strength", 0.0),
            noise_bpm_std=d.get("noise_bpm_std", 0.0),
            activity_regimes=regimes,
        )

    @property
    def phase_boundaries(self) -> list[int]:
        """Minute indices at which phases 1..n-1 start."""
        return [p * self.n_minutes_per_phase for p in range(1, self.n_phases)]


def _activity_schedule(cfg: SynthConfig) -> np.ndarray:
    """Per-second latent intensity for one phase; identical across phases."""
    rng = np.random.default_rng([cfg.seed, 101])
    n_seconds = cfg.n_minutes_per_phase * 60
    out = np.empty(n_seconds)
    pos = 0
    while pos < n_seconds:
        (dmin, dmax), (ilo, ihi) = cfg.activity_regimes[
            rng.integers(len(cfg.activity_regimes))
        ]
        dur = int(rng.integers(dmin, dmax + 1)) * 60
        out[pos:pos + dur] = rng.uniform(ilo, ihi)
        pos += dur
    return out


def _phase_hr(cfg: SynthConfig, phase: int, ema_minute: np.ndarray) -> np.ndarray:
    base = _BASE_BPM + cfg.drift_strength * phase
    gain = _GAIN_BPM * (1.0 + 0.02 * cfg.drift_strength * phase)
    noise_rng = np.random.default_rng([cfg.seed, 303, phase])
    bpm = base + gain * ema_minute + noise_rng.normal(
        0.0, cfg.noise_bpm_std, ema_minute.size
    )
    return np.round(np.clip(bpm, BPM_MIN + 5.0, BPM_MAX - 10.0), 3)


def iter_synth_phases(cfg: SynthConfig, minutes_per_chunk: int = 2000) -> Iterator[dict]:
    """Yield per-phase chunks of the synthetic stream.

    Each yielded dict holds `t_ms`, `x`, `y`, `z` (acceleration chunk),
    plus `hr_minutes` / `hr_bpm` for the minutes fully covered by the
    chunk. Deterministic given cfg; chunking only bounds memory.
    """
    schedule = _activity_schedule(cfg)
    alpha = 1.0 - math.exp(-1.0 / _EMA_TAU_S)
    ema, _ = lfilter([alpha], [1.0, -(1.0 - alpha)], schedule,
                     zi=[(1.0 - alpha) * schedule[0]])
    ema_minute = ema.reshape(-1, 60).mean(axis=1)
    rate = cfg.sample_rate_hz
    mpp = cfg.n_minutes_per_phase
    for phase in range(cfg.n_phases):
        accel_rng = np.random.default_rng([cfg.seed, 202, phase])
        bpm = _phase_hr(cfg, phase, ema_minute)
        for start in range(0, mpp, minutes_per_chunk):
            stop = min(start + minutes_per_chunk, mpp)
            n_sec = (stop - start) * 60
            intensity = np.repeat(schedule[start * 60:stop * 60], rate)
            # Continuous time within the phase keeps the oscillation phase
            # independent of chunking.
            i0 = start * 60 * rate
            idx = np.arange(i0, i0 + n_sec * rate)
            t = idx / rate
            freq = 0.8 + 2.5 * intensity
            jitter_scale = 0.005 + 0.02 * intensity
            arg = 2.0 * np.pi * freq * t
            ax = intensity * np.sin(arg) + accel_rng.normal(size=idx.size) * jitter_scale
            ay = 0.8 * intensity * np.sin(arg + 2.1) + accel_rng.normal(size=idx.size) * jitter_scale
            az = 1.0 + 0.6 * intensity * np.sin(arg + 4.2) + accel_rng.normal(size=idx.size) * jitter_scale
            t_ms = (phase * mpp * MS_PER_MINUTE) + (idx * 1000) // rate
            minutes = phase * mpp + np.arange(start, stop)
            yield {
                "phase": phase,
                "t_ms": t_ms.astype(np.int64),
                "x": np.round(ax, 5),
                "y": np.round(ay, 5),
                "z": np.round(az, 5),
                "hr_minutes": minutes.astype(np.int64),
                "hr_bpm": bpm[start:stop],
            }


def synth_stream(cfg: SynthConfig) -> tuple[AccelSeries, HrSeries]:
    """Materialise the full synthetic stream (small configurations)."""
    t_ms, ax, ay, az, hm, hb = [], [], [], [], [], []
    for chunk in iter_synth_phases(cfg):
        t_ms.append(chunk["t_ms"])
        ax.append(chunk["x"])
        ay.append(chunk["y"])
        az.append(chunk["z"])
        hm.append(chunk["hr_minutes"])
        hb.append(chunk["hr_bpm"])
    accel = AccelSeries(np.concatenate(t_ms), np.concatenate(ax),
                        np.concatenate(ay), np.concatenate(az), validate=False)
    hr = HrSeries(np.concatenate(hm), np.concatenate(hb), validate=False)
    return accel, hr


def write_synth_dataset(cfg: SynthConfig, out_dir: str,
                        accel_name: str = "accel.csv",
                        hr_name: str = "hr.csv",
                        manifest_name: str = "manifest.json") -> str:
    """Generate and write accel/hr CSVs plus a JSON manifest; returns its path."""
    os.makedirs(out_dir, exist_ok=True)
    accel_path = os.path.join(out_dir, accel_name)
    hr_path = os.path.join(out_dir, hr_name)
    hm, hb = [], []
    with open(accel_path, "wb") as fh:
        first = True
        for chunk in iter_synth_phases(cfg):
            write_accel_csv(fh, t_ms=chunk["t_ms"], x=chunk["x"],
                            y=chunk["y"], z=chunk["z"], include_header=first)
            first = False
            hm.append(chunk["hr_minutes"])
            hb.append(chunk["hr_bpm"])
    write_hr_csv(hr_path, HrSeries(np.concatenate(hm), np.concatenate(hb),
                                   validate=False))
    manifest = {
        "config": cfg.to_dict(),
        "accel_file": accel_name,
        "hr_file": hr_name,
        "phase_boundaries": cfg.phase_boundaries,
    }
    manifest_path = os.path.join(out_dir, manifest_name)
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return manifest_path


def load_manifest(path: str) -> dict:
    with open(path) as fh:
        manifest = json.load(fh)
    for key in ("config", "accel_file", "hr_file"):
        if key not in manifest:
            raise ParseError(f"manifest missing key '{key}'")
    return manifest


# ---------------------------------------------------------------------------
# Minute alignment
# ---------------------------------------------------------------------------

def minute_feature_rows(t_ms: np.ndarray, x: np.ndarray, y: np.ndarray,
                        z: np.ndarray, minutes: np.ndarray,
                        sample_rate_hz: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-minute feature vectors from raw samples, vectorised.

    For each requested minute, one-second sub-windows aligned to t_ms
    multiples of 1000 are featurised when they hold >= sample_rate_hz/2
    (and >= 2) samples; a minute is kept when >= 30 sub-windows are valid.
    Returns (kept_mask over `minutes`, features of shape (kept, 39)).
    """
    minutes = np.asarray(minutes, dtype=np.int64)
    n_min = minutes.size
    edges = minutes[:, None] * MS_PER_MINUTE + np.arange(61, dtype=np.int64)[None, :] * 1000
    pos = np.searchsorted(t_ms, edges.ravel()).reshape(n_min, 61)
    counts = np.diff(pos, axis=1)
    valid = (counts >= 2) & (counts * 2 >= sample_rate_hz)
    valid_per_minute = valid.sum(axis=1)
    kept = valid_per_minute >= feat.MIN_SECONDS_PER_MINUTE

    sums = np.zeros((n_min, feat.N_FEATURES))
    win_minute, win_start, win_count = (
        np.repeat(np.arange(n_min), 60)[valid.ravel()],
        pos[:, :-1].ravel()[valid.ravel()],
        counts.ravel()[valid.ravel()],
    )
    # Skip windows belonging to dropped minutes.
    use = kept[win_minute]
    win_minute, win_start, win_count = win_minute[use], win_start[use], win_count[use]
    for c in np.unique(win_count):
        sel = win_count == c
        gather = win_start[sel][:, None] + np.arange(c)
        block = np.concatenate(
            [feat.axis_feature_block(x[gather]),
             feat.axis_feature_block(y[gather]),
             feat.axis_feature_block(z[gather])], axis=1)
        np.add.at(sums, win_minute[sel], block)
    denom = np.where(kept, valid_per_minute, 1)[:, None]
    means = sums / denom
    return kept, means[kept]


def phase_of(minute: int, phase_boundaries: Sequence[int] | None) -> int:
    if not phase_boundaries:
        return 0
    return bisect_right(list(phase_boundaries), minute)


def align_minutes(accel: AccelSeries, hr: HrSeries, sample_rate_hz: int,
                  phase_boundaries: Sequence[int] | None = None,
                  chunk_minutes: int = 2048) -> list[MinuteRecord]:
    """Time-align acceleration features with minute-level heart rate.

    Only minutes present in `hr` are emitted; minutes whose accelerometer
    window has fewer than 30 valid one-second sub-windows are dropped.
    """
    records: list[MinuteRecord] = []
    for start in range(0, len(hr), chunk_minutes):
        minutes = hr.minute_index[start:start + chunk_minutes]
        bpms = hr.bpm[start:start + chunk_minutes]
        kept, feats = minute_feature_rows(accel.t_ms, accel.x, accel.y, accel.z,
                                          minutes, sample_rate_hz)
        for m, bpm, f in zip(minutes[kept], bpms[kept], feats):
            records.append(MinuteRecord(int(m), f, float(bpm),
                                        phase_of(int(m), phase_boundaries)))
    if not records:
        raise AlignmentError("no overlap between acceleration and heart-rate series")
    return records


def stream_align_to_csv(accel_path: str, hr: HrSeries, sample_rate_hz: int,
                        out_path: str,
                        phase_boundaries: Sequence[int] | None = None,
                        batch_rows: int = 2_000_000) -> int:
    """Align a large on-disk accel CSV against `hr` without loading it all.

    Streams the accelerometer file in row batches, carrying the trailing
    partial minute between batches, and appends aligned rows to the
    feature CSV at `out_path`. Returns the number of minutes written.
    """
    lazy = pl.scan_csv(
        accel_path,
        schema_overrides={"t_ms": pl.Int64, "x": pl.Float64,
                          "y": pl.Float64, "z": pl.Float64},
    )
    carry = None
    written = 0
    last_t = -1
    header = "minute_index,phase,bpm," + ",".join(feat.FEATURE_NAMES)
    hr_pos = 0

    def flush(t_ms, x, y, z, fh, final: bool):
        nonlocal written, hr_pos
        if t_ms.size == 0:
            return (t_ms, x, y, z)
        # Complete minutes: everything before the minute of the last sample
        # (all of it, when this is the final batch).
        limit_minute = (t_ms[-1] // MS_PER_MINUTE) + (1 if final else 0)
        cut = np.searchsorted(t_ms, limit_minute * MS_PER_MINUTE)
        if cut == 0:
            return (t_ms, x, y, z)
        hi = np.searchsorted(hr.minute_index, limit_minute)
        minutes = hr.minute_index[hr_pos:hi]
        bpms = hr.bpm[hr_pos:hi]
        hr_pos = hi
        if minutes.size:
            kept, feats = minute_feature_rows(t_ms[:cut], x[:cut], y[:cut],
                                              z[:cut], minutes, sample_rate_hz)
            lines = []
            for m, bpm, f in zip(minutes[kept], bpms[kept], feats):
                vals = ",".join(repr(float(v)) for v in f)
                lines.append(f"{int(m)},{phase_of(int(m), phase_boundaries)},"
                             f"{float(bpm)!r},{vals}")
            if lines:
                fh.write(("\n".join(lines) + "\n").encode())
                written += len(lines)
        return (t_ms[cut:], x[cut:], y[cut:], z[cut:])

    with open(out_path, "wb") as fh:
        fh.write((header + "\n").encode())
        for df in lazy.collect_batches(chunk_size=batch_rows, lazy=True):
            t_ms = df["t_ms"].to_numpy()
            if t_ms.size == 0:
                continue
            if t_ms[0] <= last_t or (t_ms.size > 1 and not (np.diff(t_ms) > 0).all()):
                raise OrderingError("accel timestamps not strictly increasing")
            last_t = int(t_ms[-1])
            cols = (t_ms, df["x"].to_numpy(), df["y"].to_numpy(), df["z"].to_numpy())
            if carry is not None:
                cols = tuple(np.concatenate([c, n]) for c, n in zip(carry, cols))
            carry = flush(*cols, fh, final=False)
        if carry is not None:
            flush(*carry, fh, final=True)
    if written == 0:
        raise AlignmentError("no overlap between acceleration and heart-rate series")
    return written


# ---------------------------------------------------------------------------
# Feature matrix CSV (minute_index,phase,bpm,<39 feature names>)
# ---------------------------------------------------------------------------

def write_feature_csv(dest, records: Sequence[MinuteRecord]) -> None:
    header = "minute_index,phase,bpm," + ",".join(feat.FEATURE_NAMES)
    lines = [header]
    for r in records:
        bpm = "" if r.bpm is None else repr(r.bpm)
        vals = ",".join(repr(float(v)) for v in r.features)
        lines.append(f"{r.minute_index},{r.phase},{bpm},{vals}")
    text = "\n".join(lines) + "\n"
    if hasattr(dest, "write"):
        dest.write(text.encode() if "b" in getattr(dest, "mode", "b") else text)
    else:
        with open(dest, "w") as fh:
            fh.write(text)


def read_feature_csv(source) -> list[MinuteRecord]:
    text = _read_bytes(source).decode("utf-8")
    lines = [ln for ln in text.split("\n") if ln]
    expected = "minute_index,phase,bpm," + ",".join(feat.FEATURE_NAMES)
    if not lines or lines[0] != expected:
        raise ParseError("feature CSV header mismatch")
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3 + feat.N_FEATURES:
            raise ParseError(f"wrong arity at line {lineno}")
        try:
            bpm = None if parts[2] == "" else float(parts[2])
            records.append(MinuteRecord(int(parts[0]),
                                        np.array([float(v) for v in parts[3:]]),
                                        bpm, int(parts[1])))
        except ValueError:
            raise ParseError(f"non-numeric field at line {lineno}") from None
    return records
