"""Wearable <-> gateway link simulation over newline-delimited JSON.

The wearable streams raw acceleration to the gateway; the gateway
extracts minute features, runs the online loop, and sends back heart-rate
query requests only when uncertain. An energy ledger prices each streamed
minute of accelerometry and each sensor query (default ratio 1:5000) and
reports the saving versus querying every minute.

Wire grammar (one canonical JSON object per line, UTF-8, '\n' framing):

  HELLO {patient_id, sample_rate_hz}     wearable -> gateway, once, first
  ACC   {t_ms, x, y, z}                  wearable -> gateway
  HRQ   {minute_index}                   gateway -> wearable
  HRR   {minute_index, bpm}              wearable -> gateway, answers HRQ
  PRED  {minute_index, bpm, variance, queried}   gateway -> wearable
  BYE   {}                               wearable -> gateway, ends session
"""

from __future__ import annotations

import json
import math
import socket
import threading
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ProtocolError
from .evaluate import RunReport, mae, mse
from .ingest import AccelSeries, HrSeries, MinuteRecord, MS_PER_MINUTE, minute_feature_rows
from .ppaw import PpawConfig, PpawState, StepOutcome, ppaw_init, ppaw_step

_SCHEMAS: dict[str, tuple[tuple[str, type], ...]] = {
    "HELLO": (("patient_id", str), ("sample_rate_hz", int)),
    "ACC": (("t_ms", int), ("x", float), ("y", float), ("z", float)),
    "HRQ": (("minute_index", int),),
    "HRR": (("minute_index", int), ("bpm", float)),
    "PRED": (("minute_index", int), ("bpm", float), ("variance", float),
             ("queried", bool)),
    "BYE": (),
}


def encode_message(message: dict) -> bytes:
    """Canonical wire form: fixed key order per variant, '\n' terminated."""
    mtype = message.get("type")
    if mtype not in _SCHEMAS:
        raise ProtocolError(f"unknown type '{mtype}'")
    out = {"type": mtype}
    for name, typ in _SCHEMAS[mtype]:
        if name not in message:
            raise ProtocolError(f"{mtype} missing field '{name}'")
        value = message[name]
        if typ is float:
            value = float(value)
            if not math.isfinite(value):
                raise ProtocolError(f"{mtype}.{name} is not finite")
        elif typ is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ProtocolError(f"{mtype}.{name} must be an integer")
        elif typ is bool and not isinstance(value, bool):
            raise ProtocolError(f"{mtype}.{name} must be a boolean")
        elif typ is str and not isinstance(value, str):
            raise ProtocolError(f"{mtype}.{name} must be a string")
        out[name] = value
    extras = set(message) - {"type"} - {n for n, _ in _SCHEMAS[mtype]}
    if extras:
        raise ProtocolError(f"{mtype} has unexpected fields {sorted(extras)}")
    return (json.dumps(out, separators=(",", ":")) + "\n").encode()


def decode_message(line: bytes) -> dict:
    """Parse and validate one wire line back into a message dict."""
    text = line.decode("utf-8").rstrip("\n")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"bad JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ProtocolError("message is not a JSON object")
    mtype = obj.get("type")
    if mtype not in _SCHEMAS:
        raise ProtocolError(f"unknown type '{mtype}'")
    fields = _SCHEMAS[mtype]
    expected = {"type"} | {n for n, _ in fields}
    if set(obj) != expected:
        raise ProtocolError(
            f"{mtype} fields {sorted(set(obj) - {'type'})} != "
            f"{sorted(n for n, _ in fields)}")
    out = {"type": mtype}
    for name, typ in fields:
        value = obj[name]
        if typ is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ProtocolError(f"{mtype}.{name} must be a number")
            value = float(value)
            if not math.isfinite(value):
                raise ProtocolError(f"{mtype}.{name} is not finite")
        elif typ is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ProtocolError(f"{mtype}.{name} must be an integer")
        elif typ is bool:
            if not isinstance(value, bool):
                raise ProtocolError(f"{mtype}.{name} must be a boolean")
        elif typ is str:
            if not isinstance(value, str):
                raise ProtocolError(f"{mtype}.{name} must be a string")
        out[name] = value
    return out


@dataclass
class EnergyModel:
    accel_cost_per_minute: float = 1.0
    ppg_cost_per_query: float = 5000.0

    def __post_init__(self):
        if self.accel_cost_per_minute <= 0 or self.ppg_cost_per_query <= 0:
            raise ProtocolError("energy costs must be > 0")


@dataclass
class EnergyLedger:
    minutes_sensed: int
    queries: int
    accel_energy: float
    ppg_energy: float
    total: float
    savings_vs_always_query: float

    @classmethod
    def from_counts(cls, minutes: int, queries: int,
                    model: EnergyModel) -> "EnergyLedger":
        accel = minutes * model.accel_cost_per_minute
        ppg = queries * model.ppg_cost_per_query
        total = accel + ppg
        always = minutes * (model.accel_cost_per_minute + model.ppg_cost_per_query)
        savings = 1.0 - total / always if always > 0 else 0.0
        return cls(minutes, queries, accel, ppg, total, savings)

    def to_json_dict(self) -> dict:
        return {"minutes_sensed": self.minutes_sensed, "queries": self.queries,
                "accel_energy": self.accel_energy, "ppg_energy": self.ppg_energy,
                "total": self.total,
                "savings_vs_always_query": self.savings_vs_always_query}


class _LineChannel:
    """Reads/writes framed messages over a binary file pair, with an
    optional transcript and a lock making writes line-atomic."""

    def __init__(self, rfile, wfile, transcript: Optional[list] = None,
                 transcript_prefix: str = ""):
        self.rfile = rfile
        self.wfile = wfile
        self.transcript = transcript
        self.prefix = transcript_prefix
        self._wlock = threading.Lock()

    def send(self, message: dict) -> None:
        line = encode_message(message)
        with self._wlock:
            self.wfile.write(line)
            self.wfile.flush()
        if self.transcript is not None:
            self.transcript.append(self.prefix + line.decode().rstrip("\n"))

    def recv(self) -> Optional[dict]:
        line = self.rfile.readline()
        if not line:
            return None
        return decode_message(line)


class _GatewaySession:
    """One wearable session: minute assembly, feature extraction, online loop."""

    def __init__(self, channel: _LineChannel, cfg: PpawConfig, energy: EnergyModel):
        self.channel = channel
        self.cfg = cfg
        self.energy = energy
        self.pending: list[dict] = []  # ACCs read while waiting for an HRR
        self.samples: list[tuple[int, float, float, float]] = []
        self.current_minute: Optional[int] = None
        self.rate: Optional[int] = None
        self.init_pairs: list[tuple[np.ndarray, float]] = []
        self.init_minutes: list[tuple[int, float]] = []
        self.state: Optional[PpawState] = None
        self.outcomes: list[StepOutcome] = []
        self.minutes_processed = 0
        self.queries = 0
        self.last_t_ms: Optional[int] = None

    def _next_message(self) -> Optional[dict]:
        if self.pending:
            return self.pending.pop(0)
        return self.channel.recv()

    def _await_hrr(self, minute_index: int) -> float:
        while True:
            msg = self.channel.recv()
            if msg is None:
                raise ProtocolError("peer closed while awaiting HRR")
            if msg["type"] in ("ACC", "BYE"):
                # the wearable may finish streaming (including BYE) before
                # its reply thread gets the HRR out; keep those for later
                self.pending.append(msg)
                continue
            if msg["type"] != "HRR":
                raise ProtocolError(f"expected HRR, got {msg['type']}")
            if msg["minute_index"] != minute_index:
                raise ProtocolError(
                    f"HRR for minute {msg['minute_index']}, expected {minute_index}")
            return msg["bpm"]

    def _query(self, minute_index: int) -> float:
        self.channel.send({"type": "HRQ", "minute_index": minute_index})
        self.queries += 1
        return self._await_hrr(minute_index)

    def _finish_minute(self) -> None:
        if self.current_minute is None or not self.samples:
            self.samples = []
            return
        arr = np.array(self.samples)
        self.samples = []
        m = self.current_minute
        kept, feats = minute_feature_rows(
            arr[:, 0].astype(np.int64), arr[:, 1], arr[:, 2], arr[:, 3],
            np.array([m], dtype=np.int64), self.rate)
        if not kept[0]:
            return
        self.minutes_processed += 1
        features = feats[0]
        if self.state is None:
            bpm = self._query(m)
            self.init_pairs.append((features, bpm))
            self.init_minutes.append((m, bpm))
            self.channel.send({"type": "PRED", "minute_index": m, "bpm": bpm,
                               "variance": 0.0, "queried": True})
            if len(self.init_pairs) == self.cfg.N:
                self.state = ppaw_init(self.cfg, self.init_pairs)
            return
        record = MinuteRecord(m, features, None)
        outcome = ppaw_step(self.state, record,
                            lambda rec: self._query(rec.minute_index), self.cfg)
        self.outcomes.append(outcome)
        self.channel.send({"type": "PRED", "minute_index": m,
                           "bpm": outcome.predicted_bpm,
                           "variance": outcome.variance,
                           "queried": outcome.queried})

    def run(self) -> tuple[RunReport, EnergyLedger, list[StepOutcome]]:
        hello = self._next_message()
        if hello is None or hello["type"] != "HELLO":
            raise ProtocolError("session must start with HELLO")
        self.rate = hello["sample_rate_hz"]
        while True:
            msg = self._next_message()
            if msg is None:
                raise ProtocolError("peer closed without BYE")
            if msg["type"] == "ACC":
                if self.last_t_ms is not None and msg["t_ms"] <= self.last_t_ms:
                    raise ProtocolError(
                        f"ACC timestamps must be strictly increasing, got "
                        f"{msg['t_ms']} after {self.last_t_ms}")
                self.last_t_ms = msg["t_ms"]
                minute = msg["t_ms"] // MS_PER_MINUTE
                if self.current_minute is None:
                    self.current_minute = minute
                elif minute != self.current_minute:
                    self._finish_minute()
                    self.current_minute = minute
                self.samples.append((msg["t_ms"], msg["x"], msg["y"], msg["z"]))
            elif msg["type"] == "BYE":
                self._finish_minute()
                break
            else:
                raise ProtocolError(f"unexpected {msg['type']} from wearable")
        queried = [(o.predicted_bpm, o.true_bpm) for o in self.outcomes if o.queried]
        report = RunReport(
            mae=mae(*zip(*queried)) if queried else 0.0,
            mse=mse(*zip(*queried)) if queried else 0.0,
            mae_unqueried=None,
            query_fraction=(self.queries / self.minutes_processed
                            if self.minutes_processed else 0.0),
            n_minutes=self.minutes_processed,
            config={"mode": "gateway", **self.cfg.to_dict()},
        )
        ledger = EnergyLedger.from_counts(self.minutes_processed, self.queries,
                                          self.energy)
        return report, ledger, self.outcomes


def gateway_serve(rfile, wfile, cfg: PpawConfig,
                  energy: EnergyModel | None = None,
                  transcript: Optional[list] = None
                  ) -> tuple[RunReport, EnergyLedger, list[StepOutcome]]:
    """Serve one wearable session over a binary stream pair.

    Given the same data, the emitted outcome sequence is identical to an
    in-process `ppaw_run` over the aligned records (transport invariance).
    The gateway's error figures cover queried minutes only: those are the
    only minutes whose ground truth it ever sees.
    """
    channel = _LineChannel(rfile, wfile, transcript, "<")
    return _GatewaySession(channel, cfg, energy or EnergyModel()).run()


def wearable_replay(rfile, wfile, accel: AccelSeries, hr: HrSeries,
                    energy: EnergyModel | None = None,
                    patient_id: str = "sim", sample_rate_hz: int = 50,
                    transcript: Optional[list] = None) -> EnergyLedger:
    """Replay recorded data as the wearable side of a session.

    Streams HELLO + all ACC samples + BYE while a background reader
    answers each HRQ from the recorded heart rate (and drains PREDs).
    Raises ProtocolError if the gateway asks for a minute with no
    recorded heart rate.
    """
    energy = energy or EnergyModel()
    channel = _LineChannel(rfile, wfile, transcript, ">")
    bpm_by_minute = {int(m): float(b) for m, b in zip(hr.minute_index, hr.bpm)}
    hrr_sent = [0]
    reader_error: list[Exception] = []

    def reader():
        try:
            while True:
                msg = channel.recv()
                if msg is None:
                    return
                if msg["type"] == "HRQ":
                    minute = msg["minute_index"]
                    if minute not in bpm_by_minute:
                        raise ProtocolError(
                            f"HRQ for minute {minute} with no recorded heart rate")
                    channel.send({"type": "HRR", "minute_index": minute,
                                  "bpm": bpm_by_minute[minute]})
                    hrr_sent[0] += 1
                elif msg["type"] != "PRED":
                    raise ProtocolError(f"unexpected {msg['type']} from gateway")
        except Exception as exc:  # surfaced to the main thread below
            reader_error.append(exc)
            try:
                wfile.close()
            except OSError:
                pass

    thread = threading.Thread(target=reader, daemon=True)
    thread.start()
    try:
        channel.send({"type": "HELLO", "patient_id": patient_id,
                      "sample_rate_hz": sample_rate_hz})
        for i in range(len(accel)):
            channel.send({"type": "ACC", "t_ms": int(accel.t_ms[i]),
                          "x": float(accel.x[i]), "y": float(accel.y[i]),
                          "z": float(accel.z[i])})
        channel.send({"type": "BYE"})
    except (ValueError, OSError) as exc:
        if not reader_error:
            raise ProtocolError(f"link closed during replay: {exc}") from exc
    thread.join()
    if reader_error:
        raise reader_error[0]
    minutes = len(np.unique(accel.t_ms // MS_PER_MINUTE))
    return EnergyLedger.from_counts(minutes, hrr_sent[0], energy)


def run_local_session(accel: AccelSeries, hr: HrSeries, cfg: PpawConfig,
                      energy: EnergyModel | None = None,
                      sample_rate_hz: int = 50,
                      transcript: Optional[list] = None):
    """Run a full session over an in-process socket pair.

    Returns (gateway RunReport, gateway EnergyLedger, outcomes,
    wearable EnergyLedger).
    """
    energy = energy or EnergyModel()
    g_sock, w_sock = socket.socketpair()
    result: dict = {}

    def serve():
        with g_sock, g_sock.makefile("rb") as rf, g_sock.makefile("wb") as wf:
            try:
                result["gateway"] = gateway_serve(rf, wf, cfg, energy, transcript)
            except Exception as exc:
                result["error"] = exc

    thread = threading.Thread(target=serve)
    thread.start()
    with w_sock, w_sock.makefile("rb") as rf, w_sock.makefile("wb") as wf:
        wearable_ledger = wearable_replay(rf, wf, accel, hr, energy,
                                          sample_rate_hz=sample_rate_hz,
                                          transcript=transcript)
    thread.join()
    if "error" in result:
        raise result["error"]
    report, gateway_ledger, outcomes = result["gateway"]
    return report, gateway_ledger, outcomes, wearable_ledger
