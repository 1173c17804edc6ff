"""Command-line interface: every pipeline stage as a subcommand.

Exit codes: 0 success, 1 usage error, 2 data/protocol error. All failures
print a single machine-parsable line `error: <category>: <detail>`.
"""

from __future__ import annotations

import argparse
import json
import os
import socket
import sys

from .errors import AccelHrError
from .evaluate import (
    parse_trace_csv,
    plot_data_csv,
    run_offline_cross_phase,
    run_offline_same_phase,
    run_ppaw_experiment,
    sweep_O,
    sweep_table_csv,
    trace_csv,
)
from .ingest import (
    SynthConfig,
    load_manifest,
    parse_accel_csv,
    parse_hr_csv,
    read_feature_csv,
    stream_align_to_csv,
    write_synth_dataset,
)
from .link import gateway_serve, wearable_replay
from .ppaw import PpawConfig
from .regress import TreeParams


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_ppaw_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--O", type=float, default=3.0, help="uncertainty multiplier")
    p.add_argument("--N", type=int, default=5, help="history / buffer size")
    p.add_argument("--TTL", type=int, default=10, help="predictions before forced retrain")
    p.add_argument("--T", type=float, default=10.0, help="per-learner error threshold (bpm)")
    p.add_argument("--L", type=int, default=10, help="ensemble size")
    p.add_argument("--depth", type=int, default=8, help="tree max depth")
    p.add_argument("--seed", type=int, default=42, help="random seed")


def _ppaw_config(args, O: float | None = None) -> PpawConfig:
    return PpawConfig(L=args.L, N=args.N, O=O if O is not None else args.O,
                      T=args.T, TTL=args.TTL,
                      tree=TreeParams(max_depth=args.depth), seed=args.seed)


def _load_records_from_manifest(path: str):
    manifest = load_manifest(path)
    base = os.path.dirname(os.path.abspath(path))
    cfg = manifest["config"]
    accel = parse_accel_csv(os.path.join(base, manifest["accel_file"]))
    hr = parse_hr_csv(os.path.join(base, manifest["hr_file"]))
    from .ingest import align_minutes
    return align_minutes(accel, hr, cfg["sample_rate_hz"],
                         manifest.get("phase_boundaries"))


def _load_records(args):
    if getattr(args, "features", None):
        return read_feature_csv(args.features)
    if getattr(args, "data", None):
        return _load_records_from_manifest(args.data)
    raise _UsageError("one of --features or --data is required")


def _write(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        fh.write(text)


def _host_port(value: str) -> tuple[str, int]:
    try:
        host, port = value.rsplit(":", 1)
        return host, int(port)
    except ValueError:
        raise _UsageError(f"expected HOST:PORT, got '{value}'") from None


def build_parser() -> _Parser:
    parser = _Parser(
        prog="accelhr",
        description="Heart rate prediction from wrist acceleration: synthetic "
                    "data, feature extraction, offline baselines, the online "
                    "active-learning loop, and the wearable/gateway simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("synth", formatter_class=fmt,
                       help="generate a synthetic drifting dataset")
    p.add_argument("--minutes-per-phase", type=int, required=True)
    p.add_argument("--phases", type=int, default=2)
    p.add_argument("--drift", type=float, default=0.0, help="per-phase bpm shift")
    p.add_argument("--noise", type=float, default=0.0, help="bpm noise std")
    p.add_argument("--rate", type=int, default=50, help="accel sample rate (Hz)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("-o", "--out", required=True, help="output directory")

    p = sub.add_parser("extract", formatter_class=fmt,
                       help="accel+hr CSVs -> per-minute feature matrix CSV")
    p.add_argument("--data", required=True, help="dataset manifest JSON")
    p.add_argument("-o", "--out", required=True, help="feature CSV path")

    p = sub.add_parser("offline", formatter_class=fmt,
                       help="same-phase or cross-phase offline baseline")
    p.add_argument("--features", help="feature matrix CSV")
    p.add_argument("--data", help="dataset manifest JSON")
    p.add_argument("--mode", choices=["same-phase", "cross-phase"],
                   default="same-phase")
    p.add_argument("--phase", type=int, default=0, help="phase for same-phase mode")
    p.add_argument("--train-phase", type=int, default=0)
    p.add_argument("--test-phase", type=int, default=1)
    p.add_argument("--train-frac", type=float, default=0.6)
    p.add_argument("--predictor", choices=["forest", "dummy"], default="forest")
    p.add_argument("--L", type=int, default=10)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("-o", "--out", required=True, help="report JSON path")

    p = sub.add_parser("ppaw", formatter_class=fmt,
                       help="online active-learning run")
    p.add_argument("--features", help="feature matrix CSV")
    p.add_argument("--data", help="dataset manifest JSON")
    _add_ppaw_flags(p)
    p.add_argument("-o", "--out", required=True, help="output directory")

    p = sub.add_parser("sweep-o", formatter_class=fmt,
                       help="sweep the uncertainty multiplier O")
    p.add_argument("--features", help="feature matrix CSV")
    p.add_argument("--data", help="dataset manifest JSON")
    p.add_argument("--O", default="1,2,3", help="comma-separated O values")
    p.add_argument("--N", type=int, default=5)
    p.add_argument("--TTL", type=int, default=10)
    p.add_argument("--T", type=float, default=10.0)
    p.add_argument("--L", type=int, default=10)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("-o", "--out", required=True, help="sweep table CSV path")

    p = sub.add_parser("gateway", formatter_class=fmt,
                       help="serve one wearable session over TCP")
    p.add_argument("--listen", required=True, help="HOST:PORT to listen on")
    _add_ppaw_flags(p)
    p.add_argument("--timeout", type=float, default=30.0, help="peer timeout (s)")
    p.add_argument("-o", "--out", required=True, help="output directory")

    p = sub.add_parser("wearable", formatter_class=fmt,
                       help="replay a dataset as the wearable over TCP")
    p.add_argument("--connect", required=True, help="HOST:PORT of the gateway")
    p.add_argument("--data", required=True, help="dataset manifest JSON")
    p.add_argument("-o", "--out", help="ledger JSON path (default: stdout)")

    p = sub.add_parser("report", formatter_class=fmt,
                       help="render plot-data CSV from a run trace")
    p.add_argument("--trace", required=True, help="trace CSV from a ppaw run")
    p.add_argument("--features", help="feature CSV supplying true bpm per minute")
    p.add_argument("-o", "--out", required=True, help="plot-data CSV path")

    return parser


def _cmd_synth(args) -> int:
    cfg = SynthConfig(n_minutes_per_phase=args.minutes_per_phase,
                      n_phases=args.phases, sample_rate_hz=args.rate,
                      seed=args.seed, drift_strength=args.drift,
                      noise_bpm_std=args.noise)
    manifest_path = write_synth_dataset(cfg, args.out)
    print(manifest_path)
    return 0


def _cmd_extract(args) -> int:
    manifest = load_manifest(args.data)
    base = os.path.dirname(os.path.abspath(args.data))
    cfg = manifest["config"]
    hr = parse_hr_csv(os.path.join(base, manifest["hr_file"]))
    n = stream_align_to_csv(os.path.join(base, manifest["accel_file"]), hr,
                            cfg["sample_rate_hz"], args.out,
                            manifest.get("phase_boundaries"))
    print(f"{args.out}: {n} minutes")
    return 0


def _cmd_offline(args) -> int:
    records = _load_records(args)
    tree = TreeParams(max_depth=args.depth)
    if args.mode == "same-phase":
        subset = [r for r in records if r.phase == args.phase]
        report = run_offline_same_phase(subset, args.train_frac, args.L, tree,
                                        args.seed, args.predictor)
    else:
        train = [r for r in records if r.phase == args.train_phase]
        test = [r for r in records if r.phase == args.test_phase]
        report = run_offline_cross_phase(train, test, args.L, tree, args.seed,
                                         args.predictor)
    _write(args.out, report.to_json())
    print(f"mae={report.mae:.3f} mse={report.mse:.3f}")
    return 0


def _cmd_ppaw(args) -> int:
    records = _load_records(args)
    report, outcomes = run_ppaw_experiment(records, _ppaw_config(args))
    os.makedirs(args.out, exist_ok=True)
    trace_path = os.path.join(args.out, "trace.csv")
    _write(trace_path, trace_csv(outcomes))
    report.trace_path = trace_path
    _write(os.path.join(args.out, "report.json"), report.to_json())
    print(f"mae={report.mae:.3f} mse={report.mse:.3f} "
          f"queried={report.query_fraction:.2%}")
    return 0


def _cmd_sweep_o(args) -> int:
    records = _load_records(args)
    try:
        values = [float(v) for v in args.O.split(",") if v]
    except ValueError:
        raise _UsageError(f"bad --O list '{args.O}'") from None
    if not values:
        raise _UsageError("--O must list at least one value")
    base = PpawConfig(L=args.L, N=args.N, O=values[0], T=args.T, TTL=args.TTL,
                      tree=TreeParams(max_depth=args.depth), seed=args.seed)
    reports = sweep_O(records, base, values)
    _write(args.out, sweep_table_csv(reports))
    for r in reports:
        print(f"O={r.config['O']} mae={r.mae:.3f} "
              f"queried={r.query_fraction:.2%}")
    return 0


def _cmd_gateway(args) -> int:
    host, port = _host_port(args.listen)
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as server:
        server.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        server.bind((host, port))
        server.listen(1)
        conn, _ = server.accept()
        conn.settimeout(args.timeout)
        with conn, conn.makefile("rb") as rf, conn.makefile("wb") as wf:
            report, ledger, outcomes = gateway_serve(rf, wf, _ppaw_config(args))
    os.makedirs(args.out, exist_ok=True)
    _write(os.path.join(args.out, "trace.csv"), trace_csv(outcomes))
    _write(os.path.join(args.out, "report.json"), report.to_json())
    _write(os.path.join(args.out, "ledger.json"),
           json.dumps(ledger.to_json_dict(), indent=2) + "\n")
    print(f"minutes={ledger.minutes_sensed} queries={ledger.queries} "
          f"savings={ledger.savings_vs_always_query:.2%}")
    return 0


def _cmd_wearable(args) -> int:
    manifest = load_manifest(args.data)
    base = os.path.dirname(os.path.abspath(args.data))
    cfg = manifest["config"]
    accel = parse_accel_csv(os.path.join(base, manifest["accel_file"]))
    hr = parse_hr_csv(os.path.join(base, manifest["hr_file"]))
    host, port = _host_port(args.connect)
    with socket.create_connection((host, port)) as sock:
        with sock.makefile("rb") as rf, sock.makefile("wb") as wf:
            ledger = wearable_replay(rf, wf, accel, hr,
                                     sample_rate_hz=cfg["sample_rate_hz"])
    text = json.dumps(ledger.to_json_dict(), indent=2) + "\n"
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _cmd_report(args) -> int:
    with open(args.trace) as fh:
        outcomes = parse_trace_csv(fh.read())
    truth = None
    if args.features:
        truth = {r.minute_index: r.bpm for r in read_feature_csv(args.features)
                 if r.bpm is not None}
    _write(args.out, plot_data_csv(outcomes, truth))
    print(args.out)
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "extract": _cmd_extract,
    "offline": _cmd_offline,
    "ppaw": _cmd_ppaw,
    "sweep-o": _cmd_sweep_o,
    "gateway": _cmd_gateway,
    "wearable": _cmd_wearable,
    "report": _cmd_report,
}


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"error: parse: {exc}", file=sys.stderr)
        return 2
    except AccelHrError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
