"""A complete wearable <-> gateway session over an in-process socket pair.

The wearable streams raw acceleration as newline-delimited JSON; the
gateway assembles minutes, extracts features, runs the online loop, and
sends back a heart-rate query only when its ensemble is uncertain. The
energy ledger prices every streamed minute (cheap) and every query
(5000x dearer) and reports the saving versus querying all the time.
"""

from accelhr import (
    PpawConfig,
    SynthConfig,
    run_local_session,
    synth_stream,
)

cfg = SynthConfig(n_minutes_per_phase=60, n_phases=2, sample_rate_hz=16,
                  seed=17, drift_strength=10.0, noise_bpm_std=2.0)
accel, hr = synth_stream(cfg)
print(f"replaying {len(accel)} acceleration samples "
      f"({2 * cfg.n_minutes_per_phase} minutes at {cfg.sample_rate_hz} Hz)\n")

transcript: list[str] = []
report, ledger, outcomes, _ = run_local_session(
    accel, hr, PpawConfig(seed=42), sample_rate_hz=cfg.sample_rate_hz,
    transcript=transcript)

print("first exchanges on the wire ('>' wearable to gateway, '<' back):")
shown = 0
for line in transcript:
    if '"type":"ACC"' in line and shown > 2:
        continue
    print(f"  {line[:76]}")
    shown += 1
    if shown >= 10:
        break
print(f"  ... {len(transcript)} lines total\n")

print(f"gateway: {report.n_minutes} minutes processed, "
      f"{ledger.queries} heart-rate queries "
      f"({report.query_fraction:.1%} of minutes)")
print(f"  mae over queried minutes: {report.mae:.2f} bpm")
print(f"energy: accel {ledger.accel_energy:.0f} + ppg {ledger.ppg_energy:.0f} "
      f"= {ledger.total:.0f} units")
print(f"  saving vs always-on heart-rate sensing: "
      f"{ledger.savings_vs_always_query:.1%}")
