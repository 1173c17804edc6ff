import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from accelhr import SynthConfig, align_minutes, synth_stream

# PASS/FAIL lines recorded by the acceptance tests; echoed after the run
# because pytest's fd-level capture swallows prints from passing tests.
acceptance_lines: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def drift_stream():
    """2-phase drifting stream shared by the slower experiment tests."""
    cfg = SynthConfig(n_minutes_per_phase=150, n_phases=2, sample_rate_hz=50,
                      seed=7, drift_strength=15.0, noise_bpm_std=3.0)
    accel, hr = synth_stream(cfg)
    return cfg, align_minutes(accel, hr, cfg.sample_rate_hz, cfg.phase_boundaries)


@pytest.fixture(scope="session")
def stationary_stream():
    """Constant-activity, zero-noise stream: heart rate exactly constant."""
    cfg = SynthConfig(n_minutes_per_phase=120, n_phases=1, sample_rate_hz=50,
                      seed=3, activity_regimes=(((5, 5), (0.3, 0.3)),))
    accel, hr = synth_stream(cfg)
    return cfg, align_minutes(accel, hr, cfg.sample_rate_hz)


def random_windows(rng, n, m):
    return rng.normal(0.0, 1.0, (n, m)) + rng.uniform(-2, 2, (n, 1))
