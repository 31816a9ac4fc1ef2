from functools import lru_cache

import numpy as np
import pytest

from elbowctl import DisturbanceSpec, LyapunovController, ManipulatorParams, SimConfig, simulate
from elbowctl.config import PRESETS, manifests_from_dict


@pytest.fixture
def params():
    return ManipulatorParams()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@lru_cache(maxsize=None)
def _preset_run(name):
    return simulate(manifests_from_dict(PRESETS[name])[0].config)


@pytest.fixture(scope="session")
def preset_runs():
    """Simulation result of a figure preset, computed once per session."""
    return _preset_run


@pytest.fixture(scope="session")
def lyapunov_disturbed():
    """Estimator-based law, default gains, d = (1, 0.5), 30 s at dt = 1e-3."""
    return simulate(SimConfig(controller=LyapunovController(),
                              disturbance=DisturbanceSpec((1.0, 0.5)), t_end=30.0, dt=1e-3))


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record the verdict line of an acceptance criterion."""

    def record(number, passed, text):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {text}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
