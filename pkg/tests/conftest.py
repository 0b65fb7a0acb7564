import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cqed_backflow.model import TWO_PI, EffectiveParams, SimGrid

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES = []


def fig_params(gamma_mhz=0.3, lambda_mhz=0.0, **kw):
    return EffectiveParams.from_mhz(omega_mhz=10000.0, g_mhz=50.0, gamma_mhz=gamma_mhz,
                                    lambda_mhz=lambda_mhz, **kw)


def periods_grid(p, periods=4, fock_dim=None):
    return SimGrid.resolving(p, periods * TWO_PI / p.omega, fock_dim)


@pytest.fixture
def fig3():
    return fig_params(0.3)


@pytest.fixture
def fig5():
    return fig_params(0.3, 10.0)


@pytest.fixture
def fig5_strong():
    return fig_params(0.3, 50.0)


@pytest.fixture
def window4(fig3):
    return periods_grid(fig3)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def record_acceptance():
    def record(number, passed, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
