import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sla_inverse import Material, exponential_ts, generate_notched_beam, run_forward, sawtooth_from_ts
from sla_inverse.dataio import decimate_curve

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# synthetic three-point bending setup shared by the round-trip tests
SPAN, DEPTH, THICKNESS = 600.0, 150.0, 100.0
E, NU = 30000.0, 0.2
F_T, G_F = 3.0, 0.08
BAND = 0.01 * F_T
N_POINTS = 300


def beam(elem_size=10.0, **kw):
    return generate_notched_beam(SPAN, DEPTH, THICKNESS, elem_size=elem_size, response="cmod", load=1e5, **kw)


@pytest.fixture(scope="session")
def concrete():
    return Material.isotropic(E, NU)


@pytest.fixture(scope="session")
def prescribed_ts():
    return exponential_ts(F_T, G_F)


@pytest.fixture(scope="session")
def beam10():
    return beam(10.0)


@pytest.fixture(scope="session")
def forward10(beam10, concrete, prescribed_ts):
    law = sawtooth_from_ts(prescribed_ts, "stress-band", BAND, k0=E)
    return run_forward(beam10, concrete, law)


@pytest.fixture(scope="session")
def experiment10(forward10):
    return decimate_curve(forward10.loading_curve(), N_POINTS)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
