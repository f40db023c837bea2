import numpy as np
import pytest

from ncvi.systems import make_fieldline, make_rotor, sho_flow


@pytest.fixture
def rotor():
    return make_rotor(0.1)


@pytest.fixture
def fieldline():
    return make_fieldline(0.0075)


def sho_orbit(z0, epsilon, tau, n, t0=0.0):
    """Exact rotor-oscillator orbit sampled at ``t0 + k tau``."""
    t = t0 + tau * np.arange(n)
    return sho_flow(np.asarray(z0, float)[None], t, t0, epsilon)


_ACCEPTANCE = []


@pytest.fixture
def acceptance_report():
    """Record one summary line per acceptance criterion."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE):
            terminalreporter.write_line(line)
