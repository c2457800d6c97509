import math

import numpy as np
import pytest

from adrc_fbtf import DesignSpec

# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def random_spec(rng: np.random.Generator, order: int) -> DesignSpec:
    """Log-uniform omega*T in [1e-3, 0.5], k_eso in [1, 10], b0 in [1e-2, 1e5], T in [1e-6, 1e-2]."""
    T = math.exp(rng.uniform(math.log(1e-6), math.log(1e-2)))
    wT = math.exp(rng.uniform(math.log(1e-3), math.log(0.5)))
    k_eso = rng.uniform(1.0, 10.0)
    b0 = math.exp(rng.uniform(math.log(1e-2), math.log(1e5)))
    return DesignSpec(order, b0, T, wT / T, k_eso)


@pytest.fixture
def buck_spec() -> DesignSpec:
    # 1 ms settling design for a 100 uF output capacitor at 50 kHz
    return DesignSpec(order=1, b0=1e4, T=2e-5, omega_cl=4000.0, k_eso=5.0)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
