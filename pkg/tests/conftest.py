import math

import numpy as np
import pytest

from patl.medium import LayeredMedium

TWO_PI = 2 * math.pi


def constant_medium(n=257, D=1.0, mu=3.0, c=1.0, L=TWO_PI, H=1.0):
    return LayeredMedium.from_functions(n, H, D, mu, c=c, width_L=L)


def linear_D_medium(n=257):
    return LayeredMedium.from_functions(n, 1.0, lambda y: 1.0 + 0.3 * y, 3.0, width_L=TWO_PI)


def sine_mu_medium(n=257):
    return LayeredMedium.from_functions(n, 1.0, 1.0, lambda y: 3.0 + 0.5 * np.sin(2 * np.pi * y),
                                        width_L=TWO_PI)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = {}


def report_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
