import numpy as np
import pytest

from pseudospec import MultitypePattern, Window

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


def poisson_pattern(rng, side=10.0, rates=(1.0, 2.0)):
    window = Window.square(side)
    comps = [rng.uniform(-side / 2, side / 2, size=(rng.poisson(r * side ** 2), 2)) for r in rates]
    return MultitypePattern.from_components(comps, window)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
