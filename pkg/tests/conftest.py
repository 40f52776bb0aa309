import numpy as np
import pytest

from chronocollapse.state import GridSpec, ModelParams, PotentialSpec

_ACCEPTANCE_LINES = []


@pytest.fixture
def wide_grid():
    return GridSpec(1024, -51.2, 0.1)


@pytest.fixture
def trap_grid():
    return GridSpec(256, -16.0, 0.125)


@pytest.fixture
def trap_params():
    return ModelParams(potential=PotentialSpec.harmonic(1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def acceptance_line():
    """Print and remember one pass/fail line per acceptance criterion."""

    def emit(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
