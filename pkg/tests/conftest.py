import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dipolar_gates import coupling  # noqa: E402
from dipolar_gates.params import ModelParams  # noqa: E402

ACCEPTANCE_LINES = {}


def record(criterion, passed, detail):
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def two_mol():
    p = ModelParams()
    return p, coupling.two_molecule_setup(p)


@pytest.fixture(scope="session")
def marker_setups():
    """Default 50-molecule periodic chain with marker at b/a = 0.6 ... 0.9."""
    return {b: coupling.marker_chain_setup(ModelParams(b_over_a=b)) for b in (0.6, 0.7, 0.8, 0.9)}


@pytest.fixture(scope="session")
def bare_chain():
    return coupling.marker_chain_setup(ModelParams(), with_marker=False)


@pytest.fixture(scope="session")
def nu():
    return math.sqrt(6.0 / ModelParams().mass)
