import sys

import pytest

from poisson_minimax.boundary import extract_boundaries, solve_value
from poisson_minimax.fode import solve_fode
from poisson_minimax.model import Costs, Model


@pytest.fixture(scope="session")
def ref_model():
    return Model(1.0, 5.0)


@pytest.fixture(scope="session")
def ref_costs():
    return Costs(2.0, 2.0)


@pytest.fixture(scope="session")
def value_grid(ref_model, ref_costs):
    return solve_value(ref_model, ref_costs)


@pytest.fixture(scope="session")
def boundaries(value_grid):
    return extract_boundaries(value_grid)


@pytest.fixture(scope="session")
def fode_solution(ref_model, ref_costs, boundaries):
    return solve_fode(ref_model, ref_costs, boundaries.ratio)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
