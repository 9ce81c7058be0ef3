import numpy as np
import pytest

from proxrate import build_paper_instance, build_random_lasso, reference_solution

ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def benchmark():
    return build_paper_instance()


@pytest.fixture(scope="session")
def benchmark_reference(benchmark):
    return reference_solution(benchmark.problem)


@pytest.fixture(scope="session")
def small_lasso():
    # well conditioned, mu/L = 0.1, with an active l1 term
    return build_random_lasso(30, 20, 0.4, 4.0, seed=7, lam=0.1)


@pytest.fixture(scope="session")
def small_reference(small_lasso):
    return reference_solution(small_lasso)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
