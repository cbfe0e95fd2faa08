import numpy as np
import pytest

from mcscore.target import GaussianMixtureSpec, make_gaussian_mixture

# criterion label -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE_RESULTS = {}


@pytest.fixture
def bimodal_spec():
    return GaussianMixtureSpec([[2.0], [-2.0]], [0.5, 0.5])


@pytest.fixture
def bimodal(bimodal_spec):
    return make_gaussian_mixture(bimodal_spec)


@pytest.fixture
def rng():
    return np.random.default_rng(20240501)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE_RESULTS):
        passed, detail = ACCEPTANCE_RESULTS[label]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")
