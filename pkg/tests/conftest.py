import numpy as np
import pytest

from stylerank.files import fixture_path
from stylerank.egta import PayoffTensor

# criterion id -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def gcg():
    return PayoffTensor.read_csv(fixture_path("gcg_payoff_matrix.csv"))


@pytest.fixture
def rps():
    return PayoffTensor.read_csv(fixture_path("rps.csv"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'}  {detail}")
