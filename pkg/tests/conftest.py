import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lambda_mutual import IncomeDistribution, MechanismConfig, UtilitySpec  # noqa: E402

ACCEPTANCE_RESULTS = {}


@pytest.fixture
def log_u():
    return UtilitySpec("log")


@pytest.fixture
def crra2():
    return UtilitySpec("crra", 2.0)


@pytest.fixture
def two_state():
    return IncomeDistribution([0.5, 1.5])


@pytest.fixture
def cfg():
    return MechanismConfig(beta=0.9, lambda0=1.0)


@pytest.fixture
def cfg_prop1():
    return MechanismConfig(beta=0.9, lambda0=1.0, deviation_scaling="prop1")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, line = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {key:>2}. {line}")
