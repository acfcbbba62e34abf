import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("gerbeflow", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("gerbeflow")

# criterion number -> (passed, detail), filled by tests/test_acceptance.py
CRITERIA = {}


@pytest.fixture
def criterion():
    def record(number, passed, detail):
        # a criterion checked by several tests passes only if every part passes
        if number in CRITERIA:
            prev_ok, prev_detail = CRITERIA[number]
            CRITERIA[number] = (prev_ok and bool(passed), f"{prev_detail}; {detail}")
        else:
            CRITERIA[number] = (bool(passed), detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        passed, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
