import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria: one summary line each, whatever the outcome
_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "PASS" if report.passed else "SKIP" if report.skipped else "FAIL"
        detail = ""
        if report.skipped and isinstance(report.longrepr, tuple):
            detail = f" ({report.longrepr[2]})"
        # parametrized criteria report their worst case
        rank = {"PASS": 0, "SKIP": 1, "FAIL": 2}
        if n in _CRITERIA and rank[_CRITERIA[n][0]] >= rank[status]:
            return
        _CRITERIA[n] = (status, f"criterion {n}: {status}  {title}{detail}")


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n][1])
