import re

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

_CRITERIA = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    key = (int(m.group(1)), m.group(2))
    if report.when == "call" or report.outcome != "passed":
        prev = _CRITERIA.get(key, "PASS")
        _CRITERIA[key] = "PASS" if (prev == "PASS" and report.passed) else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (num, name), status in sorted(_CRITERIA.items()):
        terminalreporter.write_line(f"criterion {num:2d} {name:<28s} {status}")
