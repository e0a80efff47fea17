import numpy as np
import pytest

from weightedshift import kernel
from weightedshift.flow import FlowOptions

BACKENDS = ["python"] + (["cython"] if kernel.BACKEND == "cython" else [])

# (criterion, passed, detail) lines filled in by test_acceptance.py
ACCEPTANCE_LINES: list = []


@pytest.fixture(params=BACKENDS)
def backend_opts(request):
    """Flow options pinned to each available kernel backend."""
    return FlowOptions(backend=request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for crit, passed, detail in sorted(ACCEPTANCE_LINES, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {crit:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
