import time

import pytest
from hypothesis import settings

from lbl.diagram import trace_even_branch, verify
from lbl.korman import cached_alpha_star, cached_generator
from lbl.problem import exponential_spec, power_spec

settings.register_profile("lbl", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("lbl")

SESSION_START = time.perf_counter()
ACCEPTANCE_LINES = []
# wall-clock seconds of the shared session fixtures
TIMINGS = {}


def record_acceptance(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
    elapsed = time.perf_counter() - SESSION_START
    terminalreporter.write_line(f"total session time {elapsed:.1f} s (budget 600 s)")


class Timed:
    def __init__(self, value, seconds):
        self.value = value
        self.seconds = seconds


def _timed(fn, *args, **kw):
    t = time.perf_counter()
    out = fn(*args, **kw)
    return Timed(out, time.perf_counter() - t)


@pytest.fixture(scope="session")
def exp1():
    return exponential_spec(1.0)


@pytest.fixture(scope="session")
def pow7():
    return power_spec(7.0, 1.0)


@pytest.fixture(scope="session")
def exp1_gen(exp1):
    return cached_generator(exp1)


@pytest.fixture(scope="session")
def pow7_gen(pow7):
    return cached_generator(pow7)


@pytest.fixture(scope="session")
def exp1_alpha_star(exp1):
    return cached_alpha_star(exp1)


@pytest.fixture(scope="session")
def pow7_alpha_star(pow7):
    return cached_alpha_star(pow7)


@pytest.fixture(scope="session")
def exp1_table(exp1):
    """Default 200-point sweep, timed."""
    return _timed(trace_even_branch, exp1)


@pytest.fixture(scope="session")
def pow7_table(pow7):
    return _timed(trace_even_branch, pow7)


@pytest.fixture(scope="session")
def exp1_report(exp1, exp1_table):
    out = _timed(verify, exp1, table=exp1_table.value)
    TIMINGS["exp1_report"] = out.seconds
    return out.value


@pytest.fixture(scope="session")
def pow7_report(pow7, pow7_table):
    out = _timed(verify, pow7, table=pow7_table.value)
    TIMINGS["pow7_report"] = out.seconds
    return out.value
