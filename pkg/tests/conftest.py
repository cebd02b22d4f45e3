import functools

import pytest

from bisconcave.bands import ks_quantile, wks_quantile


@functools.lru_cache(maxsize=None)
def cached_ks(n, alpha=0.05, reps=20000, seed=0):
    return ks_quantile(n, alpha, reps, seed)


@functools.lru_cache(maxsize=None)
def cached_wks(n, gamma_w, alpha=0.05, reps=20000, seed=0):
    return wks_quantile(n, alpha, gamma_w, reps, seed)


@pytest.fixture
def ks_q():
    return cached_ks


@pytest.fixture
def wks_q():
    return cached_wks


ACCEPTANCE_LINES = []


def record(criterion, passed, detail):
    """Print one verdict line now and repeat it in the terminal summary."""
    line = f"[{'PASS' if passed else 'FAIL'}] AC{criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("AC")[1].split(":")[0])):
            terminalreporter.write_line(line)
