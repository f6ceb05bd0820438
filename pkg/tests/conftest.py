import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def reference_xorshift(y):
    """Three-line reference recurrence, kept separate from the library."""
    y ^= (y << 13) & 0xFFFFFFFF
    y ^= y >> 17
    y ^= (y << 5) & 0xFFFFFFFF
    return y


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one pass/fail line for an acceptance criterion, then assert it."""

    def record(number, title, passed, detail, seconds, limit):
        within = seconds < limit
        ok = passed and within
        line = (f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} | {detail} | "
                f"{seconds:.2f}s (limit {limit:g}s)")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line
        assert within, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
