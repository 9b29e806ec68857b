import numpy as np
import pytest

_RESULTS = []


def mc_se(x):
    x = np.asarray(x, dtype=float)
    return x.std(ddof=1) / np.sqrt(x.shape[0])


@pytest.fixture
def report():
    """Record an acceptance criterion outcome; printed again in the terminal summary."""

    def _report(criterion, ok, detail=""):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {detail}".rstrip()
        _RESULTS.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in _RESULTS:
            terminalreporter.write_line(line)
