import numpy as np
import pytest

from twoway.models import Shard

_ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def verdict():
    """verdict(number, ok, detail): print one PASS/FAIL line, keep it for the summary, assert."""

    def _report(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        assert ok, line

    return _report


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_shard(rng, n, d, loss="squared"):
    X = rng.standard_normal((n, d))
    if loss == "squared":
        y = X @ rng.standard_normal(d) + 0.1 * rng.standard_normal(n)
    else:
        y = np.where(rng.uniform(size=n) < 0.5, 1.0, -1.0)
    return Shard(X, y, loss)
