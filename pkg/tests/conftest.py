import numpy as np
import pytest

from irs_noma import ccm
from irs_noma.penalty import ConstraintSet


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_point(rng, L):
    return ccm.normalize(crandn(rng, L))


def random_constraint_set(rng, K=3, L=8, rate_hi=0.5):
    return ConstraintSet(crandn(rng, L), crandn(rng, K, L), crandn(rng, K),
                         rng.uniform(0.2, 2.0, K), rng.uniform(0.0, rate_hi, K))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_REPORT_KEY = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_report(request):
    """Collects one summary line per acceptance criterion for the terminal report."""
    return request.config.stash.setdefault(_REPORT_KEY, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_REPORT_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
