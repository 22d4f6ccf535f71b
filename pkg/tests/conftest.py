import numpy as np
import pytest

from randeuler.core import ProblemSpec


def constant_field(c, eta, a=0.0, b=1.0, K=None, L=1.0):
    c = np.asarray(c, dtype=float)
    eta = np.asarray(eta, dtype=float)

    def rhs(t, y):
        return np.broadcast_to(c, np.shape(y)).copy()

    K = K if K is not None else max(np.abs(c).sum(), np.abs(eta).sum(), 1.0)
    return ProblemSpec(a, b, eta, rhs, K=K, L=L)


@pytest.fixture
def zero_problem():
    return constant_field([0.0, 0.0], [0.5, -0.25])


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number])
