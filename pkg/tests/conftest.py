import numpy as np
import pytest
import scipy.linalg as sla

from krylovperf.ctmc import from_rate_matrix


def random_generator(rng, n, density=0.3, scale=1.0):
    """Random CTMC generator with a few guaranteed off-diagonal entries per row."""
    R = rng.uniform(0.0, scale, (n, n)) * (rng.random((n, n)) < density)
    np.fill_diagonal(R, 0.0)
    for i in range(n):
        j = (i + 1) % n
        if n > 1 and R[i].sum() == 0:
            R[i, j] = rng.uniform(0.1, scale)
    return from_rate_matrix(R)


def dense_exp_action(A, v, t):
    """Oracle ``e^{tA} v`` via scipy's expm."""
    return sla.expm(t * np.asarray(A)) @ v


def dense_tphi1_action(A, v, t):
    """Oracle ``t phi_1(tA) v = int_0^t e^{sA} v ds`` via the augmented matrix."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    aug = np.zeros((n + 1, n + 1))
    aug[:n, :n] = t * A
    aug[:n, n] = t * v
    return sla.expm(aug)[:n, n]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance bookkeeping: one summary line per criterion

ACCEPTANCE_DETAILS = {}
_ACCEPTANCE_OUTCOMES = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    k = marker.args[0]
    _ACCEPTANCE_OUTCOMES[k] = "PASS" if rep.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE_OUTCOMES):
        detail = ACCEPTANCE_DETAILS.get(k, "")
        terminalreporter.write_line(f"criterion {k:2d}: {_ACCEPTANCE_OUTCOMES[k]}  {detail}")
