import numpy as np
import pytest
from hypothesis import strategies as st

from specmeasure.operators import BUILTIN_KINDS, OperatorSpec, TruncatedOperator

EPS = np.finfo(float).eps
ACCEPTANCE_LINES = []


def ulp(x):
    return float(np.spacing(abs(float(x))))


@pytest.fixture(params=[k.value for k in BUILTIN_KINDS])
def builtin_spec(request):
    return OperatorSpec(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_symmetric(rng, n, tridiagonal=False):
    A = rng.standard_normal((n, n))
    A = np.triu(A)
    if tridiagonal:
        A = np.triu(np.tril(A, 1))
    return TruncatedOperator(A + np.triu(A, 1).T)


@st.composite
def symmetric_matrices(draw, max_dim=8):
    """Small real symmetric matrices, sometimes with repeated eigenvalues."""
    n = draw(st.integers(1, max_dim))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    style = draw(st.sampled_from(["dense", "tridiagonal", "degenerate"]))
    if style == "degenerate":
        Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        lam = rng.integers(-3, 4, n).astype(float)
        A = (Q * lam) @ Q.T
        A = np.triu(A)
        return TruncatedOperator(A + np.triu(A, 1).T)
    return random_symmetric(rng, n, tridiagonal=style == "tridiagonal")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
