import math

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import EPS, random_symmetric, symmetric_matrices, ulp
from specmeasure.eigen import (EigenConvergenceError, cluster_eigenvalues, default_cluster_tol,
                               eigendecompose, householder_tridiagonalize, tridiagonal_ql,
                               EigenDecomposition)
from specmeasure.operators import OperatorSpec, TruncatedOperator, build_truncation


def count_below(A, lam):
    """Number of eigenvalues of ``A`` below ``lam`` (Sylvester inertia).

    Counts negative pivots of unpivoted Gaussian elimination on A - lam I;
    bisection midpoints never hit a singular leading minor in practice.
    """
    M = np.array(A, dtype=float) - lam * np.eye(len(A))
    n = len(M)
    neg = 0
    for k in range(n):
        p = M[k, k]
        if p == 0.0:
            p = 1e-300
        if p < 0:
            neg += 1
        if k + 1 < n:
            M[k + 1:, k + 1:] -= np.outer(M[k + 1:, k], M[k, k + 1:]) / p
    return neg


def bisection_eigenvalues(A, tol=1e-12):
    A = np.asarray(A, dtype=float)
    n = len(A)
    r = np.abs(A).sum(axis=1).max() + 1.0
    out = []
    for j in range(n):  # j-th smallest: smallest lam with count_below(lam) > j
        lo, hi = -r - 0.318309, r + 0.271828  # asymmetric: midpoints avoid integers
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if count_below(A, mid) > j:
                hi = mid
            else:
                lo = mid
        out.append(0.5 * (lo + hi))
    return np.array(out)


def check_invariants(T, d):
    N = T.dim
    assert np.all(np.diff(d.eigenvalues) >= 0)
    assert d.orthonormality_defect() <= 10 * N * EPS
    assert d.reconstruction_defect(T) <= 20 * N * ulp(np.abs(T.entries).max())
    assert d.residual_bound <= 10 * N * ulp(np.abs(d.eigenvalues).max()) + 1e-300


def test_diagonal_input():
    d = eigendecompose(TruncatedOperator(np.diag([3.0, 1.0, 2.0])))
    assert d.eigenvalues.tolist() == [1.0, 2.0, 3.0]
    np.testing.assert_array_equal(d.eigenvectors, np.eye(3)[:, [1, 2, 0]])


def test_free_jacobi_closed_form():
    # eigenvalues 2 cos(k pi / (N + 1)), k = N..1
    N = 3
    d = eigendecompose(build_truncation(OperatorSpec("FreeJacobi"), N))
    expected = [2 * math.cos(k * math.pi / (N + 1)) for k in range(N, 0, -1)]
    np.testing.assert_allclose(d.eigenvalues, expected, atol=4 * EPS)
    np.testing.assert_allclose(d.eigenvalues, [-math.sqrt(2), 0, math.sqrt(2)], atol=4 * EPS)


@pytest.mark.parametrize("N", [5, 17, 64])
def test_free_jacobi_closed_form_larger(N):
    d = eigendecompose(build_truncation(OperatorSpec("FreeJacobi"), N))
    expected = np.sort(2 * np.cos(np.arange(1, N + 1) * np.pi / (N + 1)))
    np.testing.assert_allclose(d.eigenvalues, expected, atol=10 * N * EPS)


def test_one_by_one():
    d = eigendecompose(TruncatedOperator([[-2.5]]))
    assert d.eigenvalues.tolist() == [-2.5]
    assert d.eigenvectors.tolist() == [[1.0]]


@settings(max_examples=40, deadline=None)
@given(T=symmetric_matrices(max_dim=6))
def test_agrees_with_bisection_oracle(T):
    d = eigendecompose(T)
    np.testing.assert_allclose(d.eigenvalues, bisection_eigenvalues(T.entries), atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(T=symmetric_matrices(max_dim=12))
def test_invariants_random(T):
    check_invariants(T, eigendecompose(T))


@pytest.mark.parametrize("N", [1, 2, 10, 200])
def test_invariants_builtin(builtin_spec, N):
    T = build_truncation(builtin_spec, N)
    check_invariants(T, eigendecompose(T))


@pytest.mark.slow
def test_reconstruction_up_to_2000(builtin_spec):
    T = build_truncation(builtin_spec, 2000)
    check_invariants(T, eigendecompose(T))


def test_dense_input_goes_through_householder(rng):
    T = random_symmetric(rng, 60)
    d, e, Q = householder_tridiagonalize(T.entries)
    tri = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
    assert np.abs(Q.T @ Q - np.eye(60)).max() < 60 * EPS
    assert np.abs(Q @ tri @ Q.T - T.entries).max() < 200 * EPS * np.abs(T.entries).max()
    check_invariants(T, eigendecompose(T))


def test_deterministic(rng):
    T = random_symmetric(rng, 40)
    a, b = eigendecompose(T), eigendecompose(T)
    assert a.eigenvalues.tobytes() == b.eigenvalues.tobytes()
    assert a.eigenvectors.tobytes() == b.eigenvectors.tobytes()


def test_sign_convention(rng):
    d = eigendecompose(random_symmetric(rng, 25))
    for k in range(25):
        v = d.eigenvectors[:, k]
        first = v[np.flatnonzero(np.abs(v) > 25 * EPS)[0]]
        assert first > 0


def test_values_only_matches(rng):
    T = random_symmetric(rng, 30)
    full, values = eigendecompose(T), eigendecompose(T, compute_vectors=False)
    assert values.eigenvectors is None
    np.testing.assert_allclose(values.eigenvalues, full.eigenvalues, atol=100 * EPS)


def test_sweep_cap_reports_stuck_index():
    d = np.zeros(6)
    e = np.ones(5)
    with pytest.raises(EigenConvergenceError) as info:
        tridiagonal_ql(d, e, max_sweeps=0)
    assert info.value.index == 0


def test_bad_tol():
    with pytest.raises(ValueError):
        eigendecompose(TruncatedOperator([[1.0]]), tol=0.0)


def test_looser_tol_still_converges(rng):
    T = random_symmetric(rng, 20, tridiagonal=True)
    d = eigendecompose(T, tol=1e-8)
    np.testing.assert_allclose(d.eigenvalues, eigendecompose(T).eigenvalues, atol=1e-6)


def _dec(values):
    return EigenDecomposition(np.asarray(values, dtype=float), None)


def test_clusters_near_degenerate():
    assert cluster_eigenvalues(_dec([1, 1 + 1e-15, 5]), 1e-12) == [range(0, 2), range(2, 3)]


def test_clusters_tau_zero():
    assert cluster_eigenvalues(_dec([1, 2, 3]), 0.0) == [range(0, 1), range(1, 2), range(2, 3)]


def test_clusters_zero_matrix():
    d = eigendecompose(TruncatedOperator(np.zeros((3, 3))))
    for tau in (0.0, 1e-12, None):
        assert cluster_eigenvalues(d, tau) == [range(0, 3)]


@settings(max_examples=40, deadline=None)
@given(T=symmetric_matrices(max_dim=10))
def test_cluster_contract(T):
    d = eigendecompose(T)
    tau = default_cluster_tol(d.eigenvalues)
    clusters = cluster_eigenvalues(d, tau)
    assert [i for c in clusters for i in c] == list(range(T.dim))
    lam = d.eigenvalues
    for c, nxt in zip(clusters, clusters[1:]):
        assert lam[nxt.start] - lam[c.stop - 1] > tau
    for c in clusters:
        assert lam[c.stop - 1] - lam[c.start] <= (len(c) - 1) * tau


def test_default_tau_scale():
    lam = np.array([-4.0, 0.0, 2.0])
    assert default_cluster_tol(lam) == 100 * 3 * np.spacing(4.0)
