import math

import numpy as np
import pytest

from conftest import EPS, random_symmetric, ulp
from specmeasure.family import SpectralFamily, stieltjes_apply
from specmeasure.operators import BUILTIN_KINDS, OperatorSpec, TruncatedOperator, build_truncation
from specmeasure.resolvent import (EndpointError, QuadratureError, ResolventError, ResolventQuery,
                                   operational_calculus_residual, resolvent_solve, shifted_solves,
                                   smoothed_indicator, stone_limit_study, stone_reconstruct)

INF = math.inf


def diag(*v):
    return TruncatedOperator(np.diag(np.asarray(v, dtype=float)))


# ----------------------------------------------------------------- solves

def test_diagonal_resolvent():
    y = resolvent_solve(diag(1, 2), ResolventQuery(1j, np.array([1.0, 0.0])))
    np.testing.assert_allclose(y, [0.5 + 0.5j, 0.0], atol=EPS)


def test_zero_rhs():
    T = build_truncation(OperatorSpec("FreeJacobi"), 8)
    assert not np.any(resolvent_solve(T, ResolventQuery(1j, np.zeros(8))))


def test_two_point_spectrum():
    # eigenvalues +-1, eigenvectors (1, +-1)/sqrt2
    T = build_truncation(OperatorSpec("FreeJacobi"), 2)
    y = resolvent_solve(T, ResolventQuery(2j, np.array([1.0, 0.0])))
    p, m = 1 / (1 - 2j), 1 / (-1 - 2j)
    np.testing.assert_allclose(y, [(p + m) / 2, (p - m) / 2], atol=4 * EPS)
    fam = SpectralFamily.from_operator(T)
    via = stieltjes_apply(fam, lambda l: 1 / (l - 2j), (-INF, INF), np.array([1.0, 0.0]))
    np.testing.assert_allclose(y, via, atol=4 * EPS)


def test_real_shift_rejected():
    with pytest.raises(ResolventError):
        ResolventQuery(0.5, np.ones(2))
    with pytest.raises(ResolventError):
        shifted_solves(diag(1, 2), [1.0 + 0j], np.ones(2))


@pytest.mark.parametrize("kind", [k.value for k in BUILTIN_KINDS])
def test_residual_contract_builtin(kind, rng):
    N = 300
    T = build_truncation(OperatorSpec(kind), N)
    normT = np.linalg.norm(T.entries, 2)
    for _ in range(10):
        z = complex(rng.uniform(-10, 10), 10 ** rng.uniform(-2, 1) * rng.choice([-1, 1]))
        x = rng.standard_normal(N)
        y = resolvent_solve(T, ResolventQuery(z, x))
        res = np.linalg.norm(T.entries @ y - z * y - x)
        assert res <= 50 * N * ulp((normT + abs(z)) * np.linalg.norm(y))


def test_residual_contract_dense(rng):
    T = random_symmetric(rng, 40)
    z = 0.3 - 0.2j
    x = rng.standard_normal(40)
    y = resolvent_solve(T, ResolventQuery(z, x))
    res = np.linalg.norm(T.entries @ y - z * y - x)
    assert res <= 50 * 40 * ulp((np.linalg.norm(T.entries, 2) + abs(z)) * np.linalg.norm(y))


def test_conjugate_symmetry(rng):
    T = build_truncation(OperatorSpec("HermitePosition"), 50)
    x = rng.standard_normal(50)
    for z in (0.3 + 0.7j, -2 + 0.05j):
        a = resolvent_solve(T, ResolventQuery(z, x))
        b = resolvent_solve(T, ResolventQuery(z.conjugate(), x))
        np.testing.assert_allclose(b, a.conj(), atol=100 * 50 * EPS * np.linalg.norm(a))


@pytest.mark.parametrize("kind", ["FreeJacobi", "HermitePosition", "DiscreteSchroedinger"])
def test_first_resolvent_identity(kind, rng):
    N = 60
    T = build_truncation(OperatorSpec(kind), N)
    normT = np.linalg.norm(T.entries, 2)
    for _ in range(20):
        z1, z2 = (complex(rng.uniform(-3, 3), rng.uniform(0.2, 2) * rng.choice([-1, 1]))
                  for _ in range(2))
        x = rng.standard_normal(N)
        r1 = resolvent_solve(T, ResolventQuery(z1, x))
        r2 = resolvent_solve(T, ResolventQuery(z2, x))
        r12 = resolvent_solve(T, ResolventQuery(z1, r2))
        lhs = r1 - r2
        scale = (normT + abs(z1) + abs(z2)) * np.linalg.norm(r12) + np.linalg.norm(r1) + np.linalg.norm(r2)
        assert np.linalg.norm(lhs - (z1 - z2) * r12) <= 100 * N * ulp(scale)


# ------------------------------------------------------ operational calculus

def test_opcalc_one_by_one():
    T = TruncatedOperator([[0.7]])
    fam = SpectralFamily.from_operator(T)
    assert operational_calculus_residual(fam, T, 0.3 + 1j, np.ones(1)) <= 2 * EPS


def test_opcalc_diagonal(rng):
    T = diag(1, 2, 3)
    fam = SpectralFamily.from_operator(T)
    x = rng.standard_normal(3)
    x /= np.linalg.norm(x)
    assert operational_calculus_residual(fam, T, 1j, x) <= 1e-12
    # closed form for the diagonal case
    via = stieltjes_apply(fam, lambda l: 1 / (l - 1j), (-INF, INF), x)
    np.testing.assert_allclose(via, x / (np.array([1, 2, 3]) - 1j), atol=4 * EPS)


def test_opcalc_orthogonal_invariance(rng):
    N = 30
    T = random_symmetric(rng, N, tridiagonal=True)
    Q, _ = np.linalg.qr(rng.standard_normal((N, N)))
    A = Q @ T.entries @ Q.T
    A = np.triu(A)
    TQ = TruncatedOperator(A + np.triu(A, 1).T)
    x = rng.standard_normal(N)
    x /= np.linalg.norm(x)
    z = 0.4 + 0.5j
    r1 = operational_calculus_residual(SpectralFamily.from_operator(T), T, z, x)
    r2 = operational_calculus_residual(SpectralFamily.from_operator(TQ), TQ, z, Q @ x)
    bound = 100 * N * ulp(1 / 0.5)
    assert r1 <= bound and r2 <= bound


@pytest.mark.parametrize("kind", [k.value for k in BUILTIN_KINDS])
def test_opcalc_contract_builtin(kind, rng):
    N = 200
    T = build_truncation(OperatorSpec(kind), N)
    fam = SpectralFamily.from_operator(T)
    for _ in range(10):
        im = 10 ** rng.uniform(-1, 1) * rng.choice([-1, 1])
        z = complex(rng.uniform(fam.eigenvalues[0], fam.eigenvalues[-1]), im)
        x = rng.standard_normal(N)
        x /= np.linalg.norm(x)
        assert operational_calculus_residual(fam, T, z, x) <= 100 * N * ulp(1 / abs(im))


# ------------------------------------------------------------------- Stone

def test_stone_single_point():
    # (1/pi)(arctan(b/eps) - arctan(a/eps)) = (2/pi) arctan(100) for a=-1, b=1, eps=0.01
    rec = stone_reconstruct(TruncatedOperator([[0.0]]), -1.0, 1.0, 0.01, np.ones(1))
    expected = 2 / math.pi * math.atan(100.0)
    assert expected == pytest.approx(0.993633, abs=2e-6)  # quoted to 6 digits, truncated
    assert rec.result[0] == pytest.approx(expected, abs=1e-8)
    assert rec.endpoint_distance == 1.0


def test_stone_spectrum_far_away():
    # Lorentzian tail bound (b - a) eps / (pi dist^2) with dist >= 10
    T = diag(-20.0, 15.0)
    x = np.array([0.6, 0.8])
    rec = stone_reconstruct(T, 0.0, 2.0, 0.05, x)
    assert np.linalg.norm(rec.result) <= 2 * 0.05 / (math.pi * 13 ** 2) * 1.01
    assert np.linalg.norm(rec.result) <= 0.04 * np.linalg.norm(x)


def test_stone_two_point():
    rec = stone_reconstruct(diag(1, 2), 0.5, 1.5, 1e-3, np.ones(2))
    assert np.linalg.norm(rec.result - [1, 0]) <= 2e-3
    # closed-form arctan per eigenvalue
    expected = smoothed_indicator([1.0, 2.0], 0.5, 1.5, 1e-3)
    np.testing.assert_allclose(rec.result, expected, atol=1e-8)


@pytest.mark.parametrize("kind", ["FreeJacobi", "HermitePosition", "DiscreteSchroedinger"])
def test_stone_matches_smoothed_kernel(kind, rng):
    N = 25
    T = build_truncation(OperatorSpec(kind), N)
    fam = SpectralFamily.from_operator(T)
    x = rng.standard_normal(N)
    a, b, eps = -0.731, 1.377, 0.05
    rec = stone_reconstruct(T, a, b, eps, x, refinement_tol=1e-10)
    oracle = stieltjes_apply(fam, lambda l: smoothed_indicator(l, a, b, eps), (-INF, INF), x)
    assert np.linalg.norm(rec.result - oracle) <= 1e-9


def test_stone_complex_input():
    T = diag(0.0, 3.0)
    x = np.array([1.0 + 2.0j, 1.0j])
    rec = stone_reconstruct(T, -1.0, 1.0, 0.01, x)
    np.testing.assert_allclose(rec.result, smoothed_indicator([0.0, 3.0], -1, 1, 0.01) * x, atol=1e-8)


def test_stone_argument_checks():
    T = diag(0.0)
    with pytest.raises(ValueError):
        stone_reconstruct(T, 1.0, -1.0, 0.1, np.ones(1))
    with pytest.raises(ValueError):
        stone_reconstruct(T, -1.0, 1.0, 0.0, np.ones(1))
    with pytest.raises(QuadratureError):
        stone_reconstruct(T, -1.0, 1.0, 1e-7, np.ones(1))
    with pytest.raises(QuadratureError):
        stone_reconstruct(T, -1.0, 1.0, 0.1, np.ones(1), refinement_tol=0.0)


def test_limit_study_single_point_halving():
    # err = 1 - (2/pi) arctan(1/eps) = (2/pi) eps + O(eps^3)
    T = diag(0.0)
    eps = [0.1 / 2 ** k for k in range(8)]
    st = stone_limit_study(T, -1.0, 1.0, np.ones(1), eps)
    closed = [1 - 2 / math.pi * math.atan(1 / e) for e in eps]
    np.testing.assert_allclose(st.errors, closed, atol=1e-9)
    assert st.rate_ok and st.monotone
    assert st.ratios[-1] == pytest.approx(0.5, abs=1e-3)


def test_limit_study_decade_spacing_is_normalized():
    st = stone_limit_study(diag(0.0), -1.0, 1.0, np.ones(1), [1e-1, 1e-2, 1e-3, 1e-4])
    assert st.ratios[-1] == pytest.approx(0.5, abs=1e-3)


def test_limit_study_empty_and_full():
    T = build_truncation(OperatorSpec("FreeJacobi"), 6)
    x = np.random.default_rng(0).standard_normal(6)
    eps = [0.02 / 2 ** k for k in range(5)]
    below = stone_limit_study(T, -5.0, -3.0, x, eps)
    full = stone_limit_study(T, -3.0, 3.0, x, eps)
    assert below.monotone and full.monotone
    assert below.errors[-1] < 1e-3 and full.errors[-1] < 1e-3
    assert below.rate_ok and full.rate_ok
    rec = stone_reconstruct(T, -3.0, 3.0, eps[-1], x)
    np.testing.assert_allclose(rec.result, x, atol=1e-3)


def test_limit_study_endpoint_guard():
    with pytest.raises(EndpointError):
        stone_limit_study(diag(1.0, 2.0), 1.0, 1.5, np.ones(2), [0.1, 0.05])
    with pytest.raises(ValueError):
        stone_limit_study(diag(1.0, 2.0), 0.0, 1.5, np.ones(2), [0.05, 0.1])


@pytest.mark.parametrize("kind", [k.value for k in BUILTIN_KINDS])
def test_stone_error_monotone_below_quarter_distance(kind):
    N = 12
    T = build_truncation(OperatorSpec(kind), N)
    fam = SpectralFamily.from_operator(T)
    lam = fam.eigenvalues
    a = 0.5 * (lam[2] + lam[3])
    b = 0.5 * (lam[6] + lam[7])
    x = np.ones(N)
    dist = min(np.abs(lam - a).min(), np.abs(lam - b).min())
    eps = [dist / 4 / 2 ** k for k in range(5)]
    st = stone_limit_study(T, a, b, x, eps, eta=dist / 2, fam=fam)
    assert st.monotone
