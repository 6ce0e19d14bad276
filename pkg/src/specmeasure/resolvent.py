"""Resolvents, the operational calculus check, and Stone's formula.

Stone's formula recovers ``(F(b) - F(a)) x`` as the ``eps -> 0`` limit of

    (1 / 2 pi i) int_a^b [R(mu + i eps) - R(mu - i eps)] x dmu,

evaluated here by composite Simpson quadrature with panel doubling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eigen import eigendecompose
from .family import SpectralFamily, stieltjes_apply
from .operators import TruncatedOperator

__all__ = [
    "ResolventQuery",
    "ResolventError",
    "SolveBreakdownError",
    "QuadratureError",
    "EndpointError",
    "StoneReconstruction",
    "StoneStudy",
    "resolvent_solve",
    "shifted_solves",
    "operational_calculus_residual",
    "stone_reconstruct",
    "stone_limit_study",
    "smoothed_indicator",
]

MAX_PANELS = 2 ** 20
# bound on N * (points per batch) for the batched shifted solves
_BATCH_ELEMENTS = 2 ** 22


class ResolventError(ValueError):
    """Real shift passed where a nonreal one is required."""


class SolveBreakdownError(RuntimeError):
    """A shifted solve produced non-finite values (cannot happen for Im z != 0)."""


class QuadratureError(RuntimeError):
    pass


class EndpointError(ValueError):
    """Interval endpoint too close to the spectrum."""


@dataclass(frozen=True)
class ResolventQuery:
    z: complex
    x: np.ndarray

    def __post_init__(self):
        z = complex(self.z)
        if not z.imag != 0:
            raise ResolventError(f"shift must be nonreal, got z = {z}")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "x", np.asarray(self.x))


def shifted_solves(T: TruncatedOperator, zs, x) -> np.ndarray:
    """Solve ``(T - z I) y = x`` for every shift in ``zs``.

    Returns an array of shape ``(len(zs), N)``. Tridiagonal sections use
    an unpivoted LU sweep vectorized over the shifts; pivots keep an
    imaginary part of at least ``|Im z|`` so the sweep cannot break down.
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    x = np.asarray(x)
    N = T.dim
    if x.shape != (N,):
        raise ValueError(f"vector of length {N} expected, got shape {x.shape}")
    if np.any(zs.imag == 0):
        raise ResolventError("shift must be nonreal")
    A = T.entries
    if not T.is_tridiagonal:
        out = np.empty((zs.size, N), dtype=complex)
        for k, z in enumerate(zs):
            out[k] = np.linalg.solve(A - z * np.eye(N), x)
        return out

    d = np.diag(A)
    e = np.diag(A, 1)
    M = zs.size
    cp = np.empty((N, M), dtype=complex)
    yp = np.empty((N, M), dtype=complex)
    piv = d[0] - zs
    yp[0] = x[0] / piv
    if N > 1:
        cp[0] = e[0] / piv
    for i in range(1, N):
        piv = d[i] - zs - e[i - 1] * cp[i - 1]
        yp[i] = (x[i] - e[i - 1] * yp[i - 1]) / piv
        if i < N - 1:
            cp[i] = e[i] / piv
    for i in range(N - 2, -1, -1):
        yp[i] -= cp[i] * yp[i + 1]
    if not np.all(np.isfinite(yp)):
        raise SolveBreakdownError("shifted tridiagonal solve broke down")
    return yp.T


def resolvent_solve(T: TruncatedOperator, q: ResolventQuery) -> np.ndarray:
    """``(T - z)^{-1} x``."""
    return shifted_solves(T, [q.z], q.x)[0]


def operational_calculus_residual(fam: SpectralFamily, T: TruncatedOperator, z, x) -> float:
    """Distance between ``int 1/(lam - z) dF x`` and a direct resolvent solve."""
    q = ResolventQuery(z, x)
    via_family = stieltjes_apply(fam, lambda lam: 1.0 / (lam - q.z), (-math.inf, math.inf), q.x)
    return float(np.linalg.norm(via_family - resolvent_solve(T, q)))


def smoothed_indicator(lam, a: float, b: float, epsilon: float):
    """Exact ``eps``-smoothed kernel ``(arctan((b-lam)/eps) - arctan((a-lam)/eps)) / pi``."""
    lam = np.asarray(lam, dtype=float)
    return (np.arctan((b - lam) / epsilon) - np.arctan((a - lam) / epsilon)) / np.pi


@dataclass(frozen=True)
class StoneReconstruction:
    a: float
    b: float
    epsilon: float
    quadrature_panels: int
    result: np.ndarray
    endpoint_distance: float
    quadrature_change: float


def _stone_integrand(T, mus, epsilon, x, real_input):
    plus = shifted_solves(T, mus + 1j * epsilon, x)
    if real_input:
        return plus.imag / np.pi
    minus = shifted_solves(T, mus - 1j * epsilon, x)
    return (plus - minus) / (2j * np.pi)


def _sum_points(T, mus, epsilon, x, real_input):
    N = T.dim
    batch = max(1, _BATCH_ELEMENTS // max(N, 1))
    acc = None
    for s in range(0, mus.size, batch):
        part = _stone_integrand(T, mus[s:s + batch], epsilon, x, real_input).sum(axis=0)
        acc = part if acc is None else acc + part
    return acc


def _endpoint_distance(T, a, b, eigenvalues=None):
    if eigenvalues is None:
        eigenvalues = eigendecompose(T, compute_vectors=False).eigenvalues
    lam = np.asarray(eigenvalues)
    return float(min(np.abs(lam - a).min(), np.abs(lam - b).min()))


def stone_reconstruct(T: TruncatedOperator, a: float, b: float, epsilon: float, x,
                      refinement_tol: float = 1e-8, eigenvalues=None) -> StoneReconstruction:
    """Quadrature approximation of Stone's formula at fixed ``epsilon``.

    Composite Simpson on panels of initial width ``min(eps/4, (b-a)/16)``;
    the panel count doubles until two successive results differ (in norm)
    by less than ``refinement_tol``. Old nodes are reused on each doubling.
    """
    if not a < b:
        raise ValueError(f"need a < b, got a = {a}, b = {b}")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    x = np.asarray(x)
    if x.shape != (T.dim,):
        raise ValueError(f"vector of length {T.dim} expected, got shape {x.shape}")
    real_input = not np.iscomplexobj(x)
    width = b - a
    panels = max(1, math.ceil(width / min(epsilon / 4, width / 16)))
    if panels > MAX_PANELS:
        raise QuadratureError(f"initial panel count {panels} exceeds cap {MAX_PANELS}")

    def nodes(n):
        return a + width * np.arange(n + 1) / n

    grid = nodes(panels)
    ends = _sum_points(T, grid[[0, -1]], epsilon, x, real_input)
    interior = _sum_points(T, grid[1:-1], epsilon, x, real_input) if panels > 1 else 0.0 * ends
    mids = _sum_points(T, (grid[:-1] + grid[1:]) / 2, epsilon, x, real_input)
    H = width / panels
    current = H / 6 * (ends + 2 * interior + 4 * mids)
    change = math.inf
    while True:
        if 2 * panels > MAX_PANELS:
            raise QuadratureError(
                f"Simpson refinement did not reach tol {refinement_tol} within {MAX_PANELS} panels "
                f"(last change {change:.3g})"
            )
        interior = interior + mids
        panels *= 2
        grid = nodes(panels)
        mids = _sum_points(T, (grid[:-1] + grid[1:]) / 2, epsilon, x, real_input)
        H = width / panels
        refined = H / 6 * (ends + 2 * interior + 4 * mids)
        change = float(np.linalg.norm(refined - current))
        current = refined
        if change < refinement_tol:
            break
    return StoneReconstruction(float(a), float(b), float(epsilon), panels, current,
                               _endpoint_distance(T, a, b, eigenvalues), change)


@dataclass(frozen=True)
class StoneStudy:
    a: float
    b: float
    eta: float
    endpoint_distance: float
    epsilons: list[float]
    errors: list[float]
    ratios: list[float]
    panels: list[int]

    @property
    def rate_ok(self) -> bool:
        """Last three halving-normalized ratios lie in ``[0.3, 0.7]``."""
        tail = [r for r in self.ratios if not math.isnan(r)][-3:]
        return len(tail) == 3 and all(0.3 <= r <= 0.7 for r in tail)

    @property
    def monotone(self) -> bool:
        return all(e2 <= e1 for e1, e2 in zip(self.errors, self.errors[1:]))

    def rows(self):
        return list(zip(self.epsilons, self.errors, self.ratios))


def stone_limit_study(T: TruncatedOperator, a: float, b: float, x, epsilons,
                      eta: float = 1e-3, refinement_tol: float = 1e-10,
                      fam: SpectralFamily | None = None) -> StoneStudy:
    """Error of Stone reconstructions against ``(F(b) - F(a)) x`` as ``eps`` shrinks.

    ``ratios[k]`` is ``err_k / err_{k-1}`` rescaled to a halving step,
    ``(err_k / err_{k-1}) ** (log 2 / log(eps_{k-1} / eps_k))``; an
    ``O(eps)`` error gives ``0.5`` whatever the spacing of ``epsilons``.
    """
    eps = [float(e) for e in epsilons]
    if not eps or any(e <= 0 for e in eps) or any(e2 >= e1 for e1, e2 in zip(eps, eps[1:])):
        raise ValueError("epsilons must be positive and strictly descending")
    if fam is None:
        fam = SpectralFamily.from_operator(T)
    dist = _endpoint_distance(T, a, b, fam.eigenvalues)
    if dist < eta:
        raise EndpointError(
            f"interval endpoint within {dist:.3g} of the spectrum (eta = {eta:.3g}); "
            "Stone's formula is only checked at continuity points"
        )
    exact = stieltjes_apply(fam, np.ones_like, (a, b), x)
    errors, ratios, panels = [], [], []
    for k, e in enumerate(eps):
        rec = stone_reconstruct(T, a, b, e, x, refinement_tol, fam.eigenvalues)
        err = float(np.linalg.norm(rec.result - exact))
        if k == 0 or errors[-1] == 0 or err == 0:
            ratio = math.nan
        else:
            ratio = (err / errors[-1]) ** (math.log(2) / math.log(eps[k - 1] / e))
        errors.append(err)
        ratios.append(ratio)
        panels.append(rec.quadrature_panels)
    return StoneStudy(float(a), float(b), float(eta), dist, eps, errors, ratios, panels)
