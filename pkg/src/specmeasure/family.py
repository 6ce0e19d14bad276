"""Projection-valued step functions built from an eigendecomposition.

``F(lam) = sum of cluster projections P_c with representative <= lam``.
Every integral here is over a half-open interval ``(a, b]`` so that
adjacent intervals add up exactly.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .eigen import EigenDecomposition, cluster_eigenvalues, eigendecompose
from .operators import TruncatedOperator

__all__ = [
    "SpectralFamily",
    "SpectralCDF",
    "TailReport",
    "apply_F",
    "cdf",
    "stieltjes_apply",
    "riemann_stieltjes_sum",
    "polarization_measure",
    "tail_report",
]

EPS = np.finfo(float).eps


def _identity(lam):
    return lam


class SpectralFamily:
    """``F(lam)`` for one finite section.

    Cluster representatives are the plain mean of the clustered eigenvalues
    (each eigenvector carries unit trace weight).
    """

    def __init__(self, decomposition: EigenDecomposition, tau: float | None = None,
                 operator: TruncatedOperator | None = None):
        if decomposition.eigenvectors is None:
            raise ValueError("a spectral family needs eigenvectors")
        self.decomposition = decomposition
        self.clusters = cluster_eigenvalues(decomposition, tau)
        self.operator = operator
        lam = decomposition.eigenvalues
        self.representatives = np.array([lam[c.start:c.stop].mean() for c in self.clusters])
        # cluster index of each eigenvalue and first eigen-index of each cluster
        self._cluster_of = np.repeat(np.arange(len(self.clusters)),
                                     [len(c) for c in self.clusters])
        self._starts = np.array([c.start for c in self.clusters] + [self.dim])
        self._rep_per_eig = self.representatives[self._cluster_of]

    @classmethod
    def from_operator(cls, T: TruncatedOperator, tol: float | None = None,
                      tau: float | None = None) -> "SpectralFamily":
        return cls(eigendecompose(T, tol), tau, operator=T)

    @property
    def dim(self) -> int:
        return self.decomposition.dim

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.decomposition.eigenvalues

    @property
    def eigenvectors(self) -> np.ndarray:
        return self.decomposition.eigenvectors

    @property
    def spectral_radius(self) -> float:
        return float(np.abs(self.eigenvalues).max())

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.ndim != 1 or x.shape[0] != self.dim:
            raise ValueError(f"vector of length {self.dim} expected, got shape {x.shape}")
        return x

    def coefficients(self, x) -> np.ndarray:
        """Coordinates of ``x`` in the eigenbasis."""
        return self.eigenvectors.T @ self._check(x)

    def count_at_most(self, lam) -> np.ndarray:
        """Number of eigen-indices whose cluster representative is ``<= lam``."""
        k = np.searchsorted(self.representatives, lam, side="right")
        return self._starts[k]

    def _combine(self, weights, coeffs):
        return self.eigenvectors @ (weights * coeffs)

    def cluster_projection(self, c: int, x) -> np.ndarray:
        sl = slice(self.clusters[c].start, self.clusters[c].stop)
        V = self.eigenvectors[:, sl]
        return V @ (V.T @ self._check(x))


def apply_F(fam: SpectralFamily, lam: float, x) -> np.ndarray:
    """``F(lam) x``."""
    coeffs = fam.coefficients(x)
    k = int(fam.count_at_most(lam))
    V = fam.eigenvectors
    return V[:, :k] @ coeffs[:k]


@dataclass(frozen=True)
class SpectralCDF:
    """Step function ``lam -> (F(lam) x, x)``."""

    jump_locations: np.ndarray
    jump_masses: np.ndarray
    total: float

    def __call__(self, lam):
        cum = np.concatenate(([0.0], np.cumsum(self.jump_masses)))
        out = cum[np.searchsorted(self.jump_locations, lam, side="right")]
        return out if np.ndim(lam) else float(out)

    @property
    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.jump_masses)

    def to_rows(self):
        return list(zip(self.jump_locations.tolist(), self.jump_masses.tolist(),
                        self.cumulative.tolist()))

    def to_json_record(self) -> dict:
        return {
            "jumps": [{"lambda": float(l), "mass": float(m)}
                      for l, m in zip(self.jump_locations, self.jump_masses)],
            "total": float(self.total),
        }

    def to_csv(self) -> str:
        from .io import format_csv
        return format_csv(["lambda", "mass", "cumulative"], self.to_rows())

    def to_json(self) -> str:
        return json.dumps(self.to_json_record(), indent=2, sort_keys=True)


def cdf(fam: SpectralFamily, x) -> SpectralCDF:
    """Scalar spectral measure of ``x`` as a step function."""
    x = fam._check(x)
    sq = np.abs(fam.coefficients(x)) ** 2
    masses = np.add.reduceat(sq, fam._starts[:-1]) if fam.dim else sq
    total = float(np.vdot(x, x).real)
    return SpectralCDF(fam.representatives.copy(), masses, total)


def _weights(fam: SpectralFamily, g: Callable, a: float, b: float) -> np.ndarray:
    reps = fam.representatives
    sel = (reps > a) & (reps <= b)
    vals = np.asarray(g(reps[sel])) if sel.any() else np.zeros(0)
    if vals.shape != (int(sel.sum()),):
        vals = np.array([g(float(r)) for r in reps[sel]])
    if not np.all(np.isfinite(vals)):
        bad = reps[sel][~np.isfinite(vals)][0]
        raise ValueError(f"integrand is not finite at eigenvalue {bad!r}")
    gv = np.zeros(len(reps), dtype=np.result_type(vals.dtype, float))
    gv[sel] = vals
    return gv[fam._cluster_of]


def stieltjes_apply(fam: SpectralFamily, g: Callable, interval, x) -> np.ndarray:
    """``int_(a,b] g(lam) dF(lam) x``; endpoints may be infinite.

    ``g`` is called with an array of cluster representatives.
    """
    a, b = interval
    if not a < b:
        raise ValueError(f"empty interval ({a}, {b}]")
    coeffs = fam.coefficients(x)
    return fam._combine(_weights(fam, g, a, b), coeffs)


def riemann_stieltjes_sum(fam: SpectralFamily, x, partition) -> np.ndarray:
    """``sum_k a_k (F(a_k) - F(a_{k-1})) x`` with right-endpoint tags."""
    p = np.asarray(partition, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise ValueError("partition needs at least two points")
    if np.any(np.diff(p) <= 0):
        raise ValueError("partition must be strictly increasing")
    coeffs = fam.coefficients(x)
    reps = fam._rep_per_eig
    k = np.searchsorted(p, reps, side="left")
    inside = (reps > p[0]) & (reps <= p[-1])
    tags = np.where(inside, p[np.minimum(k, p.size - 1)], 0.0)
    return fam._combine(tags, coeffs)


def _diagonal_measure(fam, w, u):
    c = fam.coefficients(u)
    return np.sum(w * np.abs(c) ** 2)


def polarization_measure(fam: SpectralFamily, x, y, interval=(-math.inf, math.inf),
                         g: Callable = _identity) -> complex:
    """``int_(a,b] g(lam) d(F(lam) x, y)`` from four diagonal measures.

    Uses ``(u, v) = 1/4 sum_k i^k ||u + i^k v||^2`` with the inner product
    linear in its first slot.
    """
    x = fam._check(x)
    y = fam._check(y)
    a, b = interval
    w = _weights(fam, g, a, b)
    total = 0j
    for k in range(4):
        ik = 1j ** k
        total += ik * _diagonal_measure(fam, w, x + ik * y)
    return total / 4


def direct_cross_measure(fam: SpectralFamily, x, y, interval=(-math.inf, math.inf),
                         g: Callable = _identity) -> complex:
    """Cluster-sum form ``sum_c g(lam_c) (P_c x, y)`` of the same quantity."""
    a, b = interval
    w = _weights(fam, g, a, b)
    cx = fam.coefficients(x)
    cy = fam.coefficients(y)
    return complex(np.sum(w * cx * np.conj(cy)))


@dataclass(frozen=True)
class TailReport:
    K: float
    lhs: float
    second_moment: float
    left_moment: float
    right_moment: float
    slack: float
    bound_satisfied: bool

    @property
    def tail_first_moment(self) -> float:
        return self.left_moment + self.right_moment


def tail_report(fam: SpectralFamily, x, K: float) -> TailReport:
    """Certificate for ``||Tx||^2 >= K |int_{|lam| >= K} lam d(Fx, x)|``.

    ``lhs`` is ``||Tx||^2`` from the stored operator when available. The left
    tail is ``(-inf, -K]`` and the right tail ``(K, inf)``. A ``False``
    verdict means a bug, not a property of the input.
    """
    if not K > 0:
        raise ValueError("K must be positive")
    x = fam._check(x)
    c = fam.coefficients(x)
    mass = np.abs(c) ** 2
    reps = fam._rep_per_eig
    second = float(np.sum(reps ** 2 * mass))
    if fam.operator is not None:
        Tx = fam.operator.matvec(x)
        lhs = float(np.vdot(Tx, Tx).real)
    else:
        lhs = second
    left = abs(float(np.sum((reps * mass)[reps <= -K])))
    right = abs(float(np.sum((reps * mass)[reps > K])))
    slack = 64 * fam.dim * EPS * (lhs + K * (left + right))
    ok = lhs >= K * left - slack and lhs >= K * right - slack
    return TailReport(float(K), lhs, second, left, right, slack, bool(ok))
