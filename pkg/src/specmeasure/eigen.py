"""Symmetric eigensolver: Householder tridiagonalization + implicit QL.

The QL kernel follows the classic ``tqli`` scheme with a Wilkinson shift
taken from the leading 2x2 block. Eigenvectors are accumulated in
transposed storage so each plane rotation touches two contiguous rows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .operators import TruncatedOperator

__all__ = [
    "EigenDecomposition",
    "EigenConvergenceError",
    "eigendecompose",
    "householder_tridiagonalize",
    "tridiagonal_ql",
    "cluster_eigenvalues",
    "default_cluster_tol",
]

EPS = np.finfo(float).eps
MAX_SWEEPS = 50


class EigenConvergenceError(RuntimeError):
    """QL iteration exceeded its sweep cap.

    ``index`` is the position of the off-diagonal element that refused to
    deflate.
    """

    def __init__(self, index: int, sweeps: int = MAX_SWEEPS):
        super().__init__(
            f"QL iteration exceeded {sweeps} sweeps; "
            f"off-diagonal element {index} did not deflate"
        )
        self.index = index


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None  # column k pairs with eigenvalues[k]
    residual_bound: float = field(default=float("nan"))

    @property
    def dim(self) -> int:
        return len(self.eigenvalues)

    def orthonormality_defect(self) -> float:
        V = self.eigenvectors
        return float(np.abs(V.T @ V - np.eye(self.dim)).max())

    def reconstruction_defect(self, T: TruncatedOperator) -> float:
        V = self.eigenvectors
        return float(np.abs((V * self.eigenvalues) @ V.T - T.entries).max())


def householder_tridiagonalize(a):
    """Reduce a real symmetric matrix to tridiagonal form.

    Returns ``(d, e, Q)`` with ``a = Q @ tri(d, e) @ Q.T``; ``e`` has length
    ``n - 1``.
    """
    A = np.array(a, dtype=float, copy=True)
    n = A.shape[0]
    Q = np.eye(n)
    for k in range(n - 2):
        x = A[k + 1:, k]
        tail = np.linalg.norm(x[1:])
        if tail == 0.0:
            continue
        xnorm = math.hypot(x[0], tail)
        alpha = -math.copysign(xnorm, x[0])
        v = x.copy()
        v[0] -= alpha
        v /= np.linalg.norm(v)

        sub = A[k + 1:, k + 1:]
        p = sub @ v
        w = p - (v @ p) * v
        sub -= 2.0 * (np.outer(v, w) + np.outer(w, v))
        A[k + 1, k] = A[k, k + 1] = alpha
        A[k + 2:, k] = 0.0
        A[k, k + 2:] = 0.0

        Qs = Q[:, k + 1:]
        Qs -= 2.0 * np.outer(Qs @ v, v)
    return np.diag(A).copy(), np.diag(A, 1).copy(), Q


@njit(cache=True)
def _tql(d, e, zt, want_vectors, tol, max_sweeps):
    # d, e modified in place; e[i] couples i and i+1, e[n-1] == 0.
    # Returns -1 on success or the index of a stuck off-diagonal.
    n = d.shape[0]
    tiny = 2.2250738585072014e-308
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= tol * dd or abs(e[m]) <= tiny:
                    break
                m += 1
            if m == l:
                break
            if it == max_sweeps:
                return l
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            i = m - 1
            underflow = False
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                if want_vectors:
                    for k in range(zt.shape[1]):
                        f = zt[i + 1, k]
                        zt[i + 1, k] = s * zt[i, k] + c * f
                        zt[i, k] = c * zt[i, k] - s * f
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return -1


def tridiagonal_ql(d, e, Z=None, tol: float | None = None, max_sweeps: int = MAX_SWEEPS):
    """Eigenvalues (unsorted) of the tridiagonal ``(d, e)`` by implicit QL.

    If ``Z`` is given it is post-multiplied by the accumulated rotations and
    returned; pass the identity to get eigenvectors of the tridiagonal itself.
    """
    n = len(d)
    dw = np.array(d, dtype=float)
    ew = np.zeros(n)
    ew[: n - 1] = e
    want = Z is not None
    zt = np.ascontiguousarray(np.asarray(Z, dtype=float).T) if want else np.zeros((1, 1))
    stuck = _tql(dw, ew, zt, want, EPS if tol is None else float(tol), max_sweeps)
    if stuck >= 0:
        raise EigenConvergenceError(int(stuck), max_sweeps)
    return dw, (zt.T if want else None)


def _fix_signs(V):
    n = V.shape[0]
    thresh = n * EPS
    for k in range(V.shape[1]):
        col = V[:, k]
        idx = np.flatnonzero(np.abs(col) > thresh * np.abs(col).max())
        if idx.size and col[idx[0]] < 0:
            V[:, k] = -col
    return V


def eigendecompose(T: TruncatedOperator, tol: float | None = None,
                   compute_vectors: bool = True) -> EigenDecomposition:
    """Ascending eigenvalues and an orthonormal eigenbasis of ``T``.

    ``tol`` is the relative deflation threshold for off-diagonals
    (``|e_i| <= tol * (|d_i| + |d_{i+1}|)``); ``None`` means machine epsilon.
    Raises :class:`EigenConvergenceError` if the sweep cap is hit.
    """
    if tol is not None and not tol > 0:
        raise ValueError("tol must be positive (or None for the default)")
    A = T.entries
    n = T.dim
    if T.is_tridiagonal:
        d, e = np.diag(A).copy(), np.diag(A, 1).copy()
        Q = np.eye(n) if compute_vectors else None
    else:
        d, e, Q = householder_tridiagonalize(A)
        if not compute_vectors:
            Q = None
    lam, V = tridiagonal_ql(d, e, Q, tol)

    order = np.argsort(lam, kind="stable")
    lam = lam[order]
    if not compute_vectors:
        return EigenDecomposition(lam, None)
    V = _fix_signs(np.ascontiguousarray(V[:, order]))
    resid = np.linalg.norm(A @ V - V * lam, axis=0)
    return EigenDecomposition(lam, V, float(resid.max()) if n else 0.0)


def default_cluster_tol(eigenvalues) -> float:
    """100 * N * ulp(spectral radius)."""
    lam = np.asarray(eigenvalues)
    radius = float(np.abs(lam).max()) if lam.size else 0.0
    return 100.0 * lam.size * float(np.spacing(radius))


def cluster_eigenvalues(d: EigenDecomposition, tau: float | None = None) -> list[range]:
    """Group ascending eigenvalues into contiguous index ranges.

    A new cluster starts wherever the gap to the previous eigenvalue exceeds
    ``tau``. Within a cluster every adjacent gap is ``<= tau``, so the spread
    of a cluster of size ``m`` is at most ``(m - 1) * tau``.
    """
    lam = d.eigenvalues
    if tau is None:
        tau = default_cluster_tol(lam)
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if lam.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(lam) > tau) + 1
    edges = np.concatenate(([0], breaks, [lam.size]))
    return [range(int(s), int(t)) for s, t in zip(edges[:-1], edges[1:])]
