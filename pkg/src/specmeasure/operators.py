"""Self-adjoint operator families and their nested finite sections.

Every family is described by an :class:`OperatorSpec`; ``build_truncation``
returns the compression onto the span of the first ``N`` canonical basis
vectors. Entries depend only on their row/column index, so the ``N x N``
section is always the leading block of the ``(N+1) x (N+1)`` one.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

__all__ = [
    "Kind",
    "OperatorError",
    "OperatorSpec",
    "TruncatedOperator",
    "DomainProbe",
    "MembershipReport",
    "build_truncation",
    "load_user_matrix",
    "domain_membership_report",
]


class OperatorError(ValueError):
    """Invalid operator description or user matrix."""


class Kind(str, Enum):
    FREE_JACOBI = "FreeJacobi"
    HERMITE_POSITION = "HermitePosition"
    DIAGONAL_UNBOUNDED = "DiagonalUnbounded"
    DISCRETE_SCHROEDINGER = "DiscreteSchroedinger"
    USER_MATRIX = "UserMatrix"


BUILTIN_KINDS = (
    Kind.FREE_JACOBI,
    Kind.HERMITE_POSITION,
    Kind.DIAGONAL_UNBOUNDED,
    Kind.DISCRETE_SCHROEDINGER,
)

DEFAULT_POTENTIAL = (0.0, 0.0, 0.01)


@dataclass(frozen=True)
class OperatorSpec:
    """Declarative operator family.

    Parameters by kind:

    * ``DiagonalUnbounded``: ``rate`` (diagonal entries ``rate * n``).
    * ``DiscreteSchroedinger``: ``potential``, polynomial coefficients
      ``c_0, c_1, ...`` of ``V(n) = sum c_k n**k``; the diagonal is
      ``2 + V(n)`` and the off-diagonal is ``-1``.
    * ``UserMatrix``: ``path`` to a CSV file, or ``matrix`` given inline.
    """

    kind: Kind
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", Kind(self.kind))
        except ValueError:
            raise OperatorError(f"unknown operator kind {self.kind!r}") from None

    @classmethod
    def from_dict(cls, block: Mapping[str, Any]) -> "OperatorSpec":
        block = dict(block)
        kind = block.pop("kind", None)
        if kind is None:
            raise OperatorError("operator block needs a 'kind'")
        params = block.pop("params", {})
        params = {**params, **block}
        return cls(kind, params)

    def to_dict(self) -> dict:
        params = {k: (np.asarray(v).tolist() if isinstance(v, np.ndarray) else v)
                  for k, v in self.params.items()}
        return {"kind": self.kind.value, "params": params}

    def max_dim(self) -> int | None:
        if self.kind is Kind.USER_MATRIX:
            return self.user_matrix().shape[0]
        return None

    def user_matrix(self) -> np.ndarray:
        if "matrix" in self.params:
            return _validate_square_symmetric(np.asarray(self.params["matrix"], dtype=float))
        if "path" not in self.params:
            raise OperatorError("UserMatrix needs a 'path' or 'matrix' parameter")
        return load_user_matrix(self.params["path"])


@dataclass(frozen=True, eq=False)
class TruncatedOperator:
    """An ``N x N`` real symmetric finite section."""

    entries: np.ndarray
    banded_hint: int | None = None

    def __post_init__(self):
        A = np.array(self.entries, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise OperatorError(f"finite section must be square and nonempty, got shape {A.shape}")
        _check_exact_symmetry(A)
        A.setflags(write=False)
        object.__setattr__(self, "entries", A)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def is_tridiagonal(self) -> bool:
        if self.banded_hint is not None:
            return self.banded_hint <= 1
        return not np.any(np.triu(self.entries, 2))

    def norm(self) -> float:
        """Spectral norm bound ``max_i sum_j |T_ij|`` (exact for diagonals)."""
        return float(np.abs(self.entries).sum(axis=1).max())

    def matvec(self, x):
        return self.entries @ x


def _check_exact_symmetry(A):
    bad = np.argwhere(A != A.T)
    if bad.size:
        i, j = (int(v) for v in bad[0])
        raise OperatorError(
            f"matrix is not symmetric: entry ({i}, {j}) = {A[i, j]!r} "
            f"but ({j}, {i}) = {A[j, i]!r}"
        )


def _validate_square_symmetric(A):
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise OperatorError(f"user matrix must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise OperatorError("user matrix has non-finite entries")
    _check_exact_symmetry(A)
    return A


def load_user_matrix(path) -> np.ndarray:
    """Read a square CSV of decimal floats and reject any asymmetry."""
    path = Path(path)
    if not path.is_file():
        raise OperatorError(f"user matrix file not found: {path}")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    try:
        A = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise OperatorError(f"{path}: {exc}") from None
    if A.ndim != 2:
        raise OperatorError(f"{path}: rows have unequal lengths")
    return _validate_square_symmetric(A)


def _tridiagonal(diag, off) -> np.ndarray:
    n = len(diag)
    A = np.diag(np.asarray(diag, dtype=float))
    if n > 1:
        idx = np.arange(n - 1)
        A[idx, idx + 1] = off
        A[idx + 1, idx] = off
    return A


def build_truncation(spec: OperatorSpec, N: int) -> TruncatedOperator:
    """Finite section of ``spec`` on the first ``N`` basis vectors."""
    if int(N) != N or N < 1:
        raise OperatorError(f"truncation dimension must be a positive integer, got {N!r}")
    N = int(N)
    n = np.arange(1, N + 1, dtype=float)
    kind = spec.kind
    if kind is Kind.FREE_JACOBI:
        return TruncatedOperator(_tridiagonal(np.zeros(N), np.ones(N - 1)), 1)
    if kind is Kind.HERMITE_POSITION:
        return TruncatedOperator(_tridiagonal(np.zeros(N), np.sqrt(n[:-1] / 2.0)), 1)
    if kind is Kind.DIAGONAL_UNBOUNDED:
        rate = float(spec.params.get("rate", 1.0))
        return TruncatedOperator(np.diag(rate * n), 0)
    if kind is Kind.DISCRETE_SCHROEDINGER:
        coeffs = spec.params.get("potential", DEFAULT_POTENTIAL)
        V = np.polynomial.polynomial.polyval(n, np.asarray(coeffs, dtype=float))
        return TruncatedOperator(_tridiagonal(2.0 + V, -np.ones(N - 1)), 1)
    if kind is Kind.USER_MATRIX:
        A = spec.user_matrix()
        if N > A.shape[0]:
            raise OperatorError(f"N = {N} exceeds user matrix size {A.shape[0]}")
        return TruncatedOperator(A[:N, :N].copy())
    raise OperatorError(f"unknown operator kind {kind!r}")  # pragma: no cover


@dataclass(frozen=True)
class DomainProbe:
    """Rule producing the first ``N`` coordinates of a fixed vector.

    Rules: ``{"kind": "basis", "index": k}`` (1-based ``e_k``),
    ``{"kind": "power", "exponent": p}`` (``c_n = n**-p``) and
    ``{"kind": "explicit", "values": [...]}`` (zero-padded).
    """

    coefficients: Mapping[str, Any]
    label: str = ""

    def __post_init__(self):
        rule = dict(self.coefficients)
        kind = rule.get("kind")
        if kind == "basis":
            if int(rule.get("index", 0)) < 1:
                raise OperatorError("basis probe index is 1-based and must be >= 1")
        elif kind == "power":
            if not math.isfinite(float(rule.get("exponent", float("nan")))):
                raise OperatorError("power probe needs a finite 'exponent'")
        elif kind == "explicit":
            vals = np.asarray(rule.get("values", []), dtype=float)
            if not vals.size or not np.any(vals) or not np.all(np.isfinite(vals)):
                raise OperatorError("explicit probe needs finite values, not all zero")
        else:
            raise OperatorError(f"unknown probe kind {kind!r}")
        if not self.label:
            object.__setattr__(self, "label", _default_label(rule))

    @classmethod
    def basis(cls, k: int) -> "DomainProbe":
        return cls({"kind": "basis", "index": k})

    @classmethod
    def power(cls, p: float) -> "DomainProbe":
        return cls({"kind": "power", "exponent": p})

    @classmethod
    def from_dict(cls, block: Mapping[str, Any]) -> "DomainProbe":
        block = dict(block)
        label = block.pop("label", "")
        return cls(block, label)

    def to_dict(self) -> dict:
        return {**dict(self.coefficients), "label": self.label}

    def vector(self, N: int) -> np.ndarray:
        rule = self.coefficients
        kind = rule["kind"]
        if kind == "basis":
            k = int(rule["index"])
            if k > N:
                raise OperatorError(f"probe e_{k} needs N >= {k}, got N = {N}")
            x = np.zeros(N)
            x[k - 1] = 1.0
            return x
        if kind == "power":
            return np.arange(1, N + 1, dtype=float) ** -float(rule["exponent"])
        vals = np.asarray(rule["values"], dtype=float)
        x = np.zeros(N)
        m = min(N, vals.size)
        x[:m] = vals[:m]
        if not np.any(x):
            raise OperatorError(f"explicit probe is zero in its first {N} coordinates")
        return x


def _default_label(rule):
    if rule["kind"] == "basis":
        return f"e{int(rule['index'])}"
    if rule["kind"] == "power":
        return f"n^-{rule['exponent']}"
    return "explicit"


@dataclass(frozen=True)
class MembershipReport:
    Ns: list[int]
    norms: list[float]
    verdict: str  # "bounded" or "growing"


def domain_membership_report(spec: OperatorSpec, probe: DomainProbe,
                             Ns: Sequence[int], rtol: float = 1e-2) -> MembershipReport:
    """Track ``||T_N x_N||`` over ascending ``Ns``.

    The verdict is ``"growing"`` when each of the last two steps increases
    the norm by more than ``rtol`` relatively; it is a heuristic, since no
    finite list of ``N`` can decide domain membership.
    """
    Ns = [int(N) for N in Ns]
    if len(Ns) < 3:
        raise ValueError("need at least three truncation sizes")
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise ValueError("Ns must be strictly ascending")
    norms = [float(np.linalg.norm(build_truncation(spec, N).matvec(probe.vector(N))))
             for N in Ns]
    a, b, c = norms[-3:]
    growing = c > (1 + rtol) * b and b > (1 + rtol) * a
    return MembershipReport(Ns, norms, "growing" if growing else "bounded")
