"""Convergence harness: finite-section CDFs as N grows and delta shrinks.

The limiting spectral family is approximated by ``F_N(lam + delta)``;
analytic oracles give the target measure where one is known.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy import integrate

from .family import SpectralFamily, cdf, tail_report
from .operators import DomainProbe, OperatorSpec, build_truncation, domain_membership_report

__all__ = [
    "Semicircle",
    "Gaussian",
    "PointMasses",
    "oracle_from_dict",
    "ConvergenceStudy",
    "CDFConvergenceReport",
    "LimitsReport",
    "run_cdf_convergence",
    "theorem_limits_check",
    "discontinuity_scan",
    "family_sequence",
]

COLLISION_SHIFT = 1e-9


@dataclass(frozen=True)
class Semicircle:
    """Semicircle law; the CDF integrates the density numerically."""

    center: float = 0.0
    radius: float = 2.0

    def density(self, lam: float) -> float:
        u = lam - self.center
        r = self.radius
        return 2.0 / (math.pi * r * r) * math.sqrt(max(r * r - u * u, 0.0))

    def cdf(self, lam):
        return np.vectorize(self._cdf_scalar, otypes=[float])(lam)

    @lru_cache(maxsize=4096)
    def _cdf_scalar(self, lam: float) -> float:
        lo = self.center - self.radius
        if lam <= lo:
            return 0.0
        if lam >= self.center + self.radius:
            return 1.0
        val, _ = integrate.quad(self.density, lo, lam, epsabs=1e-13, epsrel=1e-12, limit=200)
        return val

    def to_dict(self):
        return {"kind": "Semicircle", "center": self.center, "radius": self.radius}


@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    variance: float = 0.5

    def cdf(self, lam):
        s = math.sqrt(2.0 * self.variance)
        f = lambda t: 0.5 * math.erfc(-(t - self.mean) / s)  # noqa: E731
        return np.vectorize(f, otypes=[float])(lam)

    def tail(self, K: float) -> float:
        """Mass below ``mean - K`` (equal to the mass above ``mean + K``)."""
        return 0.5 * math.erfc(K / math.sqrt(2.0 * self.variance))

    def to_dict(self):
        return {"kind": "Gaussian", "mean": self.mean, "variance": self.variance}


@dataclass(frozen=True)
class PointMasses:
    atoms: tuple  # ((location, mass), ...)

    def cdf(self, lam):
        lam = np.asarray(lam, dtype=float)
        out = np.zeros(lam.shape)
        for loc, mass in self.atoms:
            out = out + np.where(lam >= loc, mass, 0.0)
        return out

    def to_dict(self):
        return {"kind": "PointMasses", "atoms": [list(a) for a in self.atoms]}


def oracle_from_dict(block: Mapping | None):
    if not block:
        return None
    block = dict(block)
    kind = block.pop("kind")
    if kind == "Semicircle":
        return Semicircle(**block)
    if kind == "Gaussian":
        return Gaussian(**block)
    if kind == "PointMasses":
        return PointMasses(tuple(tuple(map(float, a)) for a in block["atoms"]))
    raise ValueError(f"unknown oracle kind {kind!r}")


@dataclass(frozen=True)
class ConvergenceStudy:
    spec: OperatorSpec
    probe: DomainProbe
    Ns: Sequence[int]
    lambda_grid: Sequence[float]
    deltas: Sequence[float] = (0.0,)
    oracle: object = None
    atom_threshold: float = 0.05  # relative to ||x||^2

    def __post_init__(self):
        Ns = tuple(int(n) for n in self.Ns)
        grid = tuple(float(v) for v in self.lambda_grid)
        deltas = tuple(float(v) for v in self.deltas)
        if not Ns or not grid or not deltas:
            raise ValueError("Ns, lambda_grid and deltas must be nonempty")
        if any(b <= a for a, b in zip(Ns, Ns[1:])) or Ns[0] < 1:
            raise ValueError("Ns must be positive and strictly ascending")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("lambda_grid must be strictly ascending")
        if any(d < 0 for d in deltas) or any(b >= a for a, b in zip(deltas, deltas[1:])):
            raise ValueError("deltas must be nonnegative and strictly descending")
        object.__setattr__(self, "Ns", Ns)
        object.__setattr__(self, "lambda_grid", grid)
        object.__setattr__(self, "deltas", deltas)


def family_sequence(spec: OperatorSpec, Ns: Sequence[int], threads: int = 1) -> dict[int, SpectralFamily]:
    """One spectral family per truncation size, in the order of ``Ns``."""
    def build(N):
        return SpectralFamily.from_operator(build_truncation(spec, N))

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            fams = list(pool.map(build, Ns))
    else:
        fams = [build(N) for N in Ns]
    return dict(zip(Ns, fams))


def _nudge_grid(grid: np.ndarray, fam: SpectralFamily) -> np.ndarray:
    lam = fam.representatives
    idx = np.clip(np.searchsorted(lam, grid), 0, len(lam) - 1)
    near = np.minimum(np.abs(lam[idx] - grid), np.abs(lam[np.maximum(idx - 1, 0)] - grid))
    return np.where(near == 0.0, grid + COLLISION_SHIFT, grid)


def discontinuity_scan(families: Mapping[int, SpectralFamily], probe, grid,
                       threshold: float = 0.05, window: float | None = None) -> list[float]:
    """Grid points carrying a persistent atom.

    A point is flagged when, for every N, some single cluster within
    ``window`` of it carries mass above ``threshold * ||x_N||^2``. The
    default window is half the smallest grid spacing.
    """
    grid = np.asarray(grid, dtype=float)
    if len(families) < 2:
        raise ValueError("need at least two truncation sizes")
    if window is None:
        window = 0.5 * float(np.diff(grid).min()) if grid.size > 1 else 1e-9
    flagged = np.ones(grid.shape, dtype=bool)
    for N, fam in families.items():
        x = probe.vector(N) if isinstance(probe, DomainProbe) else probe[N]
        c = cdf(fam, x)
        if c.total == 0:
            return []
        heavy = c.jump_locations[c.jump_masses > threshold * c.total]
        if heavy.size == 0:
            return []
        dist = np.abs(grid[:, None] - heavy[None, :]).min(axis=1)
        flagged &= dist <= window
    return grid[flagged].tolist()


@dataclass
class CDFConvergenceReport:
    Ns: list[int]
    grid: list[float]
    deltas: list[float]
    cdf: dict = field(default_factory=dict)      # (N, delta) -> array over grid
    oracle: np.ndarray | None = None
    flagged: list[float] = field(default_factory=list)
    sup_distance: dict = field(default_factory=dict)     # (N, delta) -> float
    stabilization: dict = field(default_factory=dict)    # (N_i, N_next, delta) -> float
    delta_variation: dict = field(default_factory=dict)  # N -> max_delta |cdf - cdf(delta_min)|

    def rows(self):
        for N in self.Ns:
            for d in self.deltas:
                vals = self.cdf[(N, d)]
                for i, lam in enumerate(self.grid):
                    orc = float(self.oracle[i]) if self.oracle is not None else math.nan
                    err = abs(vals[i] - orc) if self.oracle is not None else math.nan
                    yield (N, lam, d, float(vals[i]), orc, err)

    def to_json_record(self) -> dict:
        per_n = {}
        for N in self.Ns:
            per_lambda = {}
            for i, lam in enumerate(self.grid):
                per_lambda[format(lam, ".17g")] = {
                    format(d, ".17g"): float(self.cdf[(N, d)][i]) for d in self.deltas
                }
            per_n[str(N)] = {
                "cdf": per_lambda,
                "sup_distance": {format(d, ".17g"): self.sup_distance.get((N, d)) for d in self.deltas},
                "delta_variation": self.delta_variation.get(N),
            }
        return {
            "per_N": per_n,
            "oracle": None if self.oracle is None else self.oracle.tolist(),
            "flagged": self.flagged,
            "stabilization": [
                {"N": a, "N_next": b, "delta": d, "max_diff": v}
                for (a, b, d), v in self.stabilization.items()
            ],
        }


def run_cdf_convergence(study: ConvergenceStudy, families: Mapping[int, SpectralFamily] | None = None,
                        threads: int = 1) -> CDFConvergenceReport:
    """Evaluate ``(F_N(lam + delta) x_N, x_N)`` on the study grid for every N and delta."""
    if families is None:
        families = family_sequence(study.spec, study.Ns, threads)
    grid = np.asarray(study.lambda_grid)
    report = CDFConvergenceReport(list(study.Ns), grid.tolist(), list(study.deltas))
    if len(study.Ns) >= 2:
        report.flagged = discontinuity_scan(
            {N: families[N] for N in study.Ns}, study.probe, grid, study.atom_threshold)
    keep = ~np.isin(grid, report.flagged)
    if study.oracle is not None:
        report.oracle = np.asarray(study.oracle.cdf(grid), dtype=float)

    for N in study.Ns:
        fam = families[N]
        measure = cdf(fam, study.probe.vector(N))
        g = _nudge_grid(grid, fam)
        for d in study.deltas:
            vals = measure(g + d)
            report.cdf[(N, d)] = vals
            if report.oracle is not None and keep.any():
                report.sup_distance[(N, d)] = float(np.abs(vals - report.oracle)[keep].max())
        base = report.cdf[(N, study.deltas[-1])]
        report.delta_variation[N] = float(max(np.abs(report.cdf[(N, d)] - base).max()
                                              for d in study.deltas))
    for a, b in zip(study.Ns, study.Ns[1:]):
        for d in study.deltas:
            diff = np.abs(report.cdf[(a, d)] - report.cdf[(b, d)])[keep]
            report.stabilization[(a, b, d)] = float(diff.max()) if diff.size else 0.0
    return report


@dataclass
class LimitsReport:
    Ks: list[float]
    Ns: list[int]
    lower: dict = field(default_factory=dict)   # N -> [||F_N(-K) x|| for K]
    upper: dict = field(default_factory=dict)   # N -> [||x - F_N(K) x|| for K]
    tails: dict = field(default_factory=dict)   # N -> [TailReport for K]
    membership: object = None

    def worst(self, K_index: int) -> float:
        return max(max(self.lower[N][K_index], self.upper[N][K_index]) for N in self.Ns)

    @property
    def monotone_in_K(self) -> bool:
        return all(
            all(b <= a for a, b in zip(seq, seq[1:]))
            for N in self.Ns for seq in (self.lower[N], self.upper[N])
        )

    @property
    def tails_ok(self) -> bool:
        return all(t.bound_satisfied for N in self.Ns for t in self.tails[N])

    def to_json_record(self) -> dict:
        return {
            "Ks": self.Ks,
            "per_N": {
                str(N): {
                    "lower": self.lower[N],
                    "upper": self.upper[N],
                    "tail_certificates": [
                        {"K": t.K, "lhs": t.lhs, "left": t.left_moment, "right": t.right_moment,
                         "satisfied": t.bound_satisfied}
                        for t in self.tails[N]
                    ],
                }
                for N in self.Ns
            },
            "monotone_in_K": self.monotone_in_K,
            "membership": None if self.membership is None else {
                "Ns": self.membership.Ns, "norms": self.membership.norms,
                "verdict": self.membership.verdict},
        }


def theorem_limits_check(study: ConvergenceStudy, Ks: Sequence[float],
                         families: Mapping[int, SpectralFamily] | None = None,
                         threads: int = 1) -> LimitsReport:
    """``||F_N(-K) x||`` and ``||x - F_N(K) x||`` for ascending ``Ks``.

    Norms are square roots of tail masses accumulated in eigen-index order,
    so each sequence is exactly monotone in ``K``. Raises ``ValueError`` if
    the probe looks outside the operator domain.
    """
    Ks = [float(k) for k in Ks]
    if any(k <= 0 for k in Ks) or any(b <= a for a, b in zip(Ks, Ks[1:])):
        raise ValueError("Ks must be positive and strictly ascending")
    report = LimitsReport(Ks, list(study.Ns))
    Nmax = study.Ns[-1]
    mNs = study.Ns if len(study.Ns) >= 3 else sorted({max(1, Nmax // 4), max(2, Nmax // 2), Nmax})
    if len(mNs) >= 3 and _probe_fits(study.probe, mNs[0]):
        report.membership = domain_membership_report(study.spec, study.probe, mNs)
        if report.membership.verdict != "bounded":
            raise ValueError(f"probe {study.probe.label} does not look like a domain vector")
    if families is None:
        families = family_sequence(study.spec, study.Ns, threads)
    for N in study.Ns:
        fam = families[N]
        x = study.probe.vector(N)
        mass = np.abs(fam.coefficients(x)) ** 2
        below = np.concatenate(([0.0], np.cumsum(mass)))
        above = np.concatenate((np.cumsum(mass[::-1])[::-1], [0.0]))
        lo, up = [], []
        for K in Ks:
            lo.append(math.sqrt(below[fam.count_at_most(-K)]))
            up.append(math.sqrt(above[fam.count_at_most(K)]))
        report.lower[N] = lo
        report.upper[N] = up
        report.tails[N] = [tail_report(fam, x, K) for K in Ks]
    return report


def _probe_fits(probe: DomainProbe, N: int) -> bool:
    rule = probe.coefficients
    return rule["kind"] != "basis" or int(rule["index"]) <= N
