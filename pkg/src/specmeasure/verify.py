"""Invariant suite for one finite section, with measured slack per check.

Every tolerance is multiplied by ``tolerance_scale``; a scale of 0 turns
each roundoff-level defect into a reported violation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .family import (SpectralFamily, apply_F, riemann_stieltjes_sum,
                     stieltjes_apply, tail_report)
from .harness import ConvergenceStudy, theorem_limits_check
from .operators import DomainProbe, OperatorSpec, build_truncation
from .resolvent import operational_calculus_residual

__all__ = ["CheckResult", "VerifySummary", "run_verify", "random_partition"]

EPS = np.finfo(float).eps


def ulp(x) -> float:
    return float(np.spacing(abs(float(x))))


@dataclass
class CheckResult:
    name: str
    cases: int = 0
    worst_measured: float = 0.0
    worst_bound: float = math.inf
    worst_ratio: float = 0.0  # measured / bound, <= 1 passes
    violations: list = field(default_factory=list)

    def record(self, measured: float, bound: float, case) -> None:
        self.cases += 1
        if measured > 0:
            ratio = math.inf if bound <= 0 else measured / bound
        else:
            ratio = 0.0
        if ratio > self.worst_ratio or self.cases == 1:
            self.worst_ratio = ratio
            self.worst_measured = float(measured)
            self.worst_bound = float(bound)
        if not measured <= bound:
            self.violations.append({"case": case, "measured": float(measured), "bound": float(bound)})

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_record(self, max_violations: int = 20) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "cases": self.cases,
            "worst_measured": self.worst_measured,
            "worst_bound": self.worst_bound,
            "worst_ratio": self.worst_ratio,
            "slack": self.worst_bound - self.worst_measured,
            "violation_count": len(self.violations),
            "violations": self.violations[:max_violations],
        }


@dataclass
class VerifySummary:
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_record(self) -> dict:
        return {"passed": self.passed, "checks": [c.to_record() for c in self.checks]}


def random_partition(rng: np.random.Generator, fam: SpectralFamily, gap: float = 1e-7) -> np.ndarray:
    """Random strictly increasing partition with no point within ``gap`` of a cluster."""
    lo, hi = fam.eigenvalues[0], fam.eigenvalues[-1]
    span = max(hi - lo, 1.0)
    a = rng.uniform(lo - 0.2 * span, lo + 0.5 * span)
    b = rng.uniform(max(a, hi - 0.5 * span), hi + 0.2 * span)
    if b <= a:
        b = a + span
    n = int(rng.integers(1, 60))
    pts = np.unique(np.concatenate(([a, b], rng.uniform(a, b, n))))
    reps = fam.representatives
    for _ in range(8):
        near = np.abs(pts[:, None] - reps[None, :]).min(axis=1) < gap
        if not near.any():
            break
        pts = np.unique(np.where(near, pts + 10 * gap, pts))
    return pts


def _random_unit(rng, N):
    x = rng.standard_normal(N)
    return x / np.linalg.norm(x)


def run_verify(spec: OperatorSpec, N: int, seed: int, probe: DomainProbe | None = None,
               samples: int = 20, partitions: int = 100, tolerance_scale: float = 1.0,
               fam: SpectralFamily | None = None) -> VerifySummary:
    """Run every finite-section invariant on ``spec`` truncated to ``N``."""
    s = float(tolerance_scale)
    rng = np.random.default_rng(seed)
    T = build_truncation(spec, N)
    if fam is None:
        fam = SpectralFamily.from_operator(T)
    normT = fam.spectral_radius
    lam_min, lam_max = fam.eigenvalues[0], fam.eigenvalues[-1]

    eig = CheckResult("eigensolver")
    eig.record(fam.decomposition.orthonormality_defect(), s * 10 * N * EPS, "orthonormality")
    eig.record(fam.decomposition.reconstruction_defect(T), s * 20 * N * ulp(np.abs(T.entries).max()),
               "reconstruction")

    chain = CheckResult("integral_equals_matvec")
    for k in range(samples):
        x = rng.standard_normal(N)
        got = stieltjes_apply(fam, lambda lam: lam, (-math.inf, math.inf), x)
        err = float(np.linalg.norm(got - T.matvec(x)))
        chain.record(err, s * 20 * N * ulp(normT * np.linalg.norm(x)), k)

    tails = CheckResult("tail_inequality")
    Ks = np.concatenate((normT * np.array([0.1, 0.5, 0.9, 0.99, 1.0, 1.01, 2.0]),
                         rng.uniform(0.01, 1.5 * max(normT, 1e-300), 3)))
    for k in range(samples):
        x = rng.standard_normal(N)
        for K in Ks[Ks > 0]:
            t = tail_report(fam, x, K)
            excess = max(K * t.left_moment - t.lhs, K * t.right_moment - t.lhs)
            tails.record(excess, s * t.slack, {"sample": k, "K": float(K)})

    rep = CheckResult("representation_bound")
    for k in range(partitions):
        x = rng.standard_normal(N)
        p = random_partition(rng, fam)
        rs = riemann_stieltjes_sum(fam, x, p)
        exact = stieltjes_apply(fam, lambda lam: lam, (p[0], p[-1]), x)
        err2 = float(np.sum((rs - exact) ** 2))
        mesh = float(np.diff(p).max())
        incr = apply_F(fam, p[-1], x) - apply_F(fam, p[0], x)
        bound = mesh ** 2 * float(incr @ incr)
        rep.record(err2, bound * (1 + s * 1e-10), k)

    ortho = CheckResult("orthogonal_increments")
    for k in range(samples):
        x = rng.standard_normal(N)
        cuts = np.sort(rng.uniform(lam_min - 1, lam_max + 1, 4))
        a, b, c, d = cuts
        u = apply_F(fam, b, x) - apply_F(fam, a, x)
        v = apply_F(fam, d, x) - apply_F(fam, c, x)
        ortho.record(abs(float(u @ v)), s * 10 * N * ulp(x @ x), k)

    opcalc = CheckResult("operational_calculus")
    for k in range(samples):
        x = _random_unit(rng, N)
        im = 10 ** rng.uniform(-1, 1) * rng.choice([-1.0, 1.0])
        z = complex(rng.uniform(lam_min - 1, lam_max + 1), im)
        r = operational_calculus_residual(fam, T, z, x)
        opcalc.record(r, s * 100 * N * ulp(1.0 / abs(im)), {"z": [z.real, z.imag]})

    limits = CheckResult("theorem_limits")
    probe = probe or DomainProbe.basis(1)
    Ks_lim = [float(v) for v in normT * np.array([0.25, 0.5, 0.75, 1.0]) if v > 0]
    Ks_lim.append(1.5 * normT + 1.0)
    study = ConvergenceStudy(spec, probe, [N], [0.0])
    lr = theorem_limits_check(study, Ks_lim, families={N: fam})
    limits.record(0.0 if lr.monotone_in_K else 1.0, 0.0, "monotone_in_K")
    limits.record(lr.worst(-1), 0.0, "beyond_spectrum_zero")
    limits.record(0.0 if lr.tails_ok else 1.0, 0.0, "tail_certificates")

    return VerifySummary([eig, chain, tails, rep, ortho, opcalc, limits])
