"""Kolmogorov-Smirnov tests with asymptotic p-values, and the
forward/backward indistinguishability check built on them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

MIN_SAMPLES = 8
SERIES_TOL = 1e-12


@dataclass(frozen=True)
class KSResult:
    statistic: float
    n: int
    p_value: float
    m: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.statistic <= 1.0:
            raise ValueError("KS statistic outside [0, 1]")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p-value outside [0, 1]")

    @property
    def effective_n(self) -> float:
        if self.m is None:
            return float(self.n)
        return self.n * self.m / (self.n + self.m)


def kolmogorov_sf(lam: float) -> float:
    """Q(lam) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 lam^2).

    The series is cut once a term drops below 1e-12. For small ``lam`` it
    converges slowly, so the Jacobi-theta dual form is used there instead.
    """
    if lam < 0.1:
        # 1 - Q(lam) < 1e-50 here
        return 1.0
    if lam < 1.0:
        # Q = 1 - sqrt(2 pi)/lam * sum_k exp(-(2k-1)^2 pi^2 / (8 lam^2))
        total = 0.0
        k = 1
        while True:
            term = math.exp(-((2 * k - 1) ** 2) * math.pi ** 2 / (8 * lam * lam))
            total += term
            if term < SERIES_TOL:
                break
            k += 1
        return min(1.0, max(0.0, 1.0 - math.sqrt(2 * math.pi) / lam * total))
    total = 0.0
    k = 1
    while True:
        term = math.exp(-2.0 * k * k * lam * lam)
        total += term if k % 2 else -term
        if term < SERIES_TOL:
            break
        k += 1
    return min(1.0, max(0.0, 2.0 * total))


def ks_critical_value(alpha: float, n: float) -> float:
    """Smallest D rejected at level ``alpha`` by the asymptotic test."""
    lam = brentq(lambda x: kolmogorov_sf(x) - alpha, 1e-3, 10.0, xtol=1e-14)
    return lam / math.sqrt(n)


def ks_uniform(samples: Sequence[float]) -> KSResult:
    """One-sample KS test of ``samples`` against Uniform(0, 1)."""
    u = np.sort(np.asarray(samples, dtype=float).ravel())
    n = u.size
    if n < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {n}")
    if np.any(~np.isfinite(u)) or u[0] < 0.0 or u[-1] > 1.0:
        raise ValueError("samples must lie in [0, 1]")
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - u), np.max(u - (i - 1) / n)))
    d = min(max(d, 0.0), 1.0)
    return KSResult(d, n, kolmogorov_sf(math.sqrt(n) * d))


def ks_two_sample(xs: Sequence[float], ys: Sequence[float]) -> KSResult:
    """Two-sample KS test; asymptotic p with effective size nm/(n+m)."""
    x = np.sort(np.asarray(xs, dtype=float).ravel())
    y = np.sort(np.asarray(ys, dtype=float).ravel())
    n, m = x.size, y.size
    if n < MIN_SAMPLES or m < MIN_SAMPLES:
        raise ValueError(f"both samples need at least {MIN_SAMPLES} values")
    pooled = np.concatenate([x, y])
    cdf_x = np.searchsorted(x, pooled, side="right") / n
    cdf_y = np.searchsorted(y, pooled, side="right") / m
    d = float(np.max(np.abs(cdf_x - cdf_y)))
    en = n * m / (n + m)
    return KSResult(d, n, kolmogorov_sf(math.sqrt(en) * d), m=m)


@dataclass
class DirectionReport:
    forward: KSResult
    backward: KSResult
    two_sample: KSResult
    alpha: float
    notes: list = field(default_factory=list)

    @property
    def indistinguishable(self) -> bool:
        return self.two_sample.p_value > self.alpha

    @property
    def verdict(self) -> str:
        return "indistinguishable" if self.indistinguishable else "distinguishable"

    def rows(self):
        """(pool, D, n, p) rows for CSV output."""
        return [
            ("forward", self.forward.statistic, self.forward.n, self.forward.p_value),
            ("backward", self.backward.statistic, self.backward.n, self.backward.p_value),
            ("two_sample", self.two_sample.statistic, int(round(self.two_sample.effective_n)),
             self.two_sample.p_value),
        ]

    def to_text(self) -> str:
        lines = ["direction test"]
        for pool, d, n, p in self.rows():
            lines.append(f"  {pool:<10} D={d:.6f} n={n} p={p:.6g}")
        lines.append(f"  alpha={self.alpha:g} verdict={self.verdict}")
        lines.extend(f"  note: {note}" for note in self.notes)
        return "\n".join(lines)


POOLING_CAVEAT = (
    "PIT values are pooled across trajectories and treated as exchangeable; "
    "values from one trajectory are not strictly independent"
)


def direction_test(forward_pits, backward_pits, alpha: float = 0.01) -> DirectionReport:
    """Can the forward and backward PIT pools be told apart?"""
    return DirectionReport(
        forward=ks_uniform(forward_pits),
        backward=ks_uniform(backward_pits),
        two_sample=ks_two_sample(forward_pits, backward_pits),
        alpha=alpha,
        notes=[POOLING_CAVEAT],
    )


def chi_square_uniform_bins(u: Sequence[float], bins: int = 50) -> float:
    """p-value of a chi-square test that ``u`` fills ``bins`` equal bins evenly."""
    from scipy.stats import chi2

    counts, _ = np.histogram(np.asarray(u, dtype=float), bins=bins, range=(0.0, 1.0))
    expected = counts.sum() / bins
    stat = float(np.sum((counts - expected) ** 2) / expected)
    return float(chi2.sf(stat, bins - 1))

