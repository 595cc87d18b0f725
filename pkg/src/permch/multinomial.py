"""Multinomial pmfs in log space and numerical checks of their classical bounds.

All logarithms are base 2.  Bounds that only hold for large n are asserted
from ``LARGE_N`` upward; below that they are computed and reported.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln, xlogy

from .compositions import Composition, enumerate_compositions, lattice_size
from .config import LATTICE_CAP, CapExceededError
from .lattice_dist import LatticeDist

LARGE_N = 10
# Relative slack for float comparisons of a pmf against a bound it can meet with equality.
REL_SLACK = 1e-12


@dataclass(frozen=True)
class MultinomialSpec:
    n: int
    u: tuple[float, ...]

    def __post_init__(self) -> None:
        u = tuple(float(x) for x in self.u)
        if self.n < 0:
            raise ValueError(f"n must be >= 0, got {self.n}")
        if len(u) < 1 or any(x < 0 for x in u):
            raise ValueError("u must be a nonempty nonnegative vector")
        if abs(math.fsum(u) - 1.0) > 1e-12:
            raise ValueError(f"u sums to {math.fsum(u)!r}, not 1")
        object.__setattr__(self, "u", u)

    @property
    def q(self) -> int:
        return len(self.u)

    @property
    def supp_size(self) -> int:
        return sum(1 for x in self.u if x > 0)


def log_pmf(spec: MultinomialSpec, t: Sequence[int]) -> float:
    """Natural-log pmf; -inf off the support."""
    t = tuple(int(x) for x in t)
    if len(t) != spec.q:
        raise ValueError("composition length does not match u")
    if any(x < 0 for x in t) or sum(t) != spec.n:
        return -math.inf
    out = gammaln(spec.n + 1)
    for ti, ui in zip(t, spec.u):
        out += xlogy(ti, ui) - gammaln(ti + 1)
    return float(out)


def pmf(spec: MultinomialSpec, t: Sequence[int]) -> float:
    return math.exp(log_pmf(spec, t))


def pmf_grid(n: int, u: Sequence[float]) -> np.ndarray:
    """Dense pmf indexed by the first q-1 counts; entries with sum > n are 0.

    The array has shape (n+1,)*(q-1); the last count is implied.
    """
    u = np.asarray(u, dtype=float)
    m = len(u) - 1
    if m == 0:
        return np.ones(1)
    if (n + 1) ** m > LATTICE_CAP:
        raise CapExceededError(f"dense grid of size {(n + 1) ** m} exceeds cap")
    axes = np.indices((n + 1,) * m)
    last = n - axes.sum(axis=0)
    valid = last >= 0
    last_c = np.where(valid, last, 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        log = gammaln(n + 1) - gammaln(last_c + 1) + xlogy(last_c, u[-1])
        for i in range(m):
            log = log - gammaln(axes[i] + 1) + xlogy(axes[i], u[i])
        out = np.where(valid, np.exp(log), 0.0)
    return out


def full_dist(spec: MultinomialSpec) -> LatticeDist:
    if lattice_size(spec.q, spec.n) > LATTICE_CAP:
        raise CapExceededError("lattice exceeds cap")
    masses = {}
    for t in enumerate_compositions(spec.q, spec.n):
        v = pmf(spec, t.counts)
        if v > 0:
            masses[t.counts] = v
    return LatticeDist(masses, tol=1e-10)


def sample(spec: MultinomialSpec, size: int, rng: np.random.Generator) -> np.ndarray:
    return rng.multinomial(spec.n, spec.u, size=size)


def _log2_kl_term(t: Sequence[int], spec: MultinomialSpec) -> float:
    """n * KL(t/n || u) in bits; +inf when t puts mass where u has none."""
    n = spec.n
    total = 0.0
    for ti, ui in zip(t, spec.u):
        if ti == 0:
            continue
        if ui == 0:
            return math.inf
        total += ti * math.log2(ti / (n * ui))
    return total


def kl_bound(spec: MultinomialSpec, t: Sequence[int]) -> float:
    """2^{-n KL(t/n||u)} * sqrt(n) / sqrt(prod of nonzero t_i)."""
    nkl = _log2_kl_term(t, spec)
    if math.isinf(nkl):
        return 0.0
    log2_bound = -nkl + 0.5 * math.log2(spec.n) - 0.5 * sum(math.log2(x) for x in t if x > 0)
    return 2.0**log2_bound


def check_kl_bound(spec: MultinomialSpec, t: Sequence[int]) -> tuple[float, float, bool]:
    p = pmf(spec, t)
    b = kl_bound(spec, t)
    return p, b, p <= b * (1 + REL_SLACK)


def peak_bound(spec: MultinomialSpec) -> float:
    """2 / (n^{(k-1)/2} * sqrt(prod of nonzero u_i)), k the support size of u."""
    if spec.n < 1:
        raise ValueError("peak bound needs n >= 1")
    k = spec.supp_size
    prod = math.prod(x for x in spec.u if x > 0)
    return 2.0 / (spec.n ** ((k - 1) / 2) * math.sqrt(prod))


def peak_value(spec: MultinomialSpec) -> float:
    return float(pmf_grid(spec.n, spec.u).max())


def check_peak(spec: MultinomialSpec) -> tuple[float, float, bool]:
    peak = peak_value(spec)
    bound = peak_bound(spec)
    return peak, bound, peak <= bound * (1 + REL_SLACK)


@dataclass
class TailReport:
    n: int
    K: float
    threshold: float
    bound: float
    flagged: int
    max_flagged_pmf: float
    ok: bool


def check_tail_bound(spec: MultinomialSpec, K: float) -> TailReport:
    """Every t with some |t_i - (n+1)u_i| >= K sqrt(n log n) has pmf <= n^{-(K^2-1)/2}."""
    if K <= 1:
        raise ValueError(f"K must exceed 1, got {K}")
    n = spec.n
    if n < 2:
        raise ValueError("tail bound needs n >= 2")
    threshold = K * math.sqrt(n * math.log2(n))
    bound = n ** (-(K * K - 1) / 2)
    grid = pmf_grid(n, spec.u)
    m = spec.q - 1
    axes = np.indices(grid.shape)
    last = n - axes.sum(axis=0)
    valid = last >= 0
    flagged = np.zeros(grid.shape, dtype=bool)
    for i in range(m):
        flagged |= np.abs(axes[i] - (n + 1) * spec.u[i]) >= threshold
    flagged |= np.abs(last - (n + 1) * spec.u[-1]) >= threshold
    flagged &= valid
    worst = float(grid[flagged].max()) if flagged.any() else 0.0
    return TailReport(n, K, threshold, bound, int(flagged.sum()), worst, worst <= bound * (1 + REL_SLACK))


def binomial_pmf(n: int, p: float) -> np.ndarray:
    """B(t) for t = 0..n, the number of successes of probability p."""
    k = np.arange(n + 1)
    log = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1) + xlogy(k, p) + xlogy(n - k, 1 - p)
    return np.exp(log)


def binomial_successive_diff(n: int, p: float) -> float:
    """sum_{t=0}^{n+1} |B(t-1) - B(t)| for B = Binomial(n, p)."""
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    b = np.concatenate(([0.0], binomial_pmf(n, p), [0.0]))
    return math.fsum(np.abs(np.diff(b)))


def binomial_diff_bound(n: int, p: float) -> float:
    return 4.0 / (math.sqrt(n) * math.sqrt(p * (1 - p)))


@dataclass
class SweepRow:
    n: int
    q: int
    u: tuple[float, ...]
    check_name: str
    max_ratio: float
    passed: bool
    asserted: bool = field(default=True)


def bound_sweep(q: int, ns: Iterable[int], us: Sequence[Sequence[float]], Ks: Sequence[float] = (2, 3)) -> list[SweepRow]:
    """Exhaustive KL, peak and tail checks; ratios are pmf/bound maxima."""
    rows: list[SweepRow] = []
    for n in ns:
        for u in us:
            spec = MultinomialSpec(n, tuple(u))
            asserted = n >= LARGE_N
            worst = 0.0
            ok = True
            for t in enumerate_compositions(q, n):
                p, b, good = check_kl_bound(spec, t.counts)
                ok &= good
                if b > 0:
                    worst = max(worst, p / b)
            rows.append(SweepRow(n, q, spec.u, "kl", worst, ok, asserted))
            peak, bound, good = check_peak(spec)
            rows.append(SweepRow(n, q, spec.u, "peak", peak / bound, good, asserted))
            if n >= 2:
                for K in Ks:
                    rep = check_tail_bound(spec, K)
                    rows.append(SweepRow(n, q, spec.u, f"tail_K{K}", rep.max_flagged_pmf / rep.bound, rep.ok, asserted))
    return rows


def write_sweep_csv(rows: Iterable[SweepRow], path: str) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "q", "u", "check_name", "max_ratio", "pass"])
        for r in rows:
            w.writerow([r.n, r.q, " ".join(f"{x:.12g}" for x in r.u), r.check_name, f"{r.max_ratio:.12g}", r.passed])


def composition_pmf_table(spec: MultinomialSpec) -> dict[Composition, float]:
    return {t: pmf(spec, t.counts) for t in enumerate_compositions(spec.q, spec.n)}
