"""Deterministic M-type quantization of distributions over the composition lattice.

Arithmetic is exact (``fractions.Fraction``); float inputs are converted
exactly, and the only rounding happens when the final numerators are snapped
so that they sum to M.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .cells_gray import CellIndex, CellPartition, cell_members, cell_of, partition_order
from .channel import QnccKernel
from .compositions import lattice_size
from .config import C4_PRIME
from .lattice_dist import LatticeDist, MTypeDist, Point

SNAP_TOL = 1e-12


def _exact(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


def _floor_to(v: Fraction, M: int) -> int:
    """Numerator of v floored to a multiple of 1/M."""
    return math.floor(v * M)


def floor_and_carry(masses: Sequence, M: int) -> tuple[list[int], list[Fraction]]:
    """Left-to-right floor-and-carry.

    Returns numerators over M (summing to M when the masses sum to one) and the
    carry passed on after each of the first len-1 positions.
    """
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")
    vals = [_exact(v) for v in masses]
    if any(v < 0 for v in vals):
        raise ValueError("negative mass")
    total = sum(vals, Fraction(0))
    if abs(total - 1) > SNAP_TOL:
        raise ValueError(f"masses sum to {float(total)!r}, not 1")
    nums: list[int] = []
    carries: list[Fraction] = []
    carry = Fraction(0)
    for v in vals[:-1]:
        k = _floor_to(v + carry, M)
        carry = v + carry - Fraction(k, M)
        nums.append(k)
        carries.append(carry)
    nums.append(_snap_last(vals[-1] + carry, M, sum(nums)))
    return nums, carries


def _snap_last(mass: Fraction, M: int, used: int) -> int:
    k = M - used
    if abs(mass * M - k) > SNAP_TOL * M:
        raise AssertionError(f"final mass {float(mass)} is not {k}/{M}")
    return k


def _binary_points(Q: LatticeDist | Sequence) -> tuple[list[Point], list]:
    """Points (n-w, w) ordered by weight w and their masses."""
    if isinstance(Q, LatticeDist):
        if Q.q != 2:
            raise ValueError("binary quantization needs q = 2")
        n = sum(next(iter(Q)))
        pts = [(n - w, w) for w in range(n + 1)]
        return pts, [Q[p] for p in pts]
    masses = list(Q)
    n = len(masses) - 1
    return [(n - w, w) for w in range(n + 1)], masses


def quantize_binary(Q: LatticeDist | Sequence, M: int) -> MTypeDist:
    """Floor-and-carry over Hamming weights 0..n.

    ``Q`` is a distribution on q = 2 compositions (weight = count of symbol 1)
    or a plain list of masses indexed by weight.
    """
    pts, masses = _binary_points(Q)
    nums, _ = floor_and_carry(masses, M)
    return MTypeDist(M, dict(zip(pts, nums)))


def binary_carries(Q: LatticeDist | Sequence, M: int) -> list[Fraction]:
    _, masses = _binary_points(Q)
    return floor_and_carry(masses, M)[1]


@dataclass(frozen=True)
class QuantizerParams:
    M: int
    a: int
    c: float | None
    representatives: Mapping[CellIndex, Point] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")
        if self.a < 1:
            raise ValueError(f"a must be >= 1, got {self.a}")


def choose_a(n: int, q: int, c: float) -> int:
    """round(sqrt(n) / (c^{1/(q-1)} (log n)^{(q-2)/2})), clamped to [1, n]."""
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    raw = math.sqrt(n) / (c ** (1 / (q - 1)) * math.log2(n) ** ((q - 2) / 2))
    return min(max(int(round(raw)), 1), n)


def _scale(n: int, q: int) -> float:
    return math.sqrt(n * math.log2(n) ** (q - 2)) ** (q - 1)


def choose_M(n: int, q: int, c: float) -> int:
    """ceil(c * (sqrt(n (log n)^{q-2}))^{q-1})."""
    if c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    return math.ceil(c * _scale(n, q))


def c_from_M(n: int, q: int, M: int) -> float:
    """The knob c for which the M formula is exact (before the ceiling)."""
    return M / _scale(n, q)


def lex_representatives(members: Mapping[CellIndex, list]) -> dict[CellIndex, Point]:
    return {l: min(ts).counts for l, ts in members.items()}


def _lattice_shape(Q: LatticeDist) -> tuple[int, int]:
    pts = list(Q)
    q = len(pts[0])
    n = sum(pts[0])
    if any(sum(p) != n or min(p) < 0 for p in pts):
        raise ValueError("support is not inside a single composition lattice")
    return q, n


def stage1_cellwise(
    Q: LatticeDist | Mapping[Point, float],
    part: CellPartition,
    M: int,
    representatives: Mapping[CellIndex, Sequence[int]] | None = None,
) -> dict[Point, Fraction]:
    """Floor every mass to a multiple of 1/M and put each cell's residual on its representative."""
    members = cell_members(part)
    reps = dict(lex_representatives(members))
    if representatives:
        for l, t in representatives.items():
            t = tuple(t)
            if cell_of(t, part) != tuple(l):
                raise ValueError(f"representative {t} is not in cell {tuple(l)}")
            reps[tuple(l)] = t
    masses = {p: _exact(v) for p, v in Q.items()}
    out: dict[Point, Fraction] = {}
    for l, ts in members.items():
        rep = reps[l]
        resid = Fraction(0)
        for t in ts:
            v = masses.get(t.counts, Fraction(0))
            if v == 0:
                continue
            k = Fraction(_floor_to(v, M), M)
            resid += v - k
            if k:
                out[t.counts] = k
        if resid:
            out[rep] = out.get(rep, Fraction(0)) + resid
    return out


def stage2_gray(
    Q1: Mapping[Point, Fraction],
    order: Sequence[CellIndex],
    representatives: Mapping[CellIndex, Point],
    M: int,
    part: CellPartition | None = None,
) -> tuple[MTypeDist, list[Fraction]]:
    """Floor-and-carry along the representatives in the given cell order."""
    if part is not None:
        nonempty = set(cell_members(part))
        if set(order) != nonempty or len(order) != len(nonempty):
            raise ValueError("ordering does not cover the nonempty cells exactly once")
    rep_pts = [tuple(representatives[l]) for l in order]
    rep_set = set(rep_pts)
    nums: dict[Point, int] = {}
    for p, v in Q1.items():
        if p in rep_set:
            continue
        k = v * M
        if k.denominator != 1:
            raise ValueError(f"non-representative {p} has mass {v} that is not a multiple of 1/{M}")
        if k:
            nums[p] = int(k)
    masses = [_exact(Q1.get(p, 0)) for p in rep_pts]
    used = sum(nums.values())
    carry = Fraction(0)
    carries: list[Fraction] = []
    for p, v in zip(rep_pts[:-1], masses[:-1]):
        k = _floor_to(v + carry, M)
        carry = v + carry - Fraction(k, M)
        carries.append(carry)
        if k:
            nums[p] = k
        used += k
    k = _snap_last(masses[-1] + carry, M, used)
    if k:
        nums[rep_pts[-1]] = k
    return MTypeDist(M, nums), carries


@dataclass
class DistortionReport:
    measured_tv: float
    stage1_tv: float
    stage1_chain: float
    stage2_chain: float
    chain_total: float
    bound: float
    bound_ratio: float


@dataclass
class QuantizationResult:
    mtype: MTypeDist
    params: QuantizerParams
    partition: CellPartition
    order: list[CellIndex]
    input: dict[Point, Fraction]
    stage1: dict[Point, Fraction]
    carries: list[Fraction]

    def rep_points(self) -> list[Point]:
        return [tuple(self.params.representatives[l]) for l in self.order]

    def distortion(self, kernel: QnccKernel, C4: float = C4_PRIME) -> DistortionReport:
        """Measured output TV against the triangle-inequality chain and the analytic bound."""
        K = kernel.matrix
        vec_in = _to_vec(self.input, kernel)
        vec_s1 = _to_vec(self.stage1, kernel)
        vec_out = _to_vec({p: Fraction(k, self.params.M) for p, k in self.mtype.numerators.items()}, kernel)
        op_in, op_s1, op_out = vec_in @ K, vec_s1 @ K, vec_out @ K
        measured = 0.5 * float(np.abs(op_in - op_out).sum())
        stage1_tv = 0.5 * float(np.abs(op_in - op_s1).sum())
        # Stage I moves each residual from its point to the cell representative.
        s1_chain = 0.0
        members = cell_members(self.partition)
        M = self.params.M
        for l, ts in members.items():
            rep = kernel.index(self.params.representatives[l])
            for t in ts:
                v = self.input.get(t.counts, Fraction(0))
                r = float(v - Fraction(_floor_to(v, M), M))
                idx = kernel.index(t.counts)
                if r and idx != rep:
                    s1_chain += r * 0.5 * float(np.abs(K[idx] - K[rep]).sum())
        s2_chain = 0.0
        reps = self.rep_points()
        for i, carry in enumerate(self.carries):
            a, b = kernel.index(reps[i]), kernel.index(reps[i + 1])
            s2_chain += float(carry) * 0.5 * float(np.abs(K[a] - K[b]).sum())
        bound = distortion_bound(self.partition.n, self.partition.q, self.params.a, M, C4)
        return DistortionReport(
            measured_tv=measured,
            stage1_tv=stage1_tv,
            stage1_chain=s1_chain,
            stage2_chain=s2_chain,
            chain_total=s1_chain + s2_chain,
            bound=bound,
            bound_ratio=measured / bound if bound > 0 else math.inf,
        )


def _to_vec(masses: Mapping[Point, Fraction], kernel: QnccKernel) -> np.ndarray:
    vec = np.zeros(len(kernel.compositions))
    for p, v in masses.items():
        vec[kernel.index(p)] += float(v)
    return vec


def distortion_bound(n: int, q: int, a: int, M: int, C4: float = C4_PRIME) -> float:
    """C4 a L/sqrt(n) + (2n/a)^{q-1} C4 L a/(sqrt(n) M), L = (log n)^{(q-2)/2}."""
    L = math.log2(n) ** ((q - 2) / 2)
    step = C4 * L * a / math.sqrt(n)
    return step + (2 * n / a) ** (q - 1) * step / M


def quantize_qary(
    Q: LatticeDist | Mapping[Point, float],
    c: float | None = None,
    M: int | None = None,
    a: int | None = None,
    representatives: Mapping[CellIndex, Sequence[int]] | None = None,
) -> QuantizationResult:
    """Two-stage quantization to an exactly M-type distribution.

    Give ``c`` to derive both M and the cell side a.  Giving only ``M`` derives
    a from the c that M corresponds to; ``a`` overrides the derived side.
    """
    if not isinstance(Q, LatticeDist):
        Q = LatticeDist(dict(Q))
    q, n = _lattice_shape(Q)
    if c is not None and c <= 0:
        raise ValueError(f"c must be positive, got {c}")
    if c is None and M is None:
        raise ValueError("give c or M")
    if M is None:
        if n < 2:
            raise ValueError("deriving M from c needs n >= 2")
        M = choose_M(n, q, c)
    if a is None:
        if n < 2:
            a = max(n, 1)
        else:
            a = choose_a(n, q, c if c is not None else c_from_M(n, q, M))
    part = CellPartition(n, q, a)
    members = cell_members(part)
    reps = dict(lex_representatives(members))
    if representatives:
        reps.update({tuple(l): tuple(t) for l, t in representatives.items()})
    params = QuantizerParams(M=M, a=a, c=c, representatives=reps)
    stage1 = stage1_cellwise(Q, part, M, reps)
    order = partition_order(part)
    mtype, carries = stage2_gray(stage1, order, reps, M, part)
    masses = {p: _exact(v) for p, v in Q.items()}
    return QuantizationResult(mtype, params, part, order, masses, stage1, carries)


def count_m_type(n: int, q: int, M: int) -> int:
    """Upper bound |N_{q,n}|^M on the number of M-type distributions."""
    return lattice_size(q, n) ** M


def count_m_type_log2(n: int, q: int, M: int) -> float:
    return M * math.log2(lattice_size(q, n))


def exact_m_type_count(n: int, q: int, M: int) -> int:
    """Exact number of M-type distributions on the lattice, C(M+|N|-1, |N|-1)."""
    size = lattice_size(q, n)
    return math.comb(M + size - 1, size - 1)


def cell_mass_error(Q: Mapping[Point, float], Q1: Mapping[Point, Fraction], part: CellPartition) -> Fraction:
    """Largest absolute per-cell mass difference, computed exactly."""
    worst = Fraction(0)
    for l, ts in cell_members(part).items():
        before = sum((_exact(Q.get(t.counts, 0)) for t in ts), Fraction(0))
        after = sum((Q1.get(t.counts, Fraction(0)) for t in ts), Fraction(0))
        worst = max(worst, abs(before - after))
    return worst
