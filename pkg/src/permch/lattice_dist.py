"""Finitely supported distributions and signed sequences on the integer lattice."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

Point = tuple[int, ...]

SUM_TOL = 1e-12
MTYPE_TOL = 1e-12


def _point(p: Iterable[int]) -> Point:
    return tuple(int(x) for x in p)


class SignedLatticeSeq:
    """A finitely supported real sequence on Z^q (entries of any sign)."""

    def __init__(self, values: Mapping[Sequence[int], float] | None = None, q: int | None = None):
        data: dict[Point, float] = {}
        for p, v in (values or {}).items():
            key = _point(p)
            if v != 0:
                data[key] = data.get(key, 0) + v
        dims = {len(p) for p in data}
        if len(dims) > 1:
            raise ValueError(f"points of mixed dimension {sorted(dims)}")
        if q is None:
            q = dims.pop() if dims else None
        elif dims and dims.pop() != q:
            raise ValueError("point dimension does not match q")
        self._data = {p: v for p, v in data.items() if v != 0}
        self.q = q

    def __getitem__(self, p: Sequence[int]) -> float:
        return self._data.get(_point(p), 0.0)

    def __iter__(self) -> Iterator[Point]:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def items(self):
        return self._data.items()

    def get(self, p: Sequence[int], default=0.0):
        return self._data.get(_point(p), default)

    def as_dict(self) -> dict[Point, float]:
        return dict(self._data)

    def l1_norm(self) -> float:
        return math.fsum(abs(float(v)) for v in self._data.values())

    def total(self) -> float:
        return math.fsum(float(v) for v in self._data.values())

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self._data!r})"


class LatticeDist(SignedLatticeSeq):
    """A probability distribution with finite support on Z^q.

    Zero masses are dropped, negative masses are rejected and the total mass
    must equal one within ``tol``.
    """

    def __init__(self, masses: Mapping[Sequence[int], float], tol: float = SUM_TOL):
        for p, v in masses.items():
            if v < 0:
                raise ValueError(f"negative mass {v} at {tuple(p)}")
        super().__init__(masses)
        if not self._data:
            raise ValueError("a distribution needs nonempty support")
        total = self.total()
        if abs(total - 1.0) > tol:
            raise ValueError(f"masses sum to {total!r}, not 1")

    @classmethod
    def point_mass(cls, t: Sequence[int]) -> "LatticeDist":
        return cls({_point(t): 1.0})

    @classmethod
    def from_vector(cls, probs: Sequence[float], points: Sequence[Sequence[int]]) -> "LatticeDist":
        if len(probs) != len(points):
            raise ValueError("probability and point lists differ in length")
        return cls({_point(p): v for p, v in zip(points, probs)})

    def support(self) -> list[Point]:
        return sorted(self._data)

    def to_json(self) -> str:
        rows = [{"point": list(p), "mass": float(v)} for p, v in sorted(self._data.items())]
        return json.dumps({"support": rows})

    @classmethod
    def from_json(cls, text: str) -> "LatticeDist":
        obj = json.loads(text)
        return cls({_point(r["point"]): float(r["mass"]) for r in obj["support"]})


def delta_shift(src: Sequence[int], dst: Sequence[int]) -> SignedLatticeSeq:
    """The signed sequence delta_dst - delta_src."""
    return SignedLatticeSeq({_point(dst): 1.0, _point(src): -1.0} if _point(src) != _point(dst) else {})


def _same_q(P: SignedLatticeSeq, Q: SignedLatticeSeq) -> None:
    if P.q is not None and Q.q is not None and P.q != Q.q:
        raise ValueError(f"dimension mismatch: {P.q} vs {Q.q}")


def tv_distance(P: SignedLatticeSeq, Q: SignedLatticeSeq) -> float:
    _same_q(P, Q)
    keys = set(P) | set(Q)
    return 0.5 * math.fsum(abs(float(P[k]) - float(Q[k])) for k in keys)


def convolve(P: SignedLatticeSeq, Q: SignedLatticeSeq) -> SignedLatticeSeq:
    """(P*Q)(t) = sum_l P(t-l) Q(l); returns a LatticeDist when P is one."""
    _same_q(P, Q)
    out: dict[Point, float] = {}
    for p, pv in P.items():
        for r, rv in Q.items():
            key = tuple(x + y for x, y in zip(p, r))
            out[key] = out.get(key, 0.0) + pv * rv
    if isinstance(P, LatticeDist) and isinstance(Q, LatticeDist):
        return LatticeDist(out, tol=1e-10)
    return SignedLatticeSeq(out, q=P.q)


def d_ab(Q: SignedLatticeSeq, a: int, b: int) -> float:
    """Summed absolute successive differences of Q along e_b - e_a (0-based symbols)."""
    if a == b:
        raise ValueError("d_ab needs two distinct symbols")
    q = Q.q
    if q is None:
        return 0.0
    if not (0 <= a < q and 0 <= b < q):
        raise ValueError(f"symbols must lie in [0, {q - 1}]")
    diff: dict[Point, float] = {}
    for p, v in Q.items():
        up_b = p[:b] + (p[b] + 1,) + p[b + 1:]
        up_a = p[:a] + (p[a] + 1,) + p[a + 1:]
        diff[up_b] = diff.get(up_b, 0.0) + v
        diff[up_a] = diff.get(up_a, 0.0) - v
    return math.fsum(abs(v) for v in diff.values())


def _check_M(M: int) -> None:
    if M < 1:
        raise ValueError(f"M must be >= 1, got {M}")


def _floor_numerator(mass: float, M: int) -> int:
    """floor(M*mass), snapping to the nearest integer when within tolerance."""
    if isinstance(mass, Fraction):
        return math.floor(mass * M)
    scaled = mass * M
    nearest = round(scaled)
    if abs(scaled - nearest) <= MTYPE_TOL * M:
        return int(nearest)
    return math.floor(scaled)


def is_m_type(Q: SignedLatticeSeq, M: int) -> bool:
    _check_M(M)
    for _, v in Q.items():
        scaled = v * M
        if abs(scaled - round(scaled)) > MTYPE_TOL * M:
            return False
    return True


def residual(Q: SignedLatticeSeq, M: int) -> SignedLatticeSeq:
    """Per-point mass minus its floor to a multiple of 1/M."""
    _check_M(M)
    out = {}
    for p, v in Q.items():
        k = _floor_numerator(v, M)
        out[p] = v - Fraction(k, M) if isinstance(v, Fraction) else v - k / M
    return SignedLatticeSeq(out, q=Q.q)


@dataclass(frozen=True)
class AtomicShift:
    """Move ``mass`` from symbol ``src`` to symbol ``dst`` (0-based symbols)."""

    src: int
    dst: int
    mass: float

    def __post_init__(self) -> None:
        if self.src == self.dst:
            raise ValueError("an atomic shift needs distinct symbols")
        if not self.mass > 0:
            raise ValueError("an atomic shift needs positive mass")


def _check_prob_vector(u: Sequence, name: str) -> None:
    if any(x < 0 for x in u):
        raise ValueError(f"{name} has a negative entry")
    if abs(float(sum(u)) - 1.0) > SUM_TOL:
        raise ValueError(f"{name} does not sum to 1")


def atomic_decomposition(u: Sequence, v: Sequence) -> list[AtomicShift]:
    """Split the move from u to v into single-symbol shifts.

    Each step takes the smallest-index symbol with surplus (u_c > v_c) and the
    smallest-index symbol with deficit, and moves the smaller of the two gaps.
    Works with floats or exact Fractions.
    """
    if len(u) != len(v):
        raise ValueError("u and v differ in length")
    _check_prob_vector(u, "u")
    _check_prob_vector(v, "v")
    cur = list(u)
    exact = all(isinstance(x, (int, Fraction)) for x in list(u) + list(v))
    tol = 0 if exact else 1e-15
    shifts: list[AtomicShift] = []
    for _ in range(2 * len(u)):
        plus = [i for i in range(len(u)) if cur[i] - v[i] > tol]
        minus = [i for i in range(len(u)) if v[i] - cur[i] > tol]
        if not plus or not minus:
            break
        c, c2 = plus[0], minus[0]
        gap_src, gap_dst = cur[c] - v[c], v[c2] - cur[c2]
        alpha = min(gap_src, gap_dst)
        shifts.append(AtomicShift(c, c2, alpha))
        # Whichever gap was the minimum closes exactly.
        if gap_src <= gap_dst:
            cur[c] = v[c]
            cur[c2] = cur[c2] + alpha
        else:
            cur[c] = cur[c] - alpha
            cur[c2] = v[c2]
    return shifts


def apply_shifts(u: Sequence, shifts: Iterable[AtomicShift]) -> list:
    out = list(u)
    for s in shifts:
        out[s.src] -= s.mass
        out[s.dst] += s.mass
    return out


@dataclass(frozen=True)
class MTypeDist:
    """An exactly M-type distribution: integer numerators over a common M."""

    M: int
    numerators: Mapping[Point, int]

    def __post_init__(self) -> None:
        _check_M(self.M)
        nums = {_point(p): int(k) for p, k in self.numerators.items() if k != 0}
        if any(k < 0 for k in nums.values()):
            raise ValueError("negative numerator")
        if sum(nums.values()) != self.M:
            raise ValueError(f"numerators sum to {sum(nums.values())}, not M={self.M}")
        object.__setattr__(self, "numerators", nums)

    def key(self) -> tuple:
        """Hashable identity used for exact collision bucketing."""
        return (self.M, tuple(sorted(self.numerators.items())))

    def __hash__(self) -> int:
        return hash(self.key())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, MTypeDist) and self.key() == other.key()

    def to_dist(self) -> LatticeDist:
        return LatticeDist({p: k / self.M for p, k in self.numerators.items()})

    def to_json(self) -> str:
        rows = [{"point": list(p), "k": k} for p, k in sorted(self.numerators.items())]
        return json.dumps({"M": self.M, "numerators": rows})

    @classmethod
    def from_json(cls, text: str) -> "MTypeDist":
        obj = json.loads(text)
        return cls(int(obj["M"]), {_point(r["point"]): int(r["k"]) for r in obj["numerators"]})
