"""The composition lattice: nonnegative integer q-vectors with a fixed sum n.

Compositions are ranked colexicographically on their first q-1 coordinates
(coordinate q-1 is most significant, the last coordinate is implied).
Symbols are 0-based: ``counts[i]`` is the number of occurrences of symbol i.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .config import LATTICE_CAP, CapExceededError


@dataclass(frozen=True, order=True)
class Composition:
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        counts = tuple(int(c) for c in self.counts)
        if len(counts) < 2:
            raise ValueError("a composition needs q >= 2 coordinates")
        if any(c < 0 for c in counts):
            raise ValueError(f"negative count in {counts}")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def of(cls, counts: Iterable[int]) -> "Composition":
        return cls(tuple(counts))

    @property
    def q(self) -> int:
        return len(self.counts)

    @property
    def n(self) -> int:
        return sum(self.counts)

    def __len__(self) -> int:
        return len(self.counts)

    def __iter__(self) -> Iterator[int]:
        return iter(self.counts)

    def __getitem__(self, i: int) -> int:
        return self.counts[i]

    def to_json(self) -> str:
        return json.dumps(list(self.counts))

    def to_csv(self) -> str:
        return ",".join(str(c) for c in self.counts)


def _as_counts(t: Composition | Sequence[int]) -> tuple[int, ...]:
    if isinstance(t, Composition):
        return t.counts
    return Composition(tuple(t)).counts


def lattice_size(q: int, n: int) -> int:
    """Number of compositions of n into q parts, C(n+q-1, q-1)."""
    _check_qn(q, n)
    return math.comb(n + q - 1, q - 1)


def _check_qn(q: int, n: int) -> None:
    if q < 2:
        raise ValueError(f"alphabet size must be >= 2, got q={q}")
    if n < 0:
        raise ValueError(f"block length must be >= 0, got n={n}")


def _iter_prefix(m: int, budget: int) -> Iterator[tuple[int, ...]]:
    """All m-vectors with sum <= budget, colex order."""
    if m == 0:
        yield ()
        return
    for top in range(budget + 1):
        for rest in _iter_prefix(m - 1, budget - top):
            yield rest + (top,)


def iter_compositions(q: int, n: int) -> Iterator[Composition]:
    _check_qn(q, n)
    for head in _iter_prefix(q - 1, n):
        yield Composition(head + (n - sum(head),))


def enumerate_compositions(q: int, n: int, cap: int = LATTICE_CAP) -> list[Composition]:
    """All compositions of n into q parts, in rank order."""
    size = lattice_size(q, n)
    if size > cap:
        raise CapExceededError(f"|N_{{{q},{n}}}| = {size} exceeds cap {cap}")
    return list(iter_compositions(q, n))


def rank(t: Composition | Sequence[int]) -> int:
    counts = _as_counts(t)
    q = len(counts)
    remaining = sum(counts)
    r = 0
    # Walk from the most significant coordinate (index q-2) down to index 0.
    for k in range(q - 1, 0, -1):
        tk = counts[k - 1]
        r += math.comb(remaining + k, k) - math.comb(remaining - tk + k, k)
        remaining -= tk
    return r


def unrank(index: int, q: int, n: int) -> Composition:
    size = lattice_size(q, n)
    if not 0 <= index < size:
        raise ValueError(f"rank {index} outside [0, {size - 1}]")
    head = [0] * (q - 1)
    remaining = n
    for k in range(q - 1, 0, -1):
        # Number of (k-1)-prefixes with sum <= m is C(m+k-1, k-1).
        v = 0
        while True:
            block = math.comb(remaining - v + k - 1, k - 1)
            if index < block:
                break
            index -= block
            v += 1
        head[k - 1] = v
        remaining -= v
    return Composition(tuple(head) + (remaining,))


def d_c(t: Composition | Sequence[int], s: Composition | Sequence[int]) -> int:
    """Composition distance: half the l1 distance between count vectors."""
    a, b = _as_counts(t), _as_counts(s)
    if len(a) != len(b):
        raise ValueError(f"alphabet mismatch: q={len(a)} vs q={len(b)}")
    if sum(a) != sum(b):
        raise ValueError(f"block length mismatch: n={sum(a)} vs n={sum(b)}")
    return sum(abs(x - y) for x, y in zip(a, b)) // 2


def type_class_size(t: Composition | Sequence[int]) -> int:
    """Number of length-n sequences with composition t (a multinomial coefficient)."""
    counts = _as_counts(t)
    out = math.factorial(sum(counts))
    for c in counts:
        out //= math.factorial(c)
    return out


def size_bounds(q: int, n: int) -> tuple[float, float]:
    """Lower and upper bounds n^(q-1)/(q-1)! and (2n)^(q-1), valid for n >= q-1."""
    _check_qn(q, n)
    return n ** (q - 1) / math.factorial(q - 1), float((2 * n) ** (q - 1))


def parse_composition(text: str) -> Composition:
    """Accepts a JSON array ``[3,0,1]`` or a comma-joined row ``3,0,1``."""
    text = text.strip()
    if text.startswith("["):
        return Composition(tuple(json.loads(text)))
    return Composition(tuple(int(x) for x in text.split(",")))
