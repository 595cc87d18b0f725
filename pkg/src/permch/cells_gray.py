"""Cubic cells over the composition lattice and a Gray-like ordering of their indices.

A cell index l has q-1 entries in [1, nu] (1-based) and holds the compositions
t with (l_i - 1) a <= t_i <= l_i a - 1 on the first q-1 coordinates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .compositions import Composition, d_c, iter_compositions

CellIndex = tuple[int, ...]


@dataclass(frozen=True)
class CellPartition:
    n: int
    q: int
    a: int

    def __post_init__(self) -> None:
        if self.q < 2:
            raise ValueError("q must be >= 2")
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if self.a < 1:
            raise ValueError(f"cell side must be >= 1, got a={self.a}")

    @property
    def nu(self) -> int:
        """Cells per axis, ceil((n+1)/a)."""
        return math.ceil((self.n + 1) / self.a)

    @property
    def m(self) -> int:
        return self.q - 1

    @property
    def budget(self) -> int:
        """Largest index sum of a nonempty cell, floor(n/a) + q - 1."""
        return self.n // self.a + self.q - 1


def cell_of(t: Composition | Sequence[int], part: CellPartition) -> CellIndex:
    counts = tuple(t)
    if len(counts) != part.q or sum(counts) != part.n:
        raise ValueError(f"{counts} is not a composition for q={part.q}, n={part.n}")
    return tuple(c // part.a + 1 for c in counts[:-1])


def _check_index(l: Sequence[int], part: CellPartition) -> None:
    if len(l) != part.m:
        raise ValueError(f"cell index needs {part.m} entries, got {len(l)}")
    if any(not 1 <= x <= part.nu for x in l):
        raise ValueError(f"cell index {tuple(l)} outside [1, {part.nu}]")


def is_nonempty(l: Sequence[int], part: CellPartition) -> bool:
    _check_index(l, part)
    s = sum(l)
    return part.q - 1 <= s and (s - (part.q - 1)) * part.a <= part.n


def cell_members(part: CellPartition) -> dict[CellIndex, list[Composition]]:
    """Exhaustive membership: every nonempty cell mapped to its compositions (rank order)."""
    cells: dict[CellIndex, list[Composition]] = {}
    for t in iter_compositions(part.q, part.n):
        cells.setdefault(cell_of(t, part), []).append(t)
    return cells


def are_adjacent(l: Sequence[int], l2: Sequence[int]) -> bool:
    """A unit step in one coordinate, or a +1/-1 swap between two coordinates."""
    if len(l) != len(l2):
        raise ValueError("cell indices differ in dimension")
    diff = [x - y for x, y in zip(l, l2)]
    return any(diff) and abs(sum(diff)) <= 1 and sum(abs(d) for d in diff) <= 2


def index_set(m: int, s: int, nu: int) -> list[CellIndex]:
    """V(m, s): all l in [1, nu]^m with sum at most s (unordered)."""
    out: list[CellIndex] = []

    def rec(prefix: tuple[int, ...], left: int, k: int) -> None:
        if k == 0:
            out.append(prefix)
            return
        for x in range(1, min(nu, left - (k - 1)) + 1):
            rec(prefix + (x,), left - x, k - 1)

    rec((), s, m)
    return out


def gray_order(m: int, s: int, nu: int) -> list[CellIndex]:
    """Order V(m, s) so that consecutive indices are adjacent.

    Slices by first coordinate x are visited in increasing order; odd slices
    use the recursive ordering of the remaining coordinates, even slices its
    reverse.  Starts at (1,...,1); when s-m+1 <= nu it ends at (s-m+1, 1,...,1).
    """
    if m < 1 or nu < 1:
        raise ValueError("need m >= 1 and nu >= 1")
    if not m <= s <= m * nu:
        raise ValueError(f"need m <= s <= m*nu, got m={m}, s={s}, nu={nu}")
    return list(_gray(m, s, nu))


@lru_cache(maxsize=None)
def _gray(m: int, s: int, nu: int) -> tuple[CellIndex, ...]:
    if m == 1:
        return tuple((x,) for x in range(1, min(s, nu) + 1))
    out: list[CellIndex] = []
    for x in range(1, min(nu, s - m + 1) + 1):
        sub = _gray(m - 1, min(s - x, (m - 1) * nu), nu)
        if x % 2 == 0:
            sub = sub[::-1]
        out.extend((x,) + g for g in sub)
    return tuple(out)


def partition_order(part: CellPartition) -> list[CellIndex]:
    """Gray-like ordering of exactly the nonempty cells of the partition."""
    order = gray_order(part.m, part.budget, part.nu)
    for l in order:
        if not is_nonempty(l, part):
            raise AssertionError(f"ordering visits empty cell {l}")
    return order


def cell_distance_bound(part: CellPartition) -> float:
    return part.a / 2 * (2 * part.q + 1)


def cell_distance_bound_check(
    l: Sequence[int], l2: Sequence[int], part: CellPartition, members: dict | None = None
) -> tuple[int, float, bool]:
    """Largest d_c between members of two cells, against (a/2)(2q+1)."""
    members = members if members is not None else cell_members(part)
    A = members.get(tuple(l), [])
    B = members.get(tuple(l2), [])
    worst = max((d_c(t, s) for t in A for s in B), default=0)
    bound = cell_distance_bound(part)
    return worst, bound, worst <= bound


def order_to_json(order: Sequence[CellIndex]) -> str:
    return json.dumps([list(l) for l in order])
