"""Finite-n checks of the output-sensitivity lemmas and the converse mechanics.

Every inequality here is evaluated on exactly computed output distributions.
Constants that only exist asymptotically are measured, never assumed: the
single-step envelope is the largest output TV over all neighbouring inputs.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .channel import Dmc, OutputGridFactory, QnccKernel, qncc_kernel, single_trial_step
from .compositions import Composition, d_c, enumerate_compositions, lattice_size, rank
from .idcode import IdCode, converse_tv_bound, eval_id_errors, packing_min_distance
from .lattice_dist import LatticeDist
from .quantizer import count_m_type, exact_m_type_count, quantize_qary

SLACK = 1e-12


@dataclass
class CheckRow:
    check: str
    q: int
    n: int
    param: str
    value: float
    bound: float
    passed: bool

    @property
    def ratio(self) -> float:
        return self.value / self.bound if self.bound else math.inf


def log_factor(n: int, q: int) -> float:
    """(log n)^{(q-2)/2}."""
    return math.log2(n) ** ((q - 2) / 2)


def normalized(tv: float, n: int, q: int) -> float:
    return tv * math.sqrt(n) / log_factor(n, q)


# ------------------------------------------------------------ single shift


@dataclass
class SingleShiftReport:
    q: int
    n: int
    max_tv: float
    ratio: float
    worst: tuple[tuple[int, ...], int, int]
    evaluated: int


def check_single_shift(U: Dmc, n: int, samples: int | None = None, seed: int = 0) -> SingleShiftReport:
    """Largest TV(W_{(x,a)}, W_{(x,b)}) over prefixes x of length n-1 and symbols a != b.

    Only the composition of x matters, so prefixes are enumerated by composition;
    ``samples`` draws that many compositions at random instead.
    """
    if n < 2:
        raise ValueError("single-shift check needs n >= 2")
    q = U.q
    prefixes = enumerate_compositions(q, n - 1)
    if samples is not None and samples < len(prefixes):
        rng = np.random.default_rng(seed)
        prefixes = [prefixes[i] for i in rng.choice(len(prefixes), size=samples, replace=False)]
    factory = OutputGridFactory(U, n)
    best, worst = 0.0, ((0,) * q, 0, 0)
    for t in prefixes:
        base = factory.grid(t.counts)
        ext = [single_trial_step(base, U.U[a]) for a in range(q)]
        for a, b in itertools.combinations(range(q), 2):
            tv = 0.5 * float(np.abs(ext[a] - ext[b]).sum())
            if tv > best:
                best, worst = tv, (t.counts, a, b)
    return SingleShiftReport(q, n, best, normalized(best, n, q), worst, len(prefixes))


@dataclass
class SweepResult:
    reports: list
    ok: bool
    first_ratio: float
    last_ratio: float


def single_shift_sweep(U: Dmc, ns: Sequence[int], samples: int | None = None) -> SweepResult:
    """Non-explosion: the normalized ratio at the largest n is at most twice the one at the smallest n."""
    ns = sorted(ns)
    reports = [check_single_shift(U, n, samples) for n in ns]
    first, last = reports[0].ratio, reports[-1].ratio
    return SweepResult(reports, last <= 2 * first, first, last)


# ------------------------------------------------------- distance scaling


def neighbor_step_max(kernel: QnccKernel) -> float:
    """Largest output TV between compositions at d_c = 1, over the whole lattice."""
    K = kernel.matrix
    q = kernel.q
    best = 0.0
    for t in kernel.compositions:
        i = rank(t)
        for a, b in itertools.permutations(range(q), 2):
            if t.counts[a] == 0:
                continue
            s = list(t.counts)
            s[a] -= 1
            s[b] += 1
            j = rank(s)
            if j > i:
                best = max(best, 0.5 * float(np.abs(K[i] - K[j]).sum()))
    return best


@dataclass
class DistanceScalingReport:
    q: int
    n: int
    step_max: float
    step_ratio: float
    pairs: int
    max_pair_ratio: float
    violations: int
    ok: bool


def check_distance_scaling(
    U: Dmc,
    n: int,
    pairs: Sequence[tuple[Sequence[int], Sequence[int]]] | None = None,
    kernel: QnccKernel | None = None,
) -> DistanceScalingReport:
    """TV(W_t1, W_t2) / d_c(t1, t2) never exceeds the largest neighbour TV.

    With ``pairs`` None every unordered pair of the lattice is checked.
    """
    K = kernel if kernel is not None else qncc_kernel(U, n)
    step = neighbor_step_max(K)
    if pairs is None:
        pairs = itertools.combinations([c.counts for c in K.compositions], 2)
    worst, count, bad = 0.0, 0, 0
    for t1, t2 in pairs:
        d = d_c(t1, t2)
        if d == 0:
            continue
        tv = 0.5 * float(np.abs(K.matrix[rank(t1)] - K.matrix[rank(t2)]).sum())
        ratio = tv / d
        worst = max(worst, ratio)
        count += 1
        if ratio > step * (1 + SLACK) + SLACK:
            bad += 1
    return DistanceScalingReport(U.q, n, step, normalized(step, n, U.q), count, worst, bad, bad == 0)


# -------------------------------------------------------- weight transfer


@dataclass
class WeightTransferReport:
    tv: float
    bound: float
    C4_emp: float
    moved_distance: float
    ok: bool


def check_weight_transfer(
    U: Dmc,
    n: int,
    Q1: LatticeDist,
    shifts: Sequence[tuple[float, Sequence[int], Sequence[int]]],
    kernel: QnccKernel | None = None,
) -> WeightTransferReport:
    """Moving mass p_i from t_i to t'_i changes the output by at most
    C4_emp (log n)^{(q-2)/2} / sqrt(n) * sum p_i d_c(t_i, t'_i), with C4_emp the
    measured single-step envelope for the same (U, n).
    """
    K = kernel if kernel is not None else qncc_kernel(U, n)
    v1 = K.dist_to_vector(Q1)
    v2 = v1.copy()
    moved = 0.0
    for p, t, t2 in shifts:
        if p < 0:
            raise ValueError("shift masses must be nonnegative")
        v2[rank(t)] -= p
        v2[rank(t2)] += p
        moved += p * d_c(t, t2)
    if (v2 < -SLACK).any():
        raise ValueError("shifts move more mass than is present")
    step = neighbor_step_max(K)
    C4 = normalized(step, n, U.q)
    bound = C4 * log_factor(n, U.q) / math.sqrt(n) * moved
    tv = 0.5 * float(np.abs((v1 - v2) @ K.matrix).sum())
    return WeightTransferReport(tv, bound, C4, moved, tv <= bound * (1 + SLACK) + SLACK)


# ---------------------------------------------------- collision / converse


def random_lattice_dist(
    q: int, n: int, rng: np.random.Generator, support: Sequence[int] | None = None, concentration: float = 1.0
) -> LatticeDist:
    """Dirichlet masses on the given ranks (the whole lattice by default)."""
    comps = enumerate_compositions(q, n)
    idx = list(range(len(comps))) if support is None else list(support)
    p = rng.dirichlet(np.full(len(idx), concentration))
    return LatticeDist({comps[i].counts: float(v) for i, v in zip(idx, p) if v > 0}, tol=1e-10)


@dataclass
class CollisionReport:
    num_dists: int
    M: int
    a: int
    delta: float
    counting_bound: int
    exact_count: int
    pigeonhole_guaranteed: bool
    buckets: int
    colliding_pairs: int
    max_collision_tv: float
    violations: int
    implied_error_floor: float
    ok: bool


def resolvability_collision_demo(
    U: Dmc,
    n: int,
    c: float | None = None,
    num_dists: int = 100,
    seed: int = 0,
    M: int | None = None,
    support_size: int | None = None,
    concentration: float = 1.0,
    kernel: QnccKernel | None = None,
    dists: Sequence[LatticeDist] | None = None,
) -> CollisionReport:
    """Quantize many input distributions and inspect exact M-type collisions.

    Two inputs with the same quantized output have induced output distributions
    within 2 delta of each other, delta being the largest measured distortion,
    so any ID code using both as encoders has lambda_1 + lambda_2 >= 1 - 4 delta.
    """
    K = kernel if kernel is not None else qncc_kernel(U, n)
    rng = np.random.default_rng(seed)
    size = lattice_size(U.q, n)
    support = None
    if support_size is not None and support_size < size:
        support = sorted(rng.choice(size, size=support_size, replace=False).tolist())
    if dists is None:
        dists = [random_lattice_dist(U.q, n, rng, support, concentration) for _ in range(num_dists)]
    results = [quantize_qary(Q, c=c, M=M) for Q in dists]
    ops = np.array([K.dist_to_vector(Q) @ K.matrix for Q in dists])
    deltas = [r.distortion(K).measured_tv for r in results]
    delta = max(deltas)
    Mq, a = results[0].params.M, results[0].params.a
    buckets: dict = {}
    for i, r in enumerate(results):
        buckets.setdefault(r.mtype.key(), []).append(i)
    pairs, worst, bad = 0, 0.0, 0
    for members in buckets.values():
        for j, k in itertools.combinations(members, 2):
            tv = 0.5 * float(np.abs(ops[j] - ops[k]).sum())
            pairs += 1
            worst = max(worst, tv)
            if tv > 2 * delta + SLACK:
                bad += 1
    bound = count_m_type(n, U.q, Mq)
    exact = exact_m_type_count(n, U.q, Mq)
    guaranteed = len(dists) > exact
    ok = bad == 0 and (pairs > 0 or not guaranteed)
    return CollisionReport(
        len(dists), Mq, a, delta, bound, exact, guaranteed, len(buckets), pairs, worst, bad, 1 - 4 * delta, ok
    )


@dataclass
class ConverseChainReport:
    min_distance: int
    packing_bound: float
    min_output_tv: float
    tv_bound: float
    lam_sum: float
    lam_floor: float
    packing_ok: bool
    tv_ok: bool
    lam_ok: bool

    @property
    def ok(self) -> bool:
        return self.packing_ok and self.tv_ok and self.lam_ok


def check_converse_chain(
    code: IdCode, codewords: Sequence[Composition], kernel: QnccKernel, step_max: float | None = None
) -> ConverseChainReport:
    """Packing forces two close codewords, hence close outputs, hence large errors.

    Each of the three links is checked separately for a point-mass code.
    """
    pack = packing_min_distance(codewords)
    step = neighbor_step_max(kernel) if step_max is None else step_max
    tv_bound = step * pack.bound
    conv = converse_tv_bound(code, kernel)
    errs = eval_id_errors(code, kernel)
    lam_sum = errs.lam1 + errs.lam2
    floor = 1 - 2 * tv_bound
    return ConverseChainReport(
        pack.min_distance,
        pack.bound,
        conv.min_tv,
        tv_bound,
        lam_sum,
        floor,
        pack.ok,
        conv.min_tv <= tv_bound + SLACK,
        lam_sum >= floor - SLACK,
    )


# ---------------------------------------------------------------- reports


@dataclass
class SuiteResult:
    rows: list[CheckRow] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.rows)

    def add(self, *rows: CheckRow) -> None:
        self.rows.extend(rows)

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["check", "q", "n", "param", "value", "bound", "pass"])
            for r in self.rows:
                w.writerow([r.check, r.q, r.n, r.param, f"{r.value:.12g}", f"{r.bound:.12g}", r.passed])

    def summary(self) -> dict:
        return {
            "ok": self.ok,
            "checks": len(self.rows),
            "failed": [asdict(r) for r in self.rows if not r.passed],
        }

    def write_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)


def run_suite(U: Dmc, ns: Sequence[int], seed: int = 0, suites: Sequence[str] = ("all",)) -> SuiteResult:
    """The shift, distance, weight-transfer and collision checks over an n grid."""
    want = set(suites)
    every = "all" in want
    q = U.q
    out = SuiteResult()
    rng = np.random.default_rng(seed)
    if every or "single-shift" in want:
        sweep = single_shift_sweep(U, ns)
        for r in sweep.reports:
            out.add(CheckRow("single_shift_ratio", q, r.n, "", r.ratio, 2 * sweep.first_ratio, r.ratio <= 2 * sweep.first_ratio))
    for n in sorted(ns):
        if lattice_size(q, n) > 600:
            continue
        K = qncc_kernel(U, n)
        if every or "distance" in want:
            pairs = None
            if lattice_size(q, n) > 80:
                comps = [c.counts for c in K.compositions]
                picks = rng.choice(len(comps), size=(400, 2))
                pairs = [(comps[i], comps[j]) for i, j in picks]
            rep = check_distance_scaling(U, n, pairs, kernel=K)
            out.add(CheckRow("distance_scaling", q, n, f"pairs={rep.pairs}", rep.max_pair_ratio, rep.step_max, rep.ok))
        if every or "weight-transfer" in want:
            Q1 = random_lattice_dist(q, n, rng)
            support = list(Q1)
            comps = [c.counts for c in K.compositions]
            shifts = []
            for _ in range(5):
                t = support[rng.integers(len(support))]
                t2 = comps[rng.integers(len(comps))]
                shifts.append((Q1[t] / 5, t, t2))
            wt = check_weight_transfer(U, n, Q1, shifts, kernel=K)
            out.add(CheckRow("weight_transfer", q, n, "shifts=5", wt.tv, wt.bound, wt.ok))
        if (every or "collision" in want) and n >= 4:
            col = resolvability_collision_demo(U, n, c=4.0, num_dists=60, seed=seed, support_size=3, kernel=K)
            out.add(CheckRow("collision_tv", q, n, f"M={col.M},pairs={col.colliding_pairs}", col.max_collision_tv, 2 * col.delta, col.ok))
    return out


def parse_n_grid(text: str) -> list[int]:
    """``8..64`` doubles from 8 to 64; ``8,12,20`` is an explicit list."""
    text = text.strip()
    if ".." in text:
        lo, hi = (int(x) for x in text.split(".."))
        if lo < 1 or hi < lo:
            raise ValueError(f"bad n range {text!r}")
        out, n = [], lo
        while n <= hi:
            out.append(n)
            n *= 2
        return out
    return sorted(int(x) for x in text.split(","))
