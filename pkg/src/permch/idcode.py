"""Identification codes over the composition channel: construction and error evaluation.

Codes are stored densely against the rank order of the composition lattice:
an encoder is a row distribution over input compositions and a decoder is a
row of acceptance probabilities over output compositions.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import binomtest

from .channel import Dmc, QnccKernel, qncc_kernel, sample_sigma, sorted_representative
from .compositions import Composition, d_c, enumerate_compositions, rank, type_class_size
from .config import BRUTE_FORCE_CAP, CapExceededError


# ---------------------------------------------------------------- set systems


def set_system_condition(eps: float, lam: float) -> tuple[bool, bool]:
    """(lam * log2(1/eps - 1) > 2, eps < 1/6)."""
    return lam * math.log2(1 / eps - 1) > 2, eps < 1 / 6


def guaranteed_count(N: int, eps: float) -> int:
    """ceil(2^{eps N - 1} / N), the number of subsets an existence argument promises."""
    return math.ceil(2 ** (eps * N - 1) / N)


@dataclass
class SetSystem:
    N: int
    subsets: list[frozenset[int]]
    eps: float
    lam: float
    condition_lam: bool
    condition_eps: bool

    @property
    def L(self) -> int:
        return len(self.subsets)

    @property
    def subset_size(self) -> int:
        return math.floor(self.eps * self.N)

    @property
    def max_intersection(self) -> int:
        return max((len(a & b) for a, b in itertools.combinations(self.subsets, 2)), default=0)

    def overlap_ratio(self) -> float:
        """max_{i != j} |U_i & U_j| / |U_i|."""
        return self.max_intersection / self.subset_size

    def verify(self) -> bool:
        k = self.subset_size
        limit = self.lam * self.eps * self.N
        if any(len(s) != k or not s <= set(range(self.N)) for s in self.subsets):
            return False
        return all(len(a & b) <= limit for a, b in itertools.combinations(self.subsets, 2))

    def to_json(self) -> str:
        return json.dumps(
            {"N": self.N, "eps": self.eps, "lam": self.lam, "subsets": [sorted(s) for s in self.subsets]}
        )


def build_set_system(
    N: int,
    eps: float,
    lam: float,
    seed: int = 0,
    max_tries: int = 100_000,
    target: int | None = None,
) -> SetSystem:
    """Random greedy search for floor(eps N)-subsets with pairwise intersections <= lam eps N.

    Stops once ``target`` subsets are found (default: the guaranteed count) and
    raises if the search gives up first.
    """
    cond_lam, cond_eps = set_system_condition(eps, lam)
    if not (cond_lam and cond_eps):
        raise ValueError(f"need lam*log2(1/eps-1) > 2 and eps < 1/6 (eps={eps}, lam={lam})")
    k = math.floor(eps * N)
    if k < 1:
        raise ValueError(f"subset size floor(eps*N) = {k} is below 1")
    goal = guaranteed_count(N, eps) if target is None else target
    limit = lam * eps * N
    rng = np.random.default_rng(seed)
    chosen: list[frozenset[int]] = []
    seen: set[frozenset[int]] = set()
    for _ in range(max_tries):
        if len(chosen) >= goal:
            break
        cand = frozenset(int(x) for x in rng.choice(N, size=k, replace=False))
        if cand in seen:
            continue
        seen.add(cand)
        if all(len(cand & s) <= limit for s in chosen):
            chosen.append(cand)
    if len(chosen) < goal:
        raise RuntimeError(f"found {len(chosen)} of {goal} subsets in {max_tries} tries")
    sys = SetSystem(N, chosen, eps, lam, cond_lam, cond_eps)
    if not sys.verify():
        raise AssertionError("set system failed verification")
    return sys


def achievability_parameters(N: int, r: int, c: float, eps_n: float) -> tuple[float, float]:
    """eps' = (r-1)! c^{(r-1)/2} eps_n + 1/N + log2(N)/N and lam' = 4 / log2(1/eps')."""
    eps_p = math.factorial(r - 1) * c ** ((r - 1) / 2) * eps_n + 1 / N + math.log2(N) / N
    lam_p = 4 / math.log2(1 / eps_p) if eps_p < 1 else math.inf
    return eps_p, lam_p


# ---------------------------------------------------------- reliable codes


def wilson_interval(errors: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    ci = binomtest(errors, trials).proportion_ci(confidence_level=level, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass
class ReliableCode:
    q: int
    n: int
    codewords: list[Composition]
    decoder: np.ndarray  # output rank -> message index
    kernel: QnccKernel | None = field(default=None, repr=False)
    method: str = "ml"

    @property
    def N(self) -> int:
        return len(self.codewords)

    def decode(self, w: Sequence[int]) -> int:
        return int(self.decoder[rank(w)])

    def exact_errors(self, kernel: QnccKernel | None = None) -> np.ndarray:
        K = kernel if kernel is not None else self.kernel
        if K is None:
            raise ValueError("exact errors need a kernel")
        out = np.empty(self.N)
        for i, c in enumerate(self.codewords):
            row = K.matrix[rank(c)]
            out[i] = 1.0 - float(row[self.decoder == i].sum())
        return out

    def exact_pe(self, kernel: QnccKernel | None = None) -> float:
        """Maximal error probability over messages."""
        return float(self.exact_errors(kernel).max())

    def monte_carlo(self, U: Dmc, trials: int, seed: int = 0) -> "McErrors":
        rng = np.random.default_rng(seed)
        rates, lows, highs = [], [], []
        for i, c in enumerate(self.codewords):
            y = sample_sigma(U, sorted_representative(c.counts), rng, trials=trials)
            counts = np.stack([(y == a).sum(axis=1) for a in range(self.q)], axis=1)
            decoded = np.array([self.decoder[rank(tuple(row))] for row in counts])
            errs = int((decoded != i).sum())
            lo, hi = wilson_interval(errs, trials)
            rates.append(errs / trials)
            lows.append(lo)
            highs.append(hi)
        return McErrors(np.array(rates), np.array(lows), np.array(highs), trials)

    def to_json(self) -> str:
        return json.dumps(
            {"q": self.q, "n": self.n, "method": self.method,
             "codewords": [list(c.counts) for c in self.codewords],
             "decoder": [int(x) for x in self.decoder]}
        )


@dataclass
class McErrors:
    rates: np.ndarray
    low: np.ndarray
    high: np.ndarray
    trials: int

    @property
    def pe(self) -> float:
        return float(self.rates.max())


def grid_codewords(q: int, n: int, spacing: int) -> list[Composition]:
    """Compositions whose first q-1 counts are multiples of ``spacing``."""
    if spacing < 1:
        raise ValueError(f"spacing must be >= 1, got {spacing}")
    return [t for t in enumerate_compositions(q, n) if all(x % spacing == 0 for x in t.counts[:-1])]


def ml_decoder(kernel: QnccKernel, codewords: Sequence[Composition]) -> np.ndarray:
    rows = kernel.matrix[[rank(c) for c in codewords]]
    return np.argmax(rows, axis=0)


def nearest_decoder(U: Dmc, n: int, codewords: Sequence[Composition]) -> np.ndarray:
    """Closest codeword by half-l1 distance between w and the mean output t U."""
    outs = enumerate_compositions(U.q, n)
    means = np.array([np.asarray(c.counts, dtype=float) @ U.U for c in codewords])
    W = np.array([w.counts for w in outs], dtype=float)
    dist = 0.5 * np.abs(W[:, None, :] - means[None, :, :]).sum(axis=2)
    return np.argmin(dist, axis=1)


def build_reliable_code(
    U: Dmc,
    n: int,
    spacing: int,
    decoder: str = "ml",
    kernel: QnccKernel | None = None,
    codewords: Sequence[Composition] | None = None,
) -> ReliableCode:
    """Grid-spaced codewords with maximum-likelihood or nearest-mean decoding."""
    cws = list(codewords) if codewords is not None else grid_codewords(U.q, n, spacing)
    if not cws:
        raise ValueError("no codewords fit in the lattice")
    if len(set(cws)) != len(cws):
        raise ValueError("codewords must be distinct")
    if decoder == "ml":
        if kernel is None:
            try:
                kernel = qncc_kernel(U, n)
            except CapExceededError:
                decoder = "nearest"
    if decoder == "ml":
        dec = ml_decoder(kernel, cws)
    elif decoder == "nearest":
        dec = nearest_decoder(U, n, cws)
    else:
        raise ValueError(f"unknown decoder {decoder!r}")
    return ReliableCode(U.q, n, cws, dec, kernel, decoder)


# ------------------------------------------------------------------ ID codes


@dataclass
class IdCode:
    q: int
    n: int
    encoders: np.ndarray  # (L, |N|) distributions over input compositions
    acceptance: np.ndarray  # (L, |N|) acceptance probability per output composition

    def __post_init__(self) -> None:
        if self.encoders.shape != self.acceptance.shape:
            raise ValueError("encoder and decoder tables differ in shape")
        if (self.encoders < 0).any() or np.abs(self.encoders.sum(axis=1) - 1).max() > 1e-10:
            raise ValueError("encoders must be distributions")
        if (self.acceptance < 0).any() or (self.acceptance > 1).any():
            raise ValueError("acceptance probabilities must lie in [0, 1]")

    @property
    def L(self) -> int:
        return self.encoders.shape[0]

    def to_json(self) -> str:
        comps = enumerate_compositions(self.q, self.n)

        def sparse(row):
            return [{"point": list(comps[k].counts), "p": float(v)} for k, v in enumerate(row) if v > 0]

        return json.dumps(
            {"q": self.q, "n": self.n,
             "encoders": [sparse(r) for r in self.encoders],
             "acceptance": [sparse(r) for r in self.acceptance]}
        )

    @classmethod
    def from_json(cls, text: str) -> "IdCode":
        obj = json.loads(text)
        q, n = int(obj["q"]), int(obj["n"])
        size = math.comb(n + q - 1, q - 1)

        def dense(rows):
            out = np.zeros((len(rows), size))
            for i, row in enumerate(rows):
                for entry in row:
                    out[i, rank(entry["point"])] = float(entry["p"])
            return out

        return cls(q, n, dense(obj["encoders"]), dense(obj["acceptance"]))


def _point_rows(q: int, n: int, indices: Sequence[Sequence[int]]) -> np.ndarray:
    size = math.comb(n + q - 1, q - 1)
    out = np.zeros((len(indices), size))
    for i, idx in enumerate(indices):
        out[i, list(idx)] = 1.0
    return out


def stochastic_id_code(rel: ReliableCode, sys: SetSystem) -> IdCode:
    """Message i sends a uniform codeword from U_i and accepts iff the decoded index is in U_i."""
    if sys.N != rel.N:
        raise ValueError(f"set system ground size {sys.N} != message count {rel.N}")
    size = len(rel.decoder)
    enc = np.zeros((sys.L, size))
    acc = np.zeros((sys.L, size))
    for i, sub in enumerate(sys.subsets):
        for m in sub:
            enc[i, rank(rel.codewords[m])] += 1.0 / len(sub)
        acc[i] = np.isin(rel.decoder, sorted(sub)).astype(float)
    return IdCode(rel.q, rel.n, enc, acc)


def deterministic_id_code(rel: ReliableCode) -> IdCode:
    enc = _point_rows(rel.q, rel.n, [[rank(c)] for c in rel.codewords])
    acc = np.stack([(rel.decoder == i).astype(float) for i in range(rel.N)])
    return IdCode(rel.q, rel.n, enc, acc)


@dataclass
class IdErrors:
    lam1: float
    lam2: float
    matrix: np.ndarray  # diagonal: missed identification; off-diagonal: false acceptance
    accept: np.ndarray  # accept[i, j] = P(decoder j accepts | message i sent)


def _errors_from_accept(A: np.ndarray) -> IdErrors:
    L = A.shape[0]
    mat = A.copy()
    np.fill_diagonal(mat, 1.0 - np.diag(A))
    lam1 = float(np.max(np.diag(mat)))
    off = mat[~np.eye(L, dtype=bool)]
    lam2 = float(off.max()) if off.size else 0.0
    return IdErrors(lam1, lam2, mat, A)


def eval_id_errors(code: IdCode, kernel: QnccKernel) -> IdErrors:
    if (code.q, code.n) != (kernel.q, kernel.n):
        raise ValueError("code and kernel disagree on (q, n)")
    out = code.encoders @ kernel.matrix
    return _errors_from_accept(out @ code.acceptance.T)


def monte_carlo_id_errors(code: IdCode, U: Dmc, trials: int, seed: int = 0) -> tuple[IdErrors, np.ndarray]:
    """Sampled error matrix and its per-entry standard errors."""
    rng = np.random.default_rng(seed)
    comps = enumerate_compositions(code.q, code.n)
    A = np.zeros((code.L, code.L))
    se = np.zeros_like(A)
    for i in range(code.L):
        picks = rng.choice(len(comps), size=trials, p=code.encoders[i])
        ranks = np.empty(trials, dtype=np.int64)
        for k in np.unique(picks):
            mask = picks == k
            y = sample_sigma(U, sorted_representative(comps[k].counts), rng, trials=int(mask.sum()))
            counts = np.stack([(y == a).sum(axis=1) for a in range(code.q)], axis=1)
            ranks[mask] = [rank(tuple(r)) for r in counts]
        vals = code.acceptance[:, ranks]  # (L, trials)
        A[i] = vals.mean(axis=1)
        se[i] = vals.std(axis=1, ddof=1) / math.sqrt(trials) if trials > 1 else 0.0
    return _errors_from_accept(A), se


def output_distributions(code: IdCode, kernel: QnccKernel) -> np.ndarray:
    return code.encoders @ kernel.matrix


@dataclass
class ConverseBound:
    value: float  # clamped at 0
    raw: float
    min_tv: float
    pair: tuple[int, int]


def converse_tv_bound(code: IdCode, kernel: QnccKernel) -> ConverseBound:
    """1 - 2 min_{j != k} TV between induced output distributions."""
    if code.L < 2:
        raise ValueError("need at least two messages")
    out = output_distributions(code, kernel)
    best, pair = math.inf, (0, 1)
    for j, k in itertools.combinations(range(code.L), 2):
        tv = 0.5 * float(np.abs(out[j] - out[k]).sum())
        if tv < best:
            best, pair = tv, (j, k)
    raw = 1 - 2 * best
    return ConverseBound(max(0.0, raw), raw, best, pair)


@dataclass
class PackingResult:
    min_distance: int
    bound: float
    ok: bool
    pair: tuple[int, int]


def packing_min_distance(codewords: Sequence[Composition | Sequence[int]]) -> PackingResult:
    """Smallest pairwise d_c against 2(q-1) n / |A|^{1/(q-1)}."""
    A = [Composition(tuple(c)) for c in codewords]
    if len(set(A)) != len(A):
        raise ValueError("codewords must be distinct")
    q, n = A[0].q, A[0].n
    if len(A) < 3 ** (q - 1):
        raise ValueError(f"need at least 3^(q-1) = {3 ** (q - 1)} codewords")
    if n < 3:
        raise ValueError("need n >= 3")
    best, pair = math.inf, (0, 1)
    for i, j in itertools.combinations(range(len(A)), 2):
        d = d_c(A[i], A[j])
        if d < best:
            best, pair = d, (i, j)
    bound = 2 * (q - 1) * n / len(A) ** (1 / (q - 1))
    return PackingResult(int(best), bound, best <= bound, pair)


# ------------------------------------------------ codes over vector inputs


def all_vectors(q: int, n: int) -> np.ndarray:
    if q**n > BRUTE_FORCE_CAP:
        raise CapExceededError(f"q^n = {q**n} exceeds cap")
    return np.array(list(itertools.product(range(q), repeat=n)), dtype=np.int64).reshape(-1, n)


@dataclass
class SigmaCode:
    """ID code whose encoders and decoders act on length-n vectors.

    ``encoders[i, x]`` is the probability of sending vector index x (in
    ``all_vectors`` order); ``decoders[i, y]`` is 1 when y is in D_i.
    """

    q: int
    n: int
    encoders: np.ndarray
    decoders: np.ndarray

    @property
    def L(self) -> int:
        return self.encoders.shape[0]


def random_sigma_code(q: int, n: int, L: int, rng: np.random.Generator) -> SigmaCode:
    size = q**n
    enc = rng.dirichlet(np.full(size, 0.5), size=L)
    dec = (rng.random((L, size)) < 0.5).astype(float)
    return SigmaCode(q, n, enc, dec)


def _vector_ranks(q: int, n: int) -> np.ndarray:
    vecs = all_vectors(q, n)
    counts = np.stack([(vecs == a).sum(axis=1) for a in range(q)], axis=1)
    return np.array([rank(tuple(c)) for c in counts])


def reduce_to_composition_code(code: SigmaCode) -> IdCode:
    """Q'_i(k) = Q_i(type class k); P_i(1|k) = |D_i & type class k| / |type class k|."""
    ranks = _vector_ranks(code.q, code.n)
    comps = enumerate_compositions(code.q, code.n)
    sizes = np.array([type_class_size(c) for c in comps], dtype=float)
    enc = np.zeros((code.L, len(comps)))
    acc = np.zeros((code.L, len(comps)))
    for i in range(code.L):
        np.add.at(enc[i], ranks, code.encoders[i])
        np.add.at(acc[i], ranks, code.decoders[i])
    return IdCode(code.q, code.n, enc, acc / sizes)


def sigma_channel_matrix(U: Dmc, n: int) -> np.ndarray:
    """P(y|x) for the permutation-then-DMC channel on vectors.

    A uniform permutation sends x to a uniform member of its type class, so
    P(y|x) averages U^n(y|z) over z with the composition of x.
    """
    Un = np.ones((1, 1))
    for _ in range(n):
        Un = np.kron(Un, U.U)
    ranks = _vector_ranks(U.q, n)
    out = np.zeros_like(Un)
    for r in np.unique(ranks):
        members = ranks == r
        out[members] = Un[members].mean(axis=0)
    return out


def sigma_errors_exhaustive(code: SigmaCode, U: Dmc) -> IdErrors:
    P = sigma_channel_matrix(U, code.n)
    return _errors_from_accept(code.encoders @ P @ code.decoders.T)
