"""The DMC, the noisy permutation channel, and the induced composition channel.

Symbols are 0-based.  A kernel row for input composition t is the output
composition distribution W_t, the convolution over symbols a of the
multinomials M(t_a, U[a]).
"""

from __future__ import annotations

import itertools
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.signal import convolve

from .compositions import Composition, enumerate_compositions, lattice_size, rank
from .config import BRUTE_FORCE_CAP, CapExceededError, kernel_cap
from .lattice_dist import LatticeDist
from .multinomial import pmf_grid

RANK_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Dmc:
    U: np.ndarray
    name: str = "custom"

    def __post_init__(self) -> None:
        U = np.array(self.U, dtype=float)
        if U.ndim != 2 or U.shape[0] != U.shape[1] or U.shape[0] < 2:
            raise ValueError(f"U must be a square matrix with q >= 2, got shape {U.shape}")
        if (U < 0).any():
            raise ValueError("U has a negative entry")
        sums = U.sum(axis=1)
        if np.abs(sums - 1).max() > 1e-12:
            raise ValueError(f"rows of U sum to {sums}, not 1")
        U.setflags(write=False)
        object.__setattr__(self, "U", U)

    @property
    def q(self) -> int:
        return self.U.shape[0]

    @property
    def strictly_positive(self) -> bool:
        return bool((self.U > 0).all())

    @property
    def rank_r(self) -> int:
        return int(np.linalg.matrix_rank(self.U, tol=RANK_TOL))

    @classmethod
    def identity(cls, q: int) -> "Dmc":
        return cls(np.eye(q), "identity")

    @classmethod
    def bsc(cls, p: float, q: int = 2) -> "Dmc":
        """Symmetric channel: keep the symbol w.p. 1-p, else a uniform other symbol."""
        U = np.full((q, q), p / (q - 1))
        np.fill_diagonal(U, 1 - p)
        return cls(U, f"bsc:{p}")

    @classmethod
    def uniform_mix(cls, gamma: float, q: int) -> "Dmc":
        """(1-gamma) I + gamma * uniform."""
        U = (1 - gamma) * np.eye(q) + gamma / q
        return cls(U, f"uniform-mix:{gamma}")

    @classmethod
    def from_spec(cls, spec: str, q: int) -> "Dmc":
        """Parse ``identity``, ``bsc:p``, ``uniform-mix:g``, a JSON matrix or a JSON file path."""
        spec = spec.strip()
        if spec == "identity":
            return cls.identity(q)
        if spec.startswith("bsc:"):
            return cls.bsc(float(spec[4:]), q)
        if spec.startswith("uniform-mix:"):
            return cls.uniform_mix(float(spec[len("uniform-mix:"):]), q)
        if spec.startswith("["):
            U = json.loads(spec)
        else:
            with open(spec) as fh:
                U = json.load(fh)
        dmc = cls(np.array(U), "matrix")
        if dmc.q != q:
            raise ValueError(f"matrix has q={dmc.q}, expected {q}")
        return dmc

    def to_json(self) -> str:
        return json.dumps(self.U.tolist())


def random_dmc(q: int, rng: np.random.Generator, floor: float = 0.0) -> Dmc:
    """Rows drawn from a flat Dirichlet, mixed with ``floor`` of the uniform row."""
    U = rng.dirichlet(np.ones(q), size=q)
    U = (1 - floor) * U + floor / q
    U = U / U.sum(axis=1, keepdims=True)
    return Dmc(U, "random")


def output_grid(U: Dmc, t: Sequence[int]) -> np.ndarray:
    """W_t as a dense array over the first q-1 output counts (shape (n+1,)*(q-1))."""
    t = tuple(int(x) for x in t)
    if len(t) != U.q:
        raise ValueError("composition length does not match U")
    m = U.q - 1
    acc = np.ones((1,) * m)
    for a, ta in enumerate(t):
        if ta == 0:
            continue
        g = pmf_grid(ta, U.U[a])
        if m == 1:
            acc = np.convolve(acc, g)
        else:
            acc = convolve(acc, g, method="direct")
    return acc


class _LatticeIndex:
    """Maps between rank order and flat positions of the dense (n+1)^(q-1) grid."""

    def __init__(self, q: int, n: int):
        self.q, self.n = q, n
        self.comps = enumerate_compositions(q, n)
        shape = (n + 1,) * (q - 1)
        heads = np.array([c.counts[:-1] for c in self.comps], dtype=np.int64).reshape(len(self.comps), q - 1)
        self.flat = np.ravel_multi_index(tuple(heads.T), shape)


_INDEX_CACHE: dict[tuple[int, int], _LatticeIndex] = {}


def lattice_index(q: int, n: int) -> _LatticeIndex:
    key = (q, n)
    if key not in _INDEX_CACHE:
        _INDEX_CACHE[key] = _LatticeIndex(q, n)
    return _INDEX_CACHE[key]


def output_vector(U: Dmc, t: Sequence[int]) -> np.ndarray:
    """W_t as a dense vector in rank order over the output lattice."""
    n = sum(t)
    idx = lattice_index(U.q, n)
    return output_grid(U, t).ravel()[idx.flat]


def output_comp_dist(U: Dmc, t: Sequence[int]) -> LatticeDist:
    n = sum(t)
    idx = lattice_index(U.q, n)
    vec = output_vector(U, t)
    return LatticeDist({c.counts: v for c, v in zip(idx.comps, vec) if v > 0}, tol=1e-10)


@dataclass(eq=False)
class QnccKernel:
    """Row-stochastic matrix over compositions, rows and columns in rank order."""

    q: int
    n: int
    matrix: np.ndarray
    compositions: list[Composition] = field(repr=False)

    def index(self, t: Composition | Sequence[int]) -> int:
        return rank(t)

    def row(self, t: Composition | Sequence[int]) -> LatticeDist:
        vec = self.matrix[self.index(t)]
        return LatticeDist({c.counts: v for c, v in zip(self.compositions, vec) if v > 0}, tol=1e-10)

    def dist_to_vector(self, Q: LatticeDist) -> np.ndarray:
        vec = np.zeros(len(self.compositions))
        for p, v in Q.items():
            if len(p) != self.q or sum(p) != self.n:
                raise ValueError(f"point {p} is not in the lattice (q={self.q}, n={self.n})")
            vec[rank(p)] += float(v)
        return vec

    def vector_to_dist(self, vec: np.ndarray, tol: float = 1e-10) -> LatticeDist:
        return LatticeDist({c.counts: float(v) for c, v in zip(self.compositions, vec) if v > 0}, tol=tol)

    def apply_vector(self, vec: np.ndarray) -> np.ndarray:
        return vec @ self.matrix

    def apply(self, Q: LatticeDist) -> LatticeDist:
        """Output composition distribution induced by the input distribution Q."""
        return self.vector_to_dist(self.apply_vector(self.dist_to_vector(Q)))

    def to_json(self) -> str:
        return json.dumps(
            {
                "q": self.q,
                "n": self.n,
                "compositions": [list(c.counts) for c in self.compositions],
                "matrix": [[float(f"{x:.17g}") for x in row] for row in self.matrix],
            }
        )

    def save(self, path: str) -> None:
        """JSON for ``.json`` paths, numpy ``.npz`` otherwise."""
        if path.endswith(".json"):
            with open(path, "w") as fh:
                fh.write(self.to_json())
        else:
            np.savez(path, q=self.q, n=self.n, matrix=self.matrix)


def _check_kernel_size(q: int, n: int, cap: int | None) -> int:
    size = lattice_size(q, n)
    limit = kernel_cap() if cap is None else cap
    if size > limit:
        raise CapExceededError(f"kernel would have {size} rows, cap is {limit}")
    return size


def qncc_kernel(U: Dmc, n: int, jobs: int = 1, cap: int | None = None) -> QnccKernel:
    _check_kernel_size(U.q, n, cap)
    idx = lattice_index(U.q, n)

    def build(c: Composition) -> np.ndarray:
        return output_grid(U, c.counts).ravel()[idx.flat]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(build, idx.comps))
    else:
        rows = [build(c) for c in idx.comps]
    return QnccKernel(U.q, n, np.vstack(rows), idx.comps)


def sorted_representative(t: Sequence[int]) -> np.ndarray:
    """The input vector 0..0 1..1 ... with composition t."""
    return np.repeat(np.arange(len(t)), t)


def brute_force_kernel(
    U: Dmc,
    n: int,
    representative: Callable[[Sequence[int]], Sequence[int]] | None = None,
) -> QnccKernel:
    """Exact kernel by summing U^n(y|x) over every output vector y."""
    q = U.q
    if q**n > BRUTE_FORCE_CAP:
        raise CapExceededError(f"q^n = {q**n} exceeds brute-force cap")
    pick = representative or sorted_representative
    comps = enumerate_compositions(q, n)
    ys = np.array(list(itertools.product(range(q), repeat=n)), dtype=np.int64).reshape(-1, n)
    out_counts = np.stack([(ys == a).sum(axis=1) for a in range(q)], axis=1)
    out_rank = np.array([rank(tuple(c)) for c in out_counts])
    matrix = np.zeros((len(comps), len(comps)))
    for i, c in enumerate(comps):
        x = np.asarray(pick(c.counts), dtype=np.int64)
        if sorted(x.tolist()) != sorted_representative(c.counts).tolist():
            raise ValueError(f"representative {x} does not have composition {c.counts}")
        probs = np.prod(U.U[x[None, :], ys], axis=1) if n else np.ones(1)
        np.add.at(matrix[i], out_rank, probs)
    return QnccKernel(q, n, matrix, comps)


def composition_of(y: np.ndarray, q: int) -> np.ndarray:
    """Symbol counts of each row of a (trials, n) array."""
    y = np.atleast_2d(y)
    return np.stack([(y == a).sum(axis=1) for a in range(q)], axis=1)


def _dmc_apply(U: Dmc, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cum = np.cumsum(U.U, axis=1)
    cum[:, -1] = 1.0
    draws = rng.random(x.shape)
    return (draws[..., None] > cum[x]).sum(axis=-1)


def sample_sigma(U: Dmc, x: Sequence[int], rng: np.random.Generator, trials: int | None = None) -> np.ndarray:
    """Uniform permutation of x followed by independent uses of U.

    Returns one output vector, or a (trials, n) array when ``trials`` is given.
    """
    x = np.asarray(x, dtype=np.int64)
    reps = 1 if trials is None else trials
    batch = np.broadcast_to(x, (reps, x.size))
    permuted = rng.permuted(batch, axis=1)
    y = _dmc_apply(U, permuted, rng)
    return y[0] if trials is None else y


def sample_dmc_then_permute(U: Dmc, x: Sequence[int], rng: np.random.Generator, trials: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    reps = 1 if trials is None else trials
    batch = np.broadcast_to(x, (reps, x.size)).copy()
    y = rng.permuted(_dmc_apply(U, batch, rng), axis=1)
    return y[0] if trials is None else y


def empirical_composition_dist(samples: np.ndarray, q: int) -> LatticeDist:
    counts = composition_of(samples, q)
    uniq, freq = np.unique(counts, axis=0, return_counts=True)
    total = freq.sum()
    return LatticeDist({tuple(int(v) for v in row): f / total for row, f in zip(uniq, freq)}, tol=1e-9)


def kernel_row_sum_error(kernel: QnccKernel) -> float:
    return float(np.abs(kernel.matrix.sum(axis=1) - 1).max())


def tv_rows(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return 0.5 * np.abs(A - B).sum(axis=-1)



class OutputGridFactory:
    """Fast W_t grids for every t of one block length, via the generating function.

    Row a of U has generating function u_{a,q-1} + sum_i u_{a,i} z_i over the
    first q-1 output counts; W_t is the product of their t_a-th powers, read
    back with an inverse FFT on a grid wide enough to avoid wrap-around.  The
    result agrees with ``output_grid`` to rounding (about 1e-15).
    """

    def __init__(self, U: Dmc, n: int):
        self.U, self.n = U, n
        m = U.q - 1
        size = n + 1
        freqs = np.exp(-2j * np.pi * np.arange(size) / size)
        grids = np.meshgrid(*([freqs] * m), indexing="ij")
        self.phi = [U.U[a, -1] + sum(U.U[a, i] * grids[i] for i in range(m)) for a in range(U.q)]

    def grid(self, t: Sequence[int]) -> np.ndarray:
        if sum(t) > self.n:
            raise ValueError("composition exceeds the factory block length")
        prod = np.ones_like(self.phi[0])
        for a, ta in enumerate(t):
            if ta:
                prod = prod * self.phi[a] ** ta
        return np.fft.ifftn(prod).real


def single_trial_step(G: np.ndarray, u: Sequence[float]) -> np.ndarray:
    """Convolve a grid with one draw from u, keeping the grid shape."""
    m = G.ndim
    out = u[-1] * G
    for i in range(m):
        shifted = np.zeros_like(G)
        src = [slice(None)] * m
        dst = [slice(None)] * m
        src[i] = slice(0, -1)
        dst[i] = slice(1, None)
        shifted[tuple(dst)] = G[tuple(src)]
        out = out + u[i] * shifted
    return out
