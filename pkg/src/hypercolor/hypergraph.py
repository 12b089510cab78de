"""k-uniform hypergraphs, 2-colorings, the monochromatic-edge energy and the
three null random models (gnp, gnm without replacement, gnm_rep with
replacement)."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numba import njit

from ._rng import make_rng
from .errors import ParameterError, ParseError

MODELS = ("gnp", "gnm", "gnm_rep")

# Below this vertex count gnp (and the planted model) flips one coin per k-set.
PER_SET_MAX_N = 20
# Largest k-set universe that is materialised for sampling without replacement.
MATERIALISE_MAX_SETS = 2_000_000
_INT64_SAFE = 2**62


def binom(a: int, b: int) -> int:
    """C(a, b) as an exact integer, 0 outside 0 <= b <= a."""
    if b < 0 or a < b:
        return 0
    return math.comb(a, b)


def log_binom(a: float, b: float) -> float:
    if b < 0 or a < b:
        return -math.inf
    return math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)


def forb(n_plus: int, n: int, k: int) -> int:
    """Number of k-sets that are monochromatic under a coloring with n_plus
    vertices colored +1."""
    if not 0 <= n_plus <= n or k < 1:
        raise ParameterError(f"forb needs 0 <= n_plus <= n and k >= 1, got ({n_plus}, {n}, {k})")
    return binom(n_plus, k) + binom(n - n_plus, k)


def _pack_rows(rows: np.ndarray, n: int) -> np.ndarray:
    """Pack sorted index rows into uint64 words, most significant column first,
    so that lexicographic order of rows equals lexicographic order of words."""
    m, k = rows.shape
    width = max(1, (max(n, 2) - 1).bit_length())
    per_word = max(1, 64 // width)
    words = []
    for start in range(0, k, per_word):
        block = rows[:, start:start + per_word].astype(np.uint64)
        w = np.zeros(m, dtype=np.uint64)
        for j in range(block.shape[1]):
            w = (w << np.uint64(width)) | block[:, j]
        words.append(w)
    return np.stack(words, axis=1) if words else np.zeros((m, 0), dtype=np.uint64)


def _canonical_order(rows: np.ndarray, n: int) -> np.ndarray:
    """Permutation putting rows in lexicographic order (equal rows in any order).

    Rows are ordered by their leading packed word first; only runs that tie
    on it are resolved with a full lexsort, which keeps large inputs cheap.
    """
    if len(rows) <= 1:
        return np.arange(len(rows))
    packed = _pack_rows(rows, n)
    order = np.argsort(packed[:, 0])
    if packed.shape[1] > 1:
        w0 = packed[order, 0]
        tie = w0[1:] == w0[:-1]
        if tie.any():
            pos = np.flatnonzero(np.concatenate([[False], tie]) | np.concatenate([tie, [False]]))
            sub = order[pos]
            order[pos] = sub[np.lexsort(packed[sub].T[::-1])]
    return order


def unique_rows(rows: np.ndarray, n: int) -> np.ndarray:
    """Distinct rows in lexicographic order."""
    if len(rows) == 0:
        return rows
    srt = rows[_canonical_order(rows, n)]
    new = np.ones(len(rows), dtype=bool)
    new[1:] = np.any(srt[1:] != srt[:-1], axis=1)
    return srt[new]


@njit(cache=True)
def _build_csr(edges, n):
    m, k = edges.shape
    ptr = np.zeros(n + 1, np.int64)
    for e in range(m):
        for j in range(k):
            ptr[edges[e, j] + 1] += 1
    for v in range(n):
        ptr[v + 1] += ptr[v]
    fill = ptr[:-1].copy()
    inc = np.empty(m * k, np.int64)
    for e in range(m):
        for j in range(k):
            v = edges[e, j]
            inc[fill[v]] = e
            fill[v] += 1
    return ptr, inc


@dataclass(frozen=True, eq=False)
class Hypergraph:
    """k-uniform hypergraph on vertices 0..n-1.

    Edges are kept as an (m, k) int64 array with ascending rows, the rows in
    lexicographic order; construction canonicalises whatever is passed in.
    """

    n: int
    k: int
    edges: np.ndarray
    allows_multi: bool = False

    def __post_init__(self):
        n, k = int(self.n), int(self.k)
        if n < 0 or k < 1:
            raise ParameterError(f"need n >= 0 and k >= 1, got n={n}, k={k}")
        e = np.asarray(self.edges, dtype=np.int64)
        if e.size == 0:
            e = np.zeros((0, k), dtype=np.int64)
        if e.ndim != 2 or e.shape[1] != k:
            raise ParameterError(f"edges must have shape (m, {k}), got {e.shape}")
        if len(e):
            if e.min() < 0 or e.max() >= n:
                raise ParameterError(f"edge vertex index outside [0, {n})")
            if k > 1 and not np.all(e[:, 1:] > e[:, :-1]):
                e = np.sort(e, axis=1)
                if np.any(e[:, 1:] == e[:, :-1]):
                    raise ParameterError("an edge repeats a vertex")
        e = np.ascontiguousarray(e[_canonical_order(e, n)])
        if not self.allows_multi and len(e) > 1:
            if np.any(np.all(e[1:] == e[:-1], axis=1)):
                raise ParameterError("repeated edge in a hypergraph without multi-edges")
        e.flags.writeable = False
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "allows_multi", bool(self.allows_multi))

    @property
    def m(self) -> int:
        return len(self.edges)

    def __eq__(self, other):
        if not isinstance(other, Hypergraph):
            return NotImplemented
        return (self.n == other.n and self.k == other.k and self.allows_multi == other.allows_multi
                and np.array_equal(self.edges, other.edges))

    __hash__ = None

    def __repr__(self):
        return f"Hypergraph(n={self.n}, k={self.k}, m={self.m}, allows_multi={self.allows_multi})"

    @cached_property
    def incidence(self) -> tuple[np.ndarray, np.ndarray]:
        """CSR incidence: edges containing v are inc[ptr[v]:ptr[v+1]], ascending."""
        ptr, inc = _build_csr(self.edges, self.n)
        ptr.flags.writeable = False
        inc.flags.writeable = False
        return ptr, inc

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def add_edge(self, edge) -> Hypergraph:
        row = np.asarray(edge, dtype=np.int64).reshape(1, self.k)
        return Hypergraph(self.n, self.k, np.concatenate([self.edges, row]), self.allows_multi)

    def remove_edge(self, index: int) -> Hypergraph:
        return Hypergraph(self.n, self.k, np.delete(self.edges, index, axis=0), self.allows_multi)


@dataclass(frozen=True, eq=False)
class Coloring:
    """A 2-coloring; bits[v] is True iff vertex v has color +1."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.array(self.bits, dtype=bool).ravel()
        b.flags.writeable = False
        object.__setattr__(self, "bits", b)

    @classmethod
    def from_spins(cls, spins) -> Coloring:
        s = np.asarray(spins)
        if not np.all(np.isin(s, (-1, 1))):
            raise ParameterError("spins must be +1 or -1")
        return cls(s > 0)

    @classmethod
    def from_int(cls, x: int, n: int) -> Coloring:
        """Vertex v is +1 iff bit v of x is set."""
        return cls(((int(x) >> np.arange(n, dtype=np.int64)) & 1).astype(bool) if n else np.zeros(0, bool))

    @classmethod
    def constant(cls, n: int, plus: bool = True) -> Coloring:
        return cls(np.full(n, plus, dtype=bool))

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def n_plus(self) -> int:
        return int(np.count_nonzero(self.bits))

    @property
    def spins(self) -> np.ndarray:
        return np.where(self.bits, 1, -1).astype(np.int8)

    def to_int(self) -> int:
        return sum(1 << int(v) for v in np.flatnonzero(self.bits))

    def complement(self) -> Coloring:
        return Coloring(~self.bits)

    def flipped(self, vertices) -> Coloring:
        b = self.bits.copy()
        idx = np.asarray(vertices, dtype=np.int64)
        b[idx] = ~b[idx]
        return Coloring(b)

    def __eq__(self, other):
        if not isinstance(other, Coloring):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    __hash__ = None

    def __repr__(self):
        s = format_coloring(self) if self.n <= 64 else f"n={self.n}"
        return f"Coloring({s})"


def _check_pair(H: Hypergraph, sigma: Coloring):
    if sigma.n != H.n:
        raise ParameterError(f"coloring has length {sigma.n}, hypergraph has n={H.n}")


def edge_plus_counts(H: Hypergraph, sigma: Coloring) -> np.ndarray:
    """Number of +1 vertices in each edge."""
    _check_pair(H, sigma)
    if H.m == 0:
        return np.zeros(0, dtype=np.int64)
    return sigma.bits[H.edges].sum(axis=1)


def monochromatic_mask(H: Hypergraph, sigma: Coloring) -> np.ndarray:
    c = edge_plus_counts(H, sigma)
    return (c == 0) | (c == H.k)


def monochromatic_count(H: Hypergraph, sigma: Coloring) -> int:
    """E_H(sigma): monochromatic edges, multi-edges counted with multiplicity."""
    return int(np.count_nonzero(monochromatic_mask(H, sigma)))


def overlap(sigma: Coloring, tau: Coloring) -> int:
    if sigma.n != tau.n:
        raise ParameterError(f"colorings differ in length ({sigma.n} vs {tau.n})")
    return sigma.n - 2 * int(np.count_nonzero(sigma.bits != tau.bits))


def is_balanced_count(n_plus: int, n: int) -> bool:
    # |a - n/2| <= sqrt(n)  <=>  (2a - n)^2 <= 4n, exact in integers
    return (2 * n_plus - n) ** 2 <= 4 * n


def is_balanced(sigma: Coloring) -> bool:
    return is_balanced_count(sigma.n_plus, sigma.n)


@dataclass(frozen=True)
class ModelParams:
    """n, k, mean-degree d and inverse temperature beta.

    m defaults to ceil(d n / k); pass it explicitly (or use from_m) when the
    edge count is the primary parameter, so no float round trip is involved.
    """

    n: int
    k: int
    d: float
    beta: float = 0.0
    m: int | None = None

    def __post_init__(self):
        if self.k < 2 or self.n < self.k:
            raise ParameterError(f"need 2 <= k <= n, got n={self.n}, k={self.k}")
        if not self.d >= 0:
            raise ParameterError(f"d must be non-negative, got {self.d}")
        if not self.beta >= 0:
            raise ParameterError(f"beta must be non-negative, got {self.beta}")
        if self.m is None:
            object.__setattr__(self, "m", max(0, math.ceil(self.d * self.n / self.k - 1e-9)))
        elif self.m < 0:
            raise ParameterError(f"m must be non-negative, got {self.m}")
        if not 0.0 <= self.p <= 1.0:
            raise ParameterError(f"edge probability p = {self.p} outside [0, 1]")

    @classmethod
    def from_m(cls, n: int, k: int, m: int, beta: float = 0.0) -> ModelParams:
        return cls(n=n, k=k, d=m * k / n, beta=beta, m=m)

    @property
    def N(self) -> int:
        return binom(self.n, self.k)

    @property
    def p(self) -> float:
        return self.d / binom(self.n - 1, self.k - 1)


# ---------------------------------------------------------------- sampling

def sample_binomial(rng: np.random.Generator, trials: int, p: float) -> int:
    """Binomial(trials, p) for an arbitrarily large integer number of trials.

    Below 2^62 trials numpy's exact sampler is used. Above it the Poisson law
    with the same mean is used; by Le Cam's inequality the total variation
    distance is at most trials * p^2, i.e. mean * p, which is below 1e-15 for
    every parameter set reachable here (mean < 1e9 forces p < 1e-9).
    """
    if p <= 0.0 or trials == 0:
        return 0
    if p >= 1.0:
        return int(trials)
    if trials < _INT64_SAFE:
        return int(rng.binomial(int(trials), p))
    mean = float(trials) * p
    if mean * p > 1e-12:
        raise ParameterError("binomial over >2^62 trials with non-negligible p is not supported")
    return int(rng.poisson(mean))


def all_ksets(n: int, k: int) -> np.ndarray:
    N = binom(n, k)
    flat = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(n), k)),
                       dtype=np.int64, count=N * k)
    return flat.reshape(N, k)


def uniform_ksets(rng: np.random.Generator, n: int, k: int, count: int) -> np.ndarray:
    """count i.i.d. uniform k-subsets of [n] as sorted rows."""
    if count == 0:
        return np.zeros((0, k), dtype=np.int64)
    accept = math.exp(math.lgamma(n + 1) - math.lgamma(n - k + 1) - k * math.log(n))
    if accept < 0.25:
        out = []
        chunk = max(1, 4_000_000 // n)
        for start in range(0, count, chunk):
            c = min(chunk, count - start)
            out.append(np.argsort(rng.random((c, n)), axis=1)[:, :k])
        return np.sort(np.concatenate(out), axis=1).astype(np.int64)
    rows = np.sort(rng.integers(0, n, size=(count, k)), axis=1)
    bad = np.flatnonzero(np.any(rows[:, 1:] == rows[:, :-1], axis=1)) if k > 1 else np.zeros(0, int)
    while len(bad):
        redo = np.sort(rng.integers(0, n, size=(len(bad), k)), axis=1)
        rows[bad] = redo
        still = np.any(redo[:, 1:] == redo[:, :-1], axis=1)
        bad = bad[still]
    return rows


def distinct_ksets(rng: np.random.Generator, n: int, k: int, count: int, draw=None,
                   universe: int | None = None) -> np.ndarray:
    """count distinct k-sets drawn uniformly from a class of k-sets.

    `draw(rng, c)` returns at most c i.i.d. uniform members of the class
    (default: all k-sets). Repeats are discarded and the shortfall redrawn,
    which is sequential rejection done in batches and therefore yields a
    uniform count-subset of the class. Rows come back in canonical order.
    """
    if draw is None:
        draw = lambda r, c: uniform_ksets(r, n, k, c)  # noqa: E731
    if universe is not None and count > universe:
        raise ParameterError(f"cannot draw {count} distinct sets from {universe}")
    have = np.zeros((0, k), dtype=np.int64)
    while len(have) < count:
        batch = draw(rng, count - len(have))
        have = unique_rows(np.concatenate([have, batch]), n)
    return have


def choose_distinct(rng: np.random.Generator, n: int, k: int, count: int, members: np.ndarray | None = None,
                    draw=None, universe: int | None = None) -> np.ndarray:
    """Uniform count-subset of a k-set class, materialising small classes."""
    if members is not None:
        if count > len(members):
            raise ParameterError(f"cannot draw {count} distinct sets from {len(members)}")
        idx = rng.choice(len(members), size=count, replace=False)
        return members[np.sort(idx)]
    return distinct_ksets(rng, n, k, count, draw=draw, universe=universe)


def generate(model: str, params: ModelParams, seed) -> Hypergraph:
    """Draw from gnp, gnm (m distinct sets) or gnm_rep (m i.i.d. sets)."""
    rng = make_rng(seed)
    n, k = params.n, params.k
    N = params.N
    if model == "gnp":
        if n <= PER_SET_MAX_N:
            sets = all_ksets(n, k)
            return Hypergraph(n, k, sets[rng.random(len(sets)) < params.p])
        count = sample_binomial(rng, N, params.p)
        members = all_ksets(n, k) if N <= MATERIALISE_MAX_SETS and count > N // 4 else None
        return Hypergraph(n, k, choose_distinct(rng, n, k, count, members, universe=N))
    if model == "gnm":
        if params.m > N:
            raise ParameterError(f"gnm needs m <= C(n,k) = {N}, got m = {params.m}")
        members = all_ksets(n, k) if N <= MATERIALISE_MAX_SETS and params.m > N // 4 else None
        return Hypergraph(n, k, choose_distinct(rng, n, k, params.m, members, universe=N))
    if model == "gnm_rep":
        return Hypergraph(n, k, uniform_ksets(rng, n, k, params.m), allows_multi=True)
    raise ParameterError(f"unknown model {model!r}; expected one of {MODELS}")


# ---------------------------------------------------------------- text formats

def format_hypergraph(H: Hypergraph) -> str:
    lines = [f"{H.n} {H.k} {H.m}"]
    lines.extend(" ".join(map(str, row)) for row in H.edges.tolist())
    return "\n".join(lines) + "\n"


def parse_hypergraph(text: str) -> Hypergraph:
    """Parse the "n k m" + m edge lines format.

    A file with repeated edges is read as a multi-hypergraph.
    """
    lines = text.splitlines()
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise ParseError("line 1: missing header 'n k m'")
    head = lines[0].split()
    if len(head) != 3 or not all(t.isdigit() for t in head):
        raise ParseError(f"line 1: header must be three non-negative integers 'n k m', got {lines[0]!r}")
    n, k, m = map(int, head)
    if k < 1:
        raise ParseError("line 1: k must be at least 1")
    if len(lines) - 1 != m:
        raise ParseError(f"line 1: header announces {m} edges, file has {len(lines) - 1}")
    edges = np.zeros((m, k), dtype=np.int64)
    for i, line in enumerate(lines[1:]):
        toks = line.split(" ")
        if len(toks) != k or not all(t.isdigit() for t in toks):
            raise ParseError(f"line {i + 2}: expected {k} space-separated indices, got {line!r}")
        row = [int(t) for t in toks]
        if any(v >= n for v in row):
            raise ParseError(f"line {i + 2}: vertex index out of range [0, {n})")
        if any(a >= b for a, b in zip(row, row[1:])):
            raise ParseError(f"line {i + 2}: indices must be strictly ascending")
        edges[i] = row
    multi = m > 1 and len(unique_rows(edges, n)) < m
    return Hypergraph(n, k, edges, allows_multi=multi)


def format_coloring(sigma: Coloring) -> str:
    return "".join("+" if b else "-" for b in sigma.bits.tolist())


def parse_coloring(text: str) -> Coloring:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if len(lines) != 1:
        raise ParseError(f"coloring file must hold exactly one line, got {len(lines)}")
    s = lines[0].strip()
    bad = [i for i, ch in enumerate(s) if ch not in "+-"]
    if bad:
        raise ParseError(f"line 1: character {bad[0] + 1} is {s[bad[0]]!r}, expected '+' or '-'")
    return Coloring(np.frombuffer(s.encode(), dtype=np.uint8) == ord("+"))
