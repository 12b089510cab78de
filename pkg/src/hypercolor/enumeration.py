"""Exact enumeration over all 2^n colorings.

One Gray-code sweep builds a joint (key, energy) histogram, where the key is
either the number of +1 vertices or the agreement count with a reference
coloring. Every partition function, restricted sum and cluster size at every
beta is then read off the histogram without touching the hypergraph again.
"""

from __future__ import annotations

import importlib
import math
from dataclasses import dataclass

import numba
import numpy as np
from numba import njit, prange
from scipy.special import logsumexp

from ._rng import make_rng
from .errors import CapacityError, ParameterError
from .hypergraph import Coloring, Hypergraph, is_balanced, is_balanced_count
from .phase import m0_fraction

ENUMERATION_CAP = 28
MODES = ("magnetization", "overlap")
# Fixed number of Gray-code blocks; independent of the thread count so the
# merge (and every float computed from it) never depends on parallelism.
_BLOCKS = 64
_HIST_BYTES_MAX = 1 << 28


def _pick_threading_layer():
    # skip the TBB probe, which warns on older system TBB builds
    if numba.config.THREADING_LAYER != "default":
        return
    try:
        importlib.import_module("numba.np.ufunc.omppool")
        numba.config.THREADING_LAYER = "omp"
    except ImportError:
        numba.config.THREADING_LAYER = "workqueue"


_pick_threading_layer()


def set_threads(threads: int | None) -> int:
    """Set the numba thread count, clamped to what the runtime allows."""
    limit = numba.config.NUMBA_NUM_THREADS
    t = limit if threads is None else max(1, min(int(threads), limit))
    numba.set_num_threads(t)
    return t


@njit(cache=True)
def _popcount(x):
    c = 0
    while x:
        x &= x - 1
        c += 1
    return c


@njit(cache=True)
def _init_state(g, k, m, ev, cnt):
    energy = 0
    for e in range(m):
        c = 0
        for j in range(k):
            c += (g >> ev[e, j]) & 1
        cnt[e] = c
        if c == 0 or c == k:
            energy += 1
    return energy


@njit(cache=True)
def _flip(v, g, k, ptr, inc, cnt, energy):
    """Flip vertex v in coloring g; returns (new g, new energy, v was +1)."""
    was_plus = (g >> v) & 1
    g ^= 1 << v
    if was_plus:
        for t in range(ptr[v], ptr[v + 1]):
            e = inc[t]
            c = cnt[e]
            if c == k:
                energy -= 1
            c -= 1
            if c == 0:
                energy += 1
            cnt[e] = c
    else:
        for t in range(ptr[v], ptr[v + 1]):
            e = inc[t]
            c = cnt[e]
            if c == 0:
                energy -= 1
            c += 1
            if c == k:
                energy += 1
            cnt[e] = c
    return g, energy, was_plus


@njit(cache=True)
def _walk_block(start, stop, n, k, m, ptr, inc, ev, ref, mode, hist):
    g = start ^ (start >> 1)
    cnt = np.zeros(m, np.int64)
    energy = _init_state(g, k, m, ev, cnt)
    if mode == 0:
        key = _popcount(g)
    else:
        key = n - _popcount(g ^ ref)
    hist[key, energy] += 1
    for i in range(start + 1, stop):
        v = 0
        while ((i >> v) & 1) == 0:
            v += 1
        g, energy, was_plus = _flip(v, g, k, ptr, inc, cnt, energy)
        if mode == 0:
            key += -1 if was_plus else 1
        else:
            key += -1 if was_plus == ((ref >> v) & 1) else 1
        hist[key, energy] += 1


@njit(parallel=True, cache=True)
def _spectrum_kernel(n, k, m, ptr, inc, ev, ref, mode, nblocks):
    size = (1 << n) // nblocks
    hists = np.zeros((nblocks, n + 1, m + 1), np.int64)
    for b in prange(nblocks):
        _walk_block(b * size, (b + 1) * size, n, k, m, ptr, inc, ev, ref, mode, hists[b])
    out = np.zeros((n + 1, m + 1), np.int64)
    for b in range(nblocks):
        out += hists[b]
    return out


@njit(cache=True)
def _select_kernel(n, k, m, ptr, inc, ev, ref, mode, cell_start, cell_end, t_rank, t_slot, out):
    """Walk the whole Gray code, emitting the rank-th member of each target cell."""
    cells = (n + 1) * (m + 1)
    seen = np.zeros(cells, np.int64)
    nxt = cell_start.copy()
    remaining = len(t_rank)
    g = 0
    cnt = np.zeros(m, np.int64)
    energy = _init_state(g, k, m, ev, cnt)
    key = 0 if mode == 0 else n - _popcount(ref)
    i = 0
    total = 1 << n
    while True:
        c = key * (m + 1) + energy
        r = seen[c]
        seen[c] = r + 1
        while nxt[c] < cell_end[c] and t_rank[nxt[c]] == r:
            out[t_slot[nxt[c]]] = g
            nxt[c] += 1
            remaining -= 1
        if remaining == 0:
            return
        i += 1
        if i == total:
            return
        v = 0
        while ((i >> v) & 1) == 0:
            v += 1
        g, energy, was_plus = _flip(v, g, k, ptr, inc, cnt, energy)
        if mode == 0:
            key += -1 if was_plus else 1
        else:
            key += -1 if was_plus == ((ref >> v) & 1) else 1


@dataclass(frozen=True, eq=False)
class SpectrumTable:
    """Exact joint histogram of colorings by (key, energy).

    counts[j, E] is the number of colorings with energy E and, in
    magnetization mode, j vertices colored +1, or, in overlap mode, j vertices
    agreeing with the reference (overlap 2j - n).
    """

    mode: str
    n: int
    k: int
    m: int
    counts: np.ndarray
    reference: Coloring | None = None

    def key_values(self) -> np.ndarray:
        j = np.arange(self.n + 1)
        return j if self.mode == "magnetization" else 2 * j - self.n

    def as_dict(self) -> dict[tuple[int, int], int]:
        keys = self.key_values()
        rows, cols = np.nonzero(self.counts)
        return {(int(keys[r]), int(c)): int(self.counts[r, c]) for r, c in zip(rows, cols)}

    def to_csv(self) -> str:
        lines = ["key,energy,count"]
        lines.extend(f"{key},{e},{c}" for (key, e), c in sorted(self.as_dict().items()))
        return "\n".join(lines) + "\n"

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def _gray_inputs(H: Hypergraph, mode: str, reference: Coloring | None):
    ptr, inc = H.incidence
    ev = np.ascontiguousarray(H.edges, dtype=np.int64)
    ref = 0 if reference is None else reference.to_int()
    return ptr, inc, ev, np.int64(ref), 0 if mode == "magnetization" else 1


def _check_mode(H: Hypergraph, mode: str, reference: Coloring | None, cap: int):
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}, got {mode!r}")
    if mode == "overlap":
        if reference is None:
            raise ParameterError("overlap mode needs a reference coloring")
        if reference.n != H.n:
            raise ParameterError(f"reference has length {reference.n}, hypergraph has n={H.n}")
    if H.n > cap:
        raise CapacityError(f"n = {H.n} exceeds the enumeration cap of {cap} vertices")
    if H.n > 62:
        raise CapacityError("enumeration is limited to n <= 62 by 64-bit coloring indices")


def spectrum(H: Hypergraph, mode: str = "magnetization", reference: Coloring | None = None,
             cap: int = ENUMERATION_CAP) -> SpectrumTable:
    """Joint (key, energy) histogram over all 2^n colorings via a Gray-code walk.

    The walk is split into contiguous blocks, each started from its directly
    computed boundary state, and merged in block order.
    """
    _check_mode(H, mode, reference, cap)
    n, m = H.n, H.m
    nblocks = min(_BLOCKS, 1 << n)
    while nblocks > 1 and nblocks * (n + 1) * (m + 1) * 8 > _HIST_BYTES_MAX:
        nblocks //= 2
    ptr, inc, ev, ref, code = _gray_inputs(H, mode, reference)
    counts = _spectrum_kernel(n, H.k, m, ptr, inc, ev, ref, code, nblocks)
    counts.flags.writeable = False
    return SpectrumTable(mode, n, H.k, m, counts, reference if mode == "overlap" else None)


@dataclass(frozen=True)
class Restriction:
    """Which (key, energy) cells a restricted partition sum admits.

    variant is one of all, balanced, imbalanced, energy_window,
    overlap_at_least. imbalanced(eps) admits | |sigma^-1(+1)| - n/2 | > eps n;
    energy_window(eps) admits |E - m0| > eps m with m0 the typical energy
    at the requested beta; overlap_at_least(theta) admits overlap >= theta n.
    """

    variant: str = "all"
    param: float | None = None

    def __post_init__(self):
        if self.variant in ("all", "balanced"):
            if self.param is not None:
                raise ParameterError(f"{self.variant} takes no parameter")
        elif self.variant in ("imbalanced", "energy_window"):
            if self.param is None or not 0 < self.param < 1:
                raise ParameterError(f"{self.variant} needs eps in (0, 1), got {self.param}")
        elif self.variant == "overlap_at_least":
            if self.param is None or not -1 <= self.param <= 1:
                raise ParameterError(f"overlap_at_least needs theta in [-1, 1], got {self.param}")
        else:
            raise ParameterError(f"unknown restriction {self.variant!r}")

    @classmethod
    def all(cls) -> Restriction:
        return cls("all")

    @classmethod
    def balanced(cls) -> Restriction:
        return cls("balanced")

    @classmethod
    def imbalanced(cls, eps: float) -> Restriction:
        return cls("imbalanced", eps)

    @classmethod
    def energy_window(cls, eps: float) -> Restriction:
        return cls("energy_window", eps)

    @classmethod
    def overlap_at_least(cls, theta: float) -> Restriction:
        return cls("overlap_at_least", theta)

    def mask(self, T: SpectrumTable, beta: float) -> np.ndarray:
        n, m = T.n, T.m
        j = np.arange(n + 1)
        E = np.arange(m + 1)
        rows = np.ones(n + 1, dtype=bool)
        cols = np.ones(m + 1, dtype=bool)
        v = self.variant
        if v in ("balanced", "imbalanced") and T.mode != "magnetization":
            raise ParameterError(f"{v} needs a magnetization-mode table")
        if v == "overlap_at_least" and T.mode != "overlap":
            raise ParameterError("overlap_at_least needs an overlap-mode table")
        if v == "balanced":
            rows = np.array([is_balanced_count(a, n) for a in j])
        elif v == "imbalanced":
            rows = np.abs(j - n / 2) > self.param * n
        elif v == "energy_window":
            m0 = m0_fraction(T.k, beta) * m
            cols = np.abs(E - m0) > self.param * m
        elif v == "overlap_at_least":
            # overlap values are integers; the slack absorbs rounding in theta * n
            rows = (2 * j - n) >= self.param * n - 1e-9
        return rows[:, None] & cols[None, :]


def partition_log(T: SpectrumTable, beta: float, sel: Restriction | None = None) -> float:
    """ln of the sum of counts * exp(-beta E) over admitted cells.

    Returns -inf when no coloring is admitted, so sweeps never abort.
    """
    if beta < 0:
        raise ParameterError(f"beta must be non-negative, got {beta}")
    sel = sel or Restriction.all()
    admitted = sel.mask(T, beta) & (T.counts > 0)
    rows, cols = np.nonzero(admitted)
    if len(rows) == 0:
        return -math.inf
    terms = np.log(T.counts[rows, cols].astype(np.float64)) - beta * cols
    return float(logsumexp(terms))


def cluster_log(T: SpectrumTable, beta: float, theta: float = 2 / 3) -> float:
    """ln of the Boltzmann mass of colorings with overlap >= theta n with the reference."""
    if T.mode != "overlap":
        raise ParameterError("cluster_log needs an overlap-mode table")
    return partition_log(T, beta, Restriction.overlap_at_least(theta))


def log_partition(H: Hypergraph, beta: float, cap: int = ENUMERATION_CAP) -> float:
    """ln Z_beta(H) by enumeration."""
    return partition_log(spectrum(H, cap=cap), beta)


def boltzmann_sample(T: SpectrumTable, H: Hypergraph, beta: float, seed, size: int | None = None):
    """Exact draw(s) from the Boltzmann distribution at inverse temperature beta.

    A cell is drawn with probability proportional to counts * exp(-beta E), a
    uniform rank inside the cell is drawn, and the Gray code is re-walked to
    find the coloring holding that rank. With size=None one Coloring is
    returned, otherwise a list.
    """
    if T.n != H.n or T.m != H.m or T.k != H.k:
        raise ParameterError("table does not belong to this hypergraph")
    _check_mode(H, T.mode, T.reference, max(ENUMERATION_CAP, H.n))
    rng = make_rng(seed)
    draws = 1 if size is None else int(size)
    flat = T.counts.ravel()
    nz = np.flatnonzero(flat)
    E = nz % (T.m + 1)
    logw = np.log(flat[nz].astype(np.float64)) - beta * E
    prob = np.exp(logw - logsumexp(logw))
    prob /= prob.sum()
    cells = nz[rng.choice(len(nz), size=draws, p=prob)]
    ranks = rng.integers(0, flat[cells])
    order = np.lexsort((ranks, cells))
    t_cell, t_rank, t_slot = cells[order], ranks[order], order.astype(np.int64)
    ncells = len(flat)
    cell_start = np.searchsorted(t_cell, np.arange(ncells), side="left").astype(np.int64)
    cell_end = np.searchsorted(t_cell, np.arange(ncells), side="right").astype(np.int64)
    out = np.full(draws, -1, dtype=np.int64)
    ptr, inc, ev, ref, code = _gray_inputs(H, T.mode, T.reference)
    _select_kernel(H.n, H.k, H.m, ptr, inc, ev, ref, code, cell_start, cell_end,
                   t_rank.astype(np.int64), t_slot, out)
    result = [Coloring.from_int(int(x), H.n) for x in out]
    return result[0] if size is None else result


def is_tame(H: Hypergraph, sigma: Coloring, beta: float, expected_logZ: float,
            theta: float = 2 / 3, cap: int = ENUMERATION_CAP) -> bool:
    """Balanced, and cluster mass at most the given expected partition function."""
    if not is_balanced(sigma):
        return False
    T = spectrum(H, "overlap", sigma, cap=cap)
    return cluster_log(T, beta, theta) <= expected_logZ
