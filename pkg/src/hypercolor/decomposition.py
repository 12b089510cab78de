"""Core / backbone / rest / free decomposition of a colored hypergraph and the
cluster-size estimate assembled from it.

Terminology, for a coloring sigma:
  v supports e      every other vertex of e has the color opposite to v
                    (such an edge is critical; for k >= 3 its supporter is unique)
  e is U-endangered the vertices of e inside U are nonempty and share one color
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import ParameterError
from .hypergraph import Coloring, Hypergraph, monochromatic_count

LN2 = math.log(2.0)

# reason codes recorded in peeling traces
CR1, CR2 = 1, 2
WH1_SUPPORT, WH1_MONO, WH2_SUPPORT, WH2_ENDANGERED = 4, 8, 16, 32
REASONS = {CR1: "CR1", CR2: "CR2", WH1_SUPPORT: "WH1-support", WH1_MONO: "WH1-mono",
           WH2_SUPPORT: "WH2-support", WH2_ENDANGERED: "WH2-endangered"}


@dataclass(frozen=True)
class Thresholds:
    """Peeling thresholds. Defaults are the large-k constants; the named
    profiles below scale them down to the degrees seen at small k."""

    core_support: int = 100
    core_endangered: int = 10
    wh_support: int = 200
    wh_mono: int = 2
    wh_keep_support: int = 150
    wh_endangered: int = 5
    rigidity_factor: int = 88
    x_fraction: float | None = None
    cluster_overlap: float = 2 / 3

    def __post_init__(self):
        if self.wh_keep_support < self.core_support:
            raise ParameterError("need wh_keep_support >= core_support")
        if self.wh_mono + self.wh_endangered > self.core_endangered:
            raise ParameterError("need wh_mono + wh_endangered <= core_endangered")
        if min(self.core_support, self.core_endangered, self.wh_support, self.wh_mono,
               self.wh_keep_support, self.wh_endangered) < 0:
            raise ParameterError("thresholds must be non-negative")
        if not -1 <= self.cluster_overlap <= 1:
            raise ParameterError("cluster_overlap must lie in [-1, 1]")

    def x(self, k: int) -> float:
        return k ** -5.0 if self.x_fraction is None else self.x_fraction


LARGE_K_THRESHOLDS = Thresholds()
# k = 3, n in the tens to hundreds, d around 10. Removing the supporter of a
# critical edge leaves the rest of that edge monochromatic, so at small k each
# removal endangers several neighbours; the allowance must stay above 1 or the
# core always peels to nothing.
SMALL_THRESHOLDS = Thresholds(core_support=1, core_endangered=4, wh_support=2, wh_mono=1,
                              wh_keep_support=1, wh_endangered=3)
# k = 8 near d/k = 2^7 ln 2: about 5.5 supported edges and 0.02 monochromatic
# edges per vertex, but each vertex sits opposite the supporter in ~39 critical
# edges, so the endangered allowances must stay well above 1.
K8_THRESHOLDS = Thresholds(core_support=1, core_endangered=10, wh_support=2, wh_mono=2,
                           wh_keep_support=1, wh_endangered=8)
PROFILES = {"large_k": LARGE_K_THRESHOLDS, "small": SMALL_THRESHOLDS, "k8": K8_THRESHOLDS}


# ---------------------------------------------------------------- edge data

@dataclass(frozen=True, eq=False)
class EdgeData:
    """Per-edge facts about (H, sigma) shared by every stage."""

    plus: np.ndarray        # number of +1 vertices in each edge
    supporter: np.ndarray   # supporting vertex of a critical edge, -1 otherwise
    mono: np.ndarray        # monochromatic edges (bool)


def edge_data(H: Hypergraph, sigma: Coloring) -> EdgeData:
    if sigma.n != H.n:
        raise ParameterError(f"coloring has length {sigma.n}, hypergraph has n={H.n}")
    if H.k < 3:
        raise ParameterError("supporters are unique only for k >= 3")
    bits = sigma.bits
    k = H.k
    plus = np.zeros(H.m, dtype=np.int64)
    for j in range(k):
        plus += bits[H.edges[:, j]]
    supporter = np.full(H.m, -1, dtype=np.int64)
    for j in range(k):
        col = H.edges[:, j]
        b = bits[col]
        hit = ((plus == 1) & b) | ((plus == k - 1) & ~b)
        supporter[hit] = col[hit]
    return EdgeData(plus, supporter, (plus == 0) | (plus == k))


def support_counts(H: Hypergraph, sigma: Coloring, ed: EdgeData | None = None) -> np.ndarray:
    """Number of edges each vertex supports."""
    ed = ed or edge_data(H, sigma)
    s = ed.supporter
    return np.bincount(s[s >= 0], minlength=H.n)


def mono_degrees(H: Hypergraph, sigma: Coloring, ed: EdgeData | None = None) -> np.ndarray:
    """M'(v): number of monochromatic edges containing v."""
    ed = ed or edge_data(H, sigma)
    return np.bincount(H.edges[ed.mono].ravel(), minlength=H.n)


def _per_vertex(H: Hypergraph, edge_flag: np.ndarray) -> np.ndarray:
    """For each vertex, the number of flagged edges containing it."""
    return np.bincount(H.edges[edge_flag].ravel(), minlength=H.n)


def _restricted_counts(H: Hypergraph, sigma: Coloring, mask: np.ndarray):
    inside = np.zeros(H.m, dtype=np.int64)
    plus_in = np.zeros(H.m, dtype=np.int64)
    pm = mask & sigma.bits
    for j in range(H.k):
        col = H.edges[:, j]
        inside += mask[col]
        plus_in += pm[col]
    return inside, plus_in, inside - plus_in


def endangered_edges(H: Hypergraph, sigma: Coloring, U) -> np.ndarray:
    """Boolean per edge: the part of e inside U is nonempty and monochromatic."""
    mask = as_mask(U, H.n)
    inside, p, q = _restricted_counts(H, sigma, mask)
    return (inside > 0) & ((p == 0) | (q == 0))


def endangered_count(H: Hypergraph, sigma: Coloring, U, v: int) -> int:
    """Number of U-endangered edges containing v."""
    if not 0 <= v < H.n:
        raise ParameterError(f"vertex {v} outside [0, {H.n})")
    ptr, inc = H.incidence
    flags = endangered_edges(H, sigma, U)
    return int(np.count_nonzero(flags[inc[ptr[v]:ptr[v + 1]]]))


def as_mask(U, n: int) -> np.ndarray:
    arr = np.asarray(U)
    if arr.dtype == bool:
        if arr.shape != (n,):
            raise ParameterError(f"vertex mask must have length {n}")
        return arr
    mask = np.zeros(n, dtype=bool)
    if arr.size:
        idx = arr.astype(np.int64).ravel()
        if idx.min() < 0 or idx.max() >= n:
            raise ParameterError(f"vertex index outside [0, {n})")
        mask[idx] = True
    return mask


def set_counters(H: Hypergraph, sigma: Coloring, mask: np.ndarray, ed: EdgeData | None = None):
    """From scratch: supported edges lying inside the set, and endangered edges
    (w.r.t. the set) at each vertex."""
    ed = ed or edge_data(H, sigma)
    inside, p, q = _restricted_counts(H, sigma, mask)
    full = (inside == H.k) & (ed.supporter >= 0)
    sup_in = np.bincount(ed.supporter[full], minlength=H.n)
    danger = (inside > 0) & ((p == 0) | (q == 0))
    return sup_in, _per_vertex(H, danger)


# ---------------------------------------------------------------- worklist kernels

@njit(cache=True)
def _heap_push(heap, size, key):
    i = size
    heap[i] = key
    while i > 0:
        parent = (i - 1) >> 1
        if heap[parent] <= heap[i]:
            break
        heap[parent], heap[i] = heap[i], heap[parent]
        i = parent
    return size + 1


@njit(cache=True)
def _heap_pop(heap, size):
    top = heap[0]
    size -= 1
    heap[0] = heap[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        c = left
        if left + 1 < size and heap[left + 1] < heap[left]:
            c = left + 1
        if heap[i] <= heap[c]:
            break
        heap[i], heap[c] = heap[c], heap[i]
        i = c
    return top, size


@njit(cache=True)
def _core_kernel(n, k, edges, bits, ptr, inc, supporter, sup_in, danger, rank, order, s_min, e_max):
    """Peel vertices violating CR1 (supported inside < s_min) or CR2
    (endangered > e_max), smallest rank first. Counters are updated in place."""
    m = edges.shape[0]
    alive = np.ones(n, np.bool_)
    ap = np.zeros(m, np.int64)
    am = np.zeros(m, np.int64)
    for e in range(m):
        for j in range(k):
            if bits[edges[e, j]]:
                ap[e] += 1
            else:
                am[e] += 1
    queued = np.zeros(n, np.bool_)
    heap = np.empty(n, np.int64)
    size = 0
    for v in range(n):
        if sup_in[v] < s_min or danger[v] > e_max:
            queued[v] = True
            size = _heap_push(heap, size, rank[v])
    trace_v = np.empty(n, np.int64)
    trace_r = np.empty(n, np.int64)
    t = 0
    while size > 0:
        key, size = _heap_pop(heap, size)
        v = order[key]
        reason = 0
        if sup_in[v] < s_min:
            reason |= 1
        if danger[v] > e_max:
            reason |= 2
        trace_v[t] = v
        trace_r[t] = reason
        t += 1
        alive[v] = False
        for idx in range(ptr[v], ptr[v + 1]):
            e = inc[idx]
            was_full = ap[e] + am[e] == k
            before = (ap[e] > 0) != (am[e] > 0)
            if bits[v]:
                ap[e] -= 1
            else:
                am[e] -= 1
            s = supporter[e]
            if was_full and s >= 0 and s != v and alive[s]:
                sup_in[s] -= 1
                if sup_in[s] < s_min and not queued[s]:
                    queued[s] = True
                    size = _heap_push(heap, size, rank[s])
            after = (ap[e] > 0) != (am[e] > 0)
            if after and not before:
                for j in range(k):
                    w = edges[e, j]
                    if alive[w]:
                        danger[w] += 1
                        if danger[w] > e_max and not queued[w]:
                            queued[w] = True
                            size = _heap_push(heap, size, rank[w])
    return alive, trace_v[:t], trace_r[:t]


@njit(cache=True)
def _whitening_kernel(n, k, edges, bits, ptr, inc, supporter, in_u, rank, order, keep_min, e_max):
    """Grow U from its initial value: add v outside U supporting fewer than
    keep_min edges inside V minus U, or lying in more than e_max edges that are
    (V minus U)-endangered and meet U."""
    m = edges.shape[0]
    np_ = np.zeros(m, np.int64)
    nm_ = np.zeros(m, np.int64)
    nu = np.zeros(m, np.int64)
    for e in range(m):
        for j in range(k):
            w = edges[e, j]
            if in_u[w]:
                nu[e] += 1
            elif bits[w]:
                np_[e] += 1
            else:
                nm_[e] += 1
    sup_out = np.zeros(n, np.int64)
    danger = np.zeros(n, np.int64)
    for e in range(m):
        s = supporter[e]
        if s >= 0 and nu[e] == 0:
            sup_out[s] += 1
        if nu[e] > 0 and (np_[e] > 0) != (nm_[e] > 0):
            for j in range(k):
                w = edges[e, j]
                if not in_u[w]:
                    danger[w] += 1
    queued = in_u.copy()
    heap = np.empty(n, np.int64)
    size = 0
    for v in range(n):
        if not in_u[v] and (sup_out[v] < keep_min or danger[v] > e_max):
            queued[v] = True
            size = _heap_push(heap, size, rank[v])
    trace_v = np.empty(n, np.int64)
    trace_r = np.empty(n, np.int64)
    t = 0
    while size > 0:
        key, size = _heap_pop(heap, size)
        v = order[key]
        reason = 0
        if sup_out[v] < keep_min:
            reason |= 16
        if danger[v] > e_max:
            reason |= 32
        trace_v[t] = v
        trace_r[t] = reason
        t += 1
        in_u[v] = True
        for idx in range(ptr[v], ptr[v + 1]):
            e = inc[idx]
            was_clear = nu[e] == 0
            before = nu[e] > 0 and (np_[e] > 0) != (nm_[e] > 0)
            nu[e] += 1
            if bits[v]:
                np_[e] -= 1
            else:
                nm_[e] -= 1
            s = supporter[e]
            if was_clear and s >= 0 and s != v and not in_u[s]:
                sup_out[s] -= 1
                if sup_out[s] < keep_min and not queued[s]:
                    queued[s] = True
                    size = _heap_push(heap, size, rank[s])
            after = (np_[e] > 0) != (nm_[e] > 0)
            if after and not before:
                for j in range(k):
                    w = edges[e, j]
                    if not in_u[w]:
                        danger[w] += 1
                        if danger[w] > e_max and not queued[w]:
                            queued[w] = True
                            size = _heap_push(heap, size, rank[w])
    return in_u, trace_v[:t], trace_r[:t]


def _ranks(n: int, order) -> tuple[np.ndarray, np.ndarray]:
    """(rank, order): order[r] is the vertex processed at priority r."""
    if order is None:
        ident = np.arange(n, dtype=np.int64)
        return ident, ident
    order = np.asarray(order, dtype=np.int64)
    if sorted(order.tolist()) != list(range(n)):
        raise ParameterError("order must be a permutation of the vertices")
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n, dtype=np.int64)
    return rank, order


# ---------------------------------------------------------------- operations

@dataclass(frozen=True, eq=False)
class PeelResult:
    members: np.ndarray   # sorted vertex indices (core, or U for whitening)
    trace: np.ndarray     # (t, 2) rows of (vertex, reason code)

    def mask(self, n: int) -> np.ndarray:
        return as_mask(self.members, n)

    def trace_labels(self) -> list[tuple[int, str]]:
        return [(int(v), "+".join(REASONS[b] for b in REASONS if r & b)) for v, r in self.trace.tolist()]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


def core_peel(H: Hypergraph, sigma: Coloring, thresholds: Thresholds = LARGE_K_THRESHOLDS,
              order=None, ed: EdgeData | None = None) -> PeelResult:
    """Largest vertex set in which every vertex supports at least core_support
    edges lying in the set and lies in at most core_endangered set-endangered
    edges.

    Violators are removed one at a time (smallest index first, or by the
    given priority order). Both conditions only get worse as the set shrinks,
    so the fixed point is the same for every removal order.
    """
    ed = ed or edge_data(H, sigma)
    ptr, inc = H.incidence
    rank, order = _ranks(H.n, order)
    sup_in = support_counts(H, sigma, ed).astype(np.int64)
    danger = mono_degrees(H, sigma, ed).astype(np.int64)
    alive, tv, tr = _core_kernel(H.n, H.k, H.edges, sigma.bits, ptr, inc, ed.supporter, sup_in, danger,
                                 rank, order, thresholds.core_support, thresholds.core_endangered)
    return PeelResult(_frozen(np.flatnonzero(alive)), _frozen(np.stack([tv, tr], axis=1)))


def whitening(H: Hypergraph, sigma: Coloring, thresholds: Thresholds = LARGE_K_THRESHOLDS,
              order=None, ed: EdgeData | None = None) -> PeelResult:
    """The set U: start from vertices supporting fewer than wh_support edges or
    lying in more than wh_mono monochromatic edges, then keep adding vertices
    that support fewer than wh_keep_support edges outside U or lie in more
    than wh_endangered edges that meet U and are endangered w.r.t. V minus U.
    """
    ed = ed or edge_data(H, sigma)
    ptr, inc = H.incidence
    rank, order = _ranks(H.n, order)
    sup = support_counts(H, sigma, ed)
    mono = mono_degrees(H, sigma, ed)
    low = sup < thresholds.wh_support
    many = mono > thresholds.wh_mono
    w1 = np.flatnonzero(low | many)
    w1_reason = np.where(low[w1], WH1_SUPPORT, 0) | np.where(many[w1], WH1_MONO, 0)
    in_u, tv, tr = _whitening_kernel(H.n, H.k, H.edges, sigma.bits, ptr, inc, ed.supporter,
                                     low | many, rank, order, thresholds.wh_keep_support,
                                     thresholds.wh_endangered)
    trace = np.concatenate([np.stack([w1, w1_reason], axis=1), np.stack([tv, tr], axis=1)])
    return PeelResult(_frozen(np.flatnonzero(in_u)), _frozen(trace.astype(np.int64)))


def verify_core(H: Hypergraph, sigma: Coloring, core, thresholds: Thresholds) -> bool:
    """Re-check CR1 and CR2 for every member of core from scratch."""
    mask = as_mask(core, H.n)
    sup_in, danger = set_counters(H, sigma, mask)
    return bool(np.all(sup_in[mask] >= thresholds.core_support)
                and np.all(danger[mask] <= thresholds.core_endangered))


@dataclass(frozen=True, eq=False)
class Decomposition:
    """core, backbone and rest partition the vertices; free is a subset of rest.

    Per-vertex arrays: support_count (edges the vertex supports),
    endangered_count (core-endangered edges containing it) and mono_degree
    (monochromatic edges containing it).
    """

    n: int
    core: np.ndarray
    backbone: np.ndarray
    rest: np.ndarray
    free: np.ndarray
    support_count: np.ndarray
    endangered_count: np.ndarray
    mono_degree: np.ndarray
    peel_trace: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), np.int64))

    def __post_init__(self):
        cover = np.zeros(self.n, dtype=np.int64)
        for part in (self.core, self.backbone, self.rest):
            np.add.at(cover, part, 1)
        if not np.all(cover == 1):
            raise ParameterError("core, backbone and rest must partition the vertex set")
        if not np.all(np.isin(self.free, self.rest)):
            raise ParameterError("free vertices must belong to rest")

    def sizes(self) -> dict[str, int]:
        return {"core": len(self.core), "backbone": len(self.backbone), "rest": len(self.rest),
                "free": len(self.free)}


def classify_vertices(H: Hypergraph, sigma: Coloring, core, ed: EdgeData | None = None,
                      peel_trace: np.ndarray | None = None) -> Decomposition:
    """Split the non-core vertices into backbone and rest, and find the free
    vertices of rest.

    backbone: supports an edge whose other vertices are all in the core, and
    every incident edge has a core vertex of the opposite color.
    free: every incident edge meets the core in both colors.
    """
    ed = ed or edge_data(H, sigma)
    n, k = H.n, H.k
    in_core = as_mask(core, n)
    inside, cp, cm = _restricted_counts(H, sigma, in_core)
    s = ed.supporter
    pinned = (s >= 0) & (inside == k - 1)
    pinned &= ~in_core[np.where(s >= 0, s, 0)]
    bb1 = np.bincount(s[pinned], minlength=n) > 0
    exposed = np.zeros(n, dtype=np.int64)
    for j in range(k):
        col = H.edges[:, j]
        opp = np.where(sigma.bits[col], cm, cp)
        exposed += np.bincount(col[opp == 0], minlength=n)
    backbone = ~in_core & bb1 & (exposed == 0)
    rest = ~in_core & ~backbone
    not_bichromatic = ~((cp > 0) & (cm > 0))
    free = rest & (_per_vertex(H, not_bichromatic) == 0)
    danger = (inside > 0) & ((cp == 0) | (cm == 0))
    trace = np.zeros((0, 2), np.int64) if peel_trace is None else peel_trace
    return Decomposition(n, _frozen(np.flatnonzero(in_core)), _frozen(np.flatnonzero(backbone)),
                         _frozen(np.flatnonzero(rest)), _frozen(np.flatnonzero(free)),
                         _frozen(support_counts(H, sigma, ed)), _frozen(_per_vertex(H, danger)),
                         _frozen(mono_degrees(H, sigma, ed)), _frozen(trace))


def decompose(H: Hypergraph, sigma: Coloring, thresholds: Thresholds = LARGE_K_THRESHOLDS) -> Decomposition:
    ed = edge_data(H, sigma)
    peel = core_peel(H, sigma, thresholds, ed=ed)
    return classify_vertices(H, sigma, peel.members, ed=ed, peel_trace=peel.trace)


@dataclass(frozen=True)
class ClusterEstimate:
    """Per-vertex (divided by n) bounds on the log cluster size.

    lower is exact whenever feasible is True: flipping any set of free
    vertices keeps the energy, and all such flips stay inside the cluster
    when |free| <= n (1 - theta) / 2. upper mixes exact terms with
    asymptotic ones; terms lists every summand unnormalised.
    """

    n: int
    lower: float
    upper: float
    point: float
    feasible: bool
    theta: float
    terms: dict
    note: str

    @property
    def lower_total(self) -> float:
        return self.lower * self.n

    @property
    def upper_total(self) -> float:
        return self.upper * self.n

    @property
    def point_total(self) -> float:
        return self.point * self.n


def cluster_log_estimate(H: Hypergraph, sigma: Coloring, beta: float, dec: Decomposition,
                         thresholds: Thresholds = LARGE_K_THRESHOLDS) -> ClusterEstimate:
    if not beta >= 0:
        raise ParameterError(f"beta must be non-negative, got {beta}")
    n = H.n
    energy = monochromatic_count(H, sigma)
    theta = thresholds.cluster_overlap
    n_free, n_rest, n_back = len(dec.free), len(dec.rest), len(dec.backbone)
    pinned_rest = np.setdiff1d(dec.rest, dec.free, assume_unique=True)
    terms = {
        "free_entropy": n_free * LN2,
        "rest_entropy": n_rest * LN2,
        "energy": beta * energy,
        "rest_mono_correction": beta * float(dec.mono_degree[pinned_rest].sum()),
        "core_rigidity": n * math.exp(-thresholds.rigidity_factor * beta),
        "backbone": math.exp(-beta) * n_back,
    }
    lower = terms["free_entropy"] - terms["energy"]
    upper = (terms["rest_entropy"] - terms["energy"] + terms["rest_mono_correction"]
             + terms["core_rigidity"] + terms["backbone"])
    feasible = n_free <= n * (1 - theta) / 2
    note = (f"estimate for overlap threshold theta={theta:.6g}; the core rigidity term is the one "
            f"derived for overlap >= (1-x)n with x={thresholds.x(H.k):.3g}")
    return ClusterEstimate(n, lower / n, upper / n, 0.5 * (lower + upper) / n, feasible, theta, terms, note)
