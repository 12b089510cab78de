"""The planted model: a hidden coloring sigma, and each k-set present with
probability p1 if sigma makes it monochromatic and p2 otherwise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rng import make_rng
from .errors import ParameterError
from .hypergraph import (MATERIALISE_MAX_SETS, PER_SET_MAX_N, Coloring, Hypergraph, ModelParams, all_ksets,
                         binom, choose_distinct, is_balanced_count, log_binom, sample_binomial, uniform_ksets)
from .phase import one_minus_exp


@dataclass(frozen=True, eq=False)
class PlantedInstance:
    hypergraph: Hypergraph
    sigma: Coloring
    params: ModelParams
    p1: float
    p2: float


def planted_params(d: float, k: int, n: int, beta: float) -> tuple[float, float]:
    """(p1, p2): edge probabilities for monochromatic and bichromatic k-sets."""
    if n < k or k < 2:
        raise ParameterError(f"need 2 <= k <= n, got n={n}, k={k}")
    if not beta >= 0 or not d >= 0:
        raise ParameterError("need d >= 0 and beta >= 0")
    p2 = d / ((1 - math.ldexp(one_minus_exp(beta), 1 - k)) * binom(n - 1, k - 1))
    p1 = math.exp(-beta) * p2
    if not 0 <= p2 <= 1:
        raise ParameterError(f"planted edge probability p2 = {p2} outside [0, 1]")
    return p1, p2


def balanced_magnetizations(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Admissible +1 counts of a balanced coloring and their conditional law."""
    a = np.array([x for x in range(n + 1) if is_balanced_count(x, n)])
    logw = np.array([log_binom(n, x) for x in a])
    w = np.exp(logw - logw.max())
    return a, w / w.sum()


def planted_coloring(rng: np.random.Generator, n: int, balanced: bool) -> Coloring:
    if not balanced:
        return Coloring(rng.integers(0, 2, size=n).astype(bool))
    a_vals, prob = balanced_magnetizations(n)
    a = int(a_vals[rng.choice(len(a_vals), p=prob)])
    bits = np.zeros(n, dtype=bool)
    bits[rng.permutation(n)[:a]] = True
    return Coloring(bits)


def _is_mono_rows(bits: np.ndarray, rows: np.ndarray) -> np.ndarray:
    s = bits[rows].sum(axis=1)
    return (s == 0) | (s == rows.shape[1])


def _planted_edges_large(rng, n, k, bits, p1, p2):
    plus = np.flatnonzero(bits)
    minus = np.flatnonzero(~bits)
    n_mono_plus, n_mono_minus = binom(len(plus), k), binom(len(minus), k)
    n_mono = n_mono_plus + n_mono_minus
    n_bi = binom(n, k) - n_mono
    c_mono = sample_binomial(rng, n_mono, p1)
    c_bi = sample_binomial(rng, n_bi, p2)
    share_plus = n_mono_plus / n_mono if n_mono else 0.0

    def draw_mono(r, c):
        from_plus = r.random(c) < share_plus
        cp = int(from_plus.sum())
        rows = [plus[uniform_ksets(r, len(plus), k, cp)] if cp else np.zeros((0, k), np.int64),
                minus[uniform_ksets(r, len(minus), k, c - cp)] if c - cp else np.zeros((0, k), np.int64)]
        return np.sort(np.concatenate(rows), axis=1)

    bi_share = n_bi / binom(n, k)

    def draw_bi(r, c):
        # oversample so one pass usually suffices; a prefix of i.i.d. draws is still i.i.d.
        rows = uniform_ksets(r, n, k, int(c / bi_share * 1.01) + 16)
        return rows[~_is_mono_rows(bits, rows)][:c]

    mono_members = bi_members = None
    if binom(n, k) <= MATERIALISE_MAX_SETS and (c_mono > n_mono // 4 or c_bi > n_bi // 4):
        sets = all_ksets(n, k)
        is_mono = _is_mono_rows(bits, sets)
        mono_members, bi_members = sets[is_mono], sets[~is_mono]
    mono = choose_distinct(rng, n, k, c_mono, mono_members, draw=draw_mono, universe=n_mono)
    bi = choose_distinct(rng, n, k, c_bi, bi_members, draw=draw_bi, universe=n_bi)
    return np.concatenate([mono, bi])


def gen_planted(d: float, k: int, n: int, beta: float, seed, balanced: bool = False) -> PlantedInstance:
    """Draw (G, sigma) from the planted model.

    For n <= 20 every k-set gets its own coin. Beyond that the numbers of
    monochromatic and bichromatic edges are drawn from binomials over the
    exact class sizes and that many distinct uniform members of each class
    are sampled, which has the same law.
    """
    params = ModelParams(n=n, k=k, d=d, beta=beta)
    p1, p2 = planted_params(d, k, n, beta)
    rng = make_rng(seed)
    sigma = planted_coloring(rng, n, balanced)
    if n <= PER_SET_MAX_N:
        sets = all_ksets(n, k)
        prob = np.where(_is_mono_rows(sigma.bits, sets), p1, p2)
        edges = sets[rng.random(len(sets)) < prob]
    else:
        edges = _planted_edges_large(rng, n, k, sigma.bits, p1, p2)
    return PlantedInstance(Hypergraph(n, k, edges), sigma, params, p1, p2)


def expected_mono_edges(d: float, k: int, n: int, beta: float) -> tuple[float, float | None]:
    """Expected E_G(sigma) in the planted model.

    Returns the leading-order value e^-b/(2^(k-1) - 1 + e^-b) (d/k) n and, for
    even n, the exact value for an exactly balanced sigma, 2 C(n/2, k) p1.
    """
    q = math.exp(-beta)
    leading = q / (2.0 ** (k - 1) - 1 + q) * (d / k) * n
    exact = None
    if n % 2 == 0:
        p1, _ = planted_params(d, k, n, beta)
        exact = 2 * binom(n // 2, k) * p1
    return leading, exact


def support_rate(d: float, k: int, beta: float) -> float:
    """Mean number of edges a vertex supports, d / (2^(k-1) - 1 + e^-beta).

    Close to k ln 2 when d/k is near 2^(k-1) ln 2 and beta is large.
    """
    return d / (2.0 ** (k - 1) - 1 + math.exp(-beta))


def mono_degree_rate(d: float, k: int, n: int, beta: float) -> float:
    """Mean number of monochromatic edges at a vertex, C(n-1, k-1) p1 / 2^(k-1)."""
    p1, _ = planted_params(d, k, n, beta)
    return binom(n - 1, k - 1) * p1 / 2.0 ** (k - 1)
