"""Exact first and second moments of Z_beta for the with-replacement model.

With m i.i.d. uniform edges a coloring pair's weight factorises over edges,
so both moments reduce to sums over magnetization classes (first moment) or
over the four-cell decomposition of a pair (second moment).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ParameterError
from .hypergraph import ModelParams, binom, forb, is_balanced_count
from .phase import LN2, lambda_value, one_minus_exp


def _log_comb(n: int, a: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(a + 1) - math.lgamma(n - a + 1)


def first_moment_log(params: ModelParams) -> float:
    """ln E[Z_beta] = ln sum_a C(n,a) (1 - Forb(a)(1 - e^-beta)/N)^m."""
    n, k, m = params.n, params.k, params.m
    N = params.N
    b = one_minus_exp(params.beta)
    if b == 0.0 or m == 0:
        return n * LN2
    terms = [_log_comb(n, a) + m * math.log1p(-b * (forb(a, n, k) / N)) for a in range(n + 1)]
    return float(logsumexp(terms))


@dataclass(frozen=True)
class PairCells:
    """Sizes of the cells sigma^-1(s) & tau^-1(t) for s, t in {+, -}."""

    c_pp: int
    c_pm: int
    c_mp: int
    c_mm: int
    k: int

    def __post_init__(self):
        if min(self.c_pp, self.c_pm, self.c_mp, self.c_mm) < 0:
            raise ParameterError("cell sizes must be non-negative")
        if self.k < 1 or self.n < self.k:
            raise ParameterError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")

    @property
    def n(self) -> int:
        return self.c_pp + self.c_pm + self.c_mp + self.c_mm

    @property
    def sigma_plus(self) -> int:
        return self.c_pp + self.c_pm

    @property
    def tau_plus(self) -> int:
        return self.c_pp + self.c_mp

    @property
    def agreement(self) -> int:
        return self.c_pp + self.c_mm

    def mono_counts(self) -> tuple[int, int, int]:
        """k-sets monochromatic under sigma, under tau, and under both."""
        n, k = self.n, self.k
        both = sum(binom(c, k) for c in (self.c_pp, self.c_pm, self.c_mp, self.c_mm))
        return forb(self.sigma_plus, n, k), forb(self.tau_plus, n, k), both


def log_pair_edge_weight(cells: PairCells, beta: float) -> float:
    fs, ft, fb = cells.mono_counts()
    N = binom(cells.n, cells.k)
    # 1 - w = (1-e^-b)(P[sigma only] + P[tau only]) + (1-e^-2b) P[both]
    loss = one_minus_exp(beta) * ((fs + ft - 2 * fb) / N) + one_minus_exp(2 * beta) * (fb / N)
    return math.log1p(-loss)


def pair_edge_weight(cells: PairCells, beta: float) -> float:
    """E[exp(-beta (1[sigma mono on e] + 1[tau mono on e]))] for a uniform k-set e."""
    fs, ft, fb = cells.mono_counts()
    N = binom(cells.n, cells.k)
    # written as 1 - loss so that beta = 0 gives exactly 1
    loss = one_minus_exp(beta) * ((fs + ft - 2 * fb) / N) + one_minus_exp(2 * beta) * (fb / N)
    return 1.0 - loss


def feasible_alphas(n: int) -> list[float]:
    return [(2 * A - n) / n for A in range(n + 1)]


def _agreement(n: int, alpha: float) -> int:
    if not -1.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must lie in [-1, 1], got {alpha}")
    x = (1 + alpha) * n / 2
    A = round(x)
    if abs(A - x) > 1e-9:
        raise ParameterError(f"(1+alpha)n/2 = {x} is not an integer for n = {n}: alpha infeasible")
    return A


def second_moment_alpha_log(params: ModelParams, alpha: float) -> float:
    """ln E[Z_beta(alpha)]: sum over balanced pairs with overlap alpha n.

    Pairs are grouped by the magnetization of sigma and the cell vector; each
    class contributes multinomial(n; cells) * w^m.
    """
    n, k, m, beta = params.n, params.k, params.m, params.beta
    A = _agreement(n, alpha)
    lg = [math.lgamma(i + 1) for i in range(n + 1)]
    terms = []
    for a in range(n + 1):
        if not is_balanced_count(a, n):
            continue
        for x in range(max(0, a + A - n), min(a, A) + 1):
            c_pm, c_mm = a - x, A - x
            c_mp = n - a - c_mm
            if not is_balanced_count(x + c_mp, n):
                continue
            cells = PairCells(x, c_pm, c_mp, c_mm, k)
            log_mult = lg[n] - lg[x] - lg[c_pm] - lg[c_mp] - lg[c_mm]
            terms.append(log_mult + m * log_pair_edge_weight(cells, beta))
    if not terms:
        return -math.inf
    return float(logsumexp(terms))


def second_moment_log(params: ModelParams) -> float:
    """ln E[Z_bal^2]: the alpha-resolved sums added over every feasible alpha."""
    vals = [second_moment_alpha_log(params, a) for a in feasible_alphas(params.n)]
    return float(logsumexp(np.array(vals)))


def lambda_asymptotic_log(params: ModelParams, alpha: float) -> float:
    """ln 2 + Lambda_beta(alpha), the predicted value of (1/n) ln E[Z_beta(alpha)]."""
    if not -1.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (-1, 1), got {alpha}")
    return LN2 + float(lambda_value(params.d, params.k, params.beta, alpha))
