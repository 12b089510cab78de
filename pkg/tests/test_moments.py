import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from hypercolor.errors import ParameterError
from hypercolor.hypergraph import ModelParams, binom, forb
from hypercolor.moments import (PairCells, feasible_alphas, first_moment_log, lambda_asymptotic_log,
                                pair_edge_weight, second_moment_alpha_log, second_moment_log)
from hypercolor.phase import LN2, lambda_value, phi_upper

from _oracles import all_colorings, balanced, pair_weight_by_ksets


def brute_second_moment(n, k, m, beta, agreement=None):
    """Sum over every balanced pair (sigma, tau) of the exact pair weight ^ m."""
    colorings = [b for b in all_colorings(n) if balanced(int(b.sum()), n)]
    total = 0.0
    for s in colorings:
        for t in colorings:
            if agreement is not None and int(np.sum(s == t)) != agreement:
                continue
            total += pair_weight_by_ksets(n, k, s, t, beta) ** m
    return math.log(total) if total else -math.inf


class TestFirstMoment:
    def test_beta_zero(self):
        assert first_moment_log(ModelParams.from_m(12, 3, 8, 0.0)) == 12 * LN2

    def test_m_zero(self):
        assert first_moment_log(ModelParams.from_m(12, 3, 0, 2.0)) == pytest.approx(12 * LN2, rel=1e-15)

    def test_vs_brute_force(self):
        n, k, m, beta = 8, 3, 5, 0.7
        N = binom(n, k)
        total = 0.0
        for b in all_colorings(n):
            a = int(b.sum())
            total += (1 - forb(a, n, k) * (1 - math.exp(-beta)) / N) ** m
        assert first_moment_log(ModelParams.from_m(n, k, m, beta)) == pytest.approx(math.log(total), rel=1e-13)

    @given(st.integers(4, 30), st.integers(2, 4), st.integers(0, 40), st.floats(0, 5), st.floats(0, 2))
    def test_monotone(self, n, k, m, beta, db):
        if n < k:
            return
        try:
            p = ModelParams.from_m(n, k, m, beta)
            p2 = ModelParams.from_m(n, k, m + 1, beta)
        except ParameterError:
            return
        assert first_moment_log(ModelParams.from_m(n, k, m, beta + db)) <= first_moment_log(p) + 1e-12
        assert first_moment_log(p2) <= first_moment_log(p) + 1e-12


class TestPairWeight:
    @given(st.lists(st.integers(0, 4), min_size=4, max_size=4))
    def test_beta_zero_is_one(self, cells):
        if sum(cells) < 3:
            return
        assert pair_edge_weight(PairCells(*cells, k=3), 0.0) == 1.0

    @pytest.mark.parametrize("a", range(9))
    def test_equal_colorings_collapse(self, a):
        n, k, beta = 8, 3, 0.9
        want = 1 - forb(a, n, k) * (1 - math.exp(-2 * beta)) / binom(n, k)
        assert pair_edge_weight(PairCells(a, 0, 0, n - a, k), beta) == pytest.approx(want, rel=1e-14)

    def test_exhaustive_kset_oracle(self):
        s = np.array([1, 1, 1, 1, 0, 0, 0, 0], dtype=bool)
        t = np.array([1, 1, 0, 0, 1, 1, 0, 0], dtype=bool)
        got = pair_edge_weight(PairCells(2, 2, 2, 2, 3), 1.1)
        assert got == pytest.approx(pair_weight_by_ksets(8, 3, s, t, 1.1), rel=1e-14)

    @given(st.lists(st.integers(0, 5), min_size=4, max_size=4), st.floats(0, 6))
    def test_range(self, cells, beta):
        if sum(cells) < 3:
            return
        c = PairCells(*cells, k=3)
        w = pair_edge_weight(c, beta)
        assert math.exp(-2 * beta) - 1e-15 <= w <= 1 + 1e-15
        if beta > 0 and any(x >= 3 for x in cells[:0]):
            assert w < 1
        if beta > 0.01:
            assert (w == 1.0) == (max(c.mono_counts()[:2]) == 0)

    def test_invalid_cells(self):
        with pytest.raises(ParameterError):
            PairCells(-1, 2, 2, 2, 3)


class TestSecondMoment:
    def test_alpha_zero_brute_force(self):
        got = second_moment_alpha_log(ModelParams.from_m(8, 3, 4, 1.0), 0.0)
        assert got == pytest.approx(brute_second_moment(8, 3, 4, 1.0, agreement=4), rel=1e-9)

    def test_full_second_moment_brute_force(self):
        for m in (2, 4):
            got = second_moment_log(ModelParams.from_m(8, 3, m, 1.0))
            assert got == pytest.approx(brute_second_moment(8, 3, m, 1.0), rel=1e-9)

    def test_alpha_one_is_first_moment_at_double_beta(self):
        n, k, m, beta = 10, 3, 6, 0.8
        N = binom(n, k)
        terms = [math.comb(n, a) * (1 - forb(a, n, k) * (1 - math.exp(-2 * beta)) / N) ** m
                 for a in range(n + 1) if balanced(a, n)]
        assert second_moment_alpha_log(ModelParams.from_m(n, k, m, beta), 1.0) == pytest.approx(
            math.log(sum(terms)), rel=1e-13)

    @pytest.mark.parametrize("alpha", feasible_alphas(10))
    def test_symmetric(self, alpha):
        p = ModelParams.from_m(10, 3, 7, 1.3)
        assert second_moment_alpha_log(p, alpha) == pytest.approx(second_moment_alpha_log(p, -alpha), rel=1e-13)

    def test_infeasible_alpha(self):
        with pytest.raises(ParameterError):
            second_moment_alpha_log(ModelParams.from_m(8, 3, 4, 1.0), 0.1)
        with pytest.raises(ParameterError):
            second_moment_alpha_log(ModelParams.from_m(8, 3, 4, 1.0), 1.5)


class TestAsymptotic:
    def test_identity_at_zero(self):
        p = ModelParams(n=200, k=5, d=20, beta=1.0)
        assert lambda_asymptotic_log(p, 0.0) == pytest.approx(2 * phi_upper(20, 5, 1.0), rel=1e-13)

    @given(st.floats(-0.99, 0.99))
    def test_symmetric(self, alpha):
        p = ModelParams(n=200, k=5, d=20, beta=1.0)
        assert lambda_asymptotic_log(p, alpha) == pytest.approx(lambda_asymptotic_log(p, -alpha), rel=1e-13)

    def test_finite_size_fit(self):
        # residual r(n) = ln E[Z(0)] - n (ln 2 + Lambda(0)) + ln(n)/2 should be c0 + c1/n
        ns = np.arange(100, 401, 50)
        lam = LN2 + float(lambda_value(20, 5, 1.0, 0.0))
        r = np.array([second_moment_alpha_log(ModelParams(n=int(n), k=5, d=20, beta=1.0), 0.0)
                      - n * lam + 0.5 * math.log(n) for n in ns])
        A = np.column_stack([np.ones_like(ns, dtype=float), 1.0 / ns])
        coef, *_ = np.linalg.lstsq(A, r, rcond=None)
        assert np.max(np.abs(A @ coef - r)) < 1e-3
        c = abs(coef[0]) + abs(coef[1]) / 100
        p200 = ModelParams(n=200, k=5, d=20, beta=1.0)
        dev = second_moment_alpha_log(p200, 0.0) / 200 - lambda_asymptotic_log(p200, 0.0) + math.log(200) / 400
        assert abs(dev) <= c / 200

    def test_endpoint_rejected(self):
        with pytest.raises(ParameterError):
            lambda_asymptotic_log(ModelParams(n=20, k=3, d=2), 1.0)
