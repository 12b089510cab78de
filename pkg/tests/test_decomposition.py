import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypercolor.decomposition import (CR1, CR2, K8_THRESHOLDS, LARGE_K_THRESHOLDS, PROFILES, SMALL_THRESHOLDS,
                                      WH1_MONO, WH1_SUPPORT, Decomposition, Thresholds, classify_vertices,
                                      cluster_log_estimate, core_peel, decompose, edge_data, endangered_count,
                                      verify_core, whitening)
from hypercolor.enumeration import cluster_log, spectrum
from hypercolor.errors import ParameterError
from hypercolor.hypergraph import Coloring, Hypergraph, monochromatic_count
from hypercolor.planted import gen_planted

LN2 = math.log(2)


# ---------------------------------------------------------------- naive oracles

def supports(bits, e, v):
    return all(bits[w] != bits[v] for w in e if w != v)


def naive_supporter(bits, e):
    for v in e:
        if supports(bits, e, v):
            return v
    return -1


def naive_endangered(bits, e, S):
    part = [bits[w] for w in e if w in S]
    return bool(part) and len(set(part)) == 1


def naive_core(H, sigma, th):
    bits = sigma.bits.tolist()
    edges = [tuple(r) for r in H.edges.tolist()]
    sup = [naive_supporter(bits, e) for e in edges]
    S = set(range(H.n))
    while True:
        bad = set()
        for v in S:
            s_in = sum(1 for e, s in zip(edges, sup) if s == v and all(w in S for w in e))
            dang = sum(1 for e in edges if v in e and naive_endangered(bits, e, S))
            if s_in < th.core_support or dang > th.core_endangered:
                bad.add(v)
        if not bad:
            return sorted(S)
        S -= bad


def naive_whitening(H, sigma, th):
    bits = sigma.bits.tolist()
    edges = [tuple(r) for r in H.edges.tolist()]
    sup = [naive_supporter(bits, e) for e in edges]
    U = set()
    for v in range(H.n):
        s = sum(1 for x in sup if x == v)
        mono = sum(1 for e in edges if v in e and len({bits[w] for w in e}) == 1)
        if s < th.wh_support or mono > th.wh_mono:
            U.add(v)
    while True:
        outside = set(range(H.n)) - U
        bad = set()
        for v in outside:
            s_out = sum(1 for e, s in zip(edges, sup) if s == v and not any(w in U for w in e))
            dang = sum(1 for e in edges if v in e and any(w in U for w in e)
                       and naive_endangered(bits, e, outside))
            if s_out < th.wh_keep_support or dang > th.wh_endangered:
                bad.add(v)
        if not bad:
            return sorted(U)
        U |= bad


def triangle_instance():
    """Every vertex supports an edge and no edge is monochromatic."""
    edges = [[0, 3, 4], [1, 3, 4], [2, 3, 4], [0, 1, 3], [0, 1, 4], [0, 1, 5]]
    sigma = Coloring(np.array([1, 1, 1, 0, 0, 0], dtype=bool))
    return Hypergraph(6, 3, np.array(edges)), sigma


FULL = Thresholds(core_support=1, core_endangered=0, wh_support=1, wh_mono=0, wh_keep_support=1,
                  wh_endangered=0)


@st.composite
def planted_small(draw):
    n = draw(st.integers(12, 60))
    d = draw(st.floats(2.0, 14.0))
    beta = draw(st.floats(0.0, 4.0))
    seed = draw(st.integers(0, 2**32 - 1))
    inst = gen_planted(d, 3, n, beta, seed, balanced=bool(seed & 1))
    return inst.hypergraph, inst.sigma


class TestThresholds:
    def test_defaults(self):
        t = LARGE_K_THRESHOLDS
        assert (t.core_support, t.core_endangered, t.wh_support, t.wh_mono, t.wh_keep_support,
                t.wh_endangered, t.rigidity_factor) == (100, 10, 200, 2, 150, 5, 88)
        assert t.x(4) == 4**-5 and t.cluster_overlap == 2 / 3

    def test_invariants(self):
        with pytest.raises(ParameterError):
            Thresholds(wh_keep_support=50)
        with pytest.raises(ParameterError):
            Thresholds(wh_mono=6)

    def test_profiles_valid(self):
        assert set(PROFILES) == {"large_k", "small", "k8"}


class TestEndangered:
    def test_empty_set(self):
        H, s = triangle_instance()
        assert all(endangered_count(H, s, [], v) == 0 for v in range(6))

    def test_full_set_counts_mono(self):
        H = Hypergraph(4, 3, np.array([[0, 1, 2], [1, 2, 3]]))
        s = Coloring(np.array([1, 1, 1, 0], dtype=bool))
        got = [endangered_count(H, s, np.arange(4), v) for v in range(4)]
        assert got == [1, 1, 1, 0]

    @given(planted_small(), st.integers(0, 2**32 - 1))
    def test_vs_naive(self, inst, seed):
        H, s = inst
        rng = np.random.default_rng(seed)
        U = set(np.flatnonzero(rng.random(H.n) < 0.5).tolist())
        bits = s.bits.tolist()
        for v in range(0, H.n, 3):
            want = sum(1 for e in H.edges.tolist() if v in e and naive_endangered(bits, e, U))
            assert endangered_count(H, s, sorted(U), v) == want


class TestCorePeel:
    def test_empty_hypergraph(self):
        H = Hypergraph(5, 3, np.zeros((0, 3), np.int64))
        s = Coloring(np.zeros(5, dtype=bool))
        assert len(core_peel(H, s).members) == 0

    def test_constructed_fixed_point(self):
        H, s = triangle_instance()
        assert core_peel(H, s, FULL).members.tolist() == list(range(6))

    def test_order_independence_n300(self):
        inst = gen_planted(10.0, 3, 300, 3.0, 17, balanced=True)
        H, s = inst.hypergraph, inst.sigma
        base = core_peel(H, s, SMALL_THRESHOLDS)
        assert 0 < len(base.members) < 300
        rng = np.random.default_rng(0)
        for _ in range(20):
            order = rng.permutation(300)
            assert np.array_equal(core_peel(H, s, SMALL_THRESHOLDS, order=order).members, base.members)

    @settings(max_examples=60)
    @given(planted_small())
    def test_vs_naive_and_fixed_point(self, inst):
        H, s = inst
        got = core_peel(H, s, SMALL_THRESHOLDS)
        assert got.members.tolist() == naive_core(H, s, SMALL_THRESHOLDS)
        assert verify_core(H, s, got.members, SMALL_THRESHOLDS)

    @settings(max_examples=30)
    @given(planted_small())
    def test_trace_reasons_hold(self, inst):
        H, s = inst
        th = SMALL_THRESHOLDS
        res = core_peel(H, s, th)
        alive = np.ones(H.n, dtype=bool)
        bits = s.bits.tolist()
        edges = H.edges.tolist()
        for v, reason in res.trace.tolist():
            S = set(np.flatnonzero(alive).tolist())
            s_in = sum(1 for e in edges if naive_supporter(bits, e) == v and all(w in S for w in e))
            dang = sum(1 for e in edges if v in e and naive_endangered(bits, e, S))
            assert reason & (CR1 | CR2)
            assert bool(reason & CR1) == (s_in < th.core_support)
            assert bool(reason & CR2) == (dang > th.core_endangered)
            alive[v] = False
        assert sorted(np.flatnonzero(alive).tolist()) == res.members.tolist()

    def test_small_profile_keeps_core(self):
        # a supporter's removal makes the rest of its edges monochromatic, so too
        # tight an endangered allowance would empty the core at k = 3
        for seed in range(5):
            inst = gen_planted(10.0, 3, 300, 3.0, seed, balanced=True)
            assert len(core_peel(inst.hypergraph, inst.sigma, SMALL_THRESHOLDS).members) >= 240

    def test_bad_order(self):
        H, s = triangle_instance()
        with pytest.raises(ParameterError):
            core_peel(H, s, FULL, order=[0, 0, 1, 2, 3, 4])

    def test_k_two_rejected(self):
        H = Hypergraph(3, 2, np.array([[0, 1]]))
        with pytest.raises(ParameterError):
            edge_data(H, Coloring(np.array([1, 0, 1], dtype=bool)))


class TestWhitening:
    def test_empty_hypergraph(self):
        H = Hypergraph(5, 3, np.zeros((0, 3), np.int64))
        s = Coloring(np.zeros(5, dtype=bool))
        w = whitening(H, s)
        assert w.members.tolist() == list(range(5))
        assert all(r == WH1_SUPPORT for r in w.trace[:, 1])

    @settings(max_examples=60)
    @given(planted_small())
    def test_vs_naive_and_containment(self, inst):
        H, s = inst
        th = SMALL_THRESHOLDS
        w = whitening(H, s, th)
        assert w.members.tolist() == naive_whitening(H, s, th)
        outside = np.setdiff1d(np.arange(H.n), w.members)
        assert np.all(np.isin(outside, core_peel(H, s, th).members))

    def test_order_independence(self):
        inst = gen_planted(14.0, 3, 300, 3.0, 5, balanced=True)
        H, s = inst.hypergraph, inst.sigma
        base = whitening(H, s, SMALL_THRESHOLDS).members
        assert 0 < len(base) < 300
        rng = np.random.default_rng(1)
        for _ in range(20):
            got = whitening(H, s, SMALL_THRESHOLDS, order=rng.permutation(300)).members
            assert np.array_equal(got, base)

    def test_mono_reason(self):
        H = Hypergraph(4, 3, np.array([[0, 1, 2], [0, 1, 3], [0, 2, 3]]))
        s = Coloring(np.ones(4, dtype=bool))
        w = whitening(H, s, FULL)
        labels = dict((v, r) for v, r in w.trace.tolist())
        assert labels[0] & WH1_MONO


class TestClassify:
    def test_empty_core(self):
        H = Hypergraph(6, 3, np.array([[0, 1, 2], [1, 2, 3]]))
        s = Coloring(np.array([1, 0, 1, 0, 1, 0], dtype=bool))
        dec = classify_vertices(H, s, [])
        assert len(dec.backbone) == 0 and dec.rest.tolist() == list(range(6))
        assert dec.free.tolist() == [4, 5]

    def test_full_core(self):
        H, s = triangle_instance()
        dec = classify_vertices(H, s, np.arange(6))
        assert dec.sizes() == {"core": 6, "backbone": 0, "rest": 0, "free": 0}

    def test_partition_validated(self):
        z = np.zeros(0, np.int64)
        with pytest.raises(ParameterError):
            Decomposition(3, np.array([0, 1]), z, np.array([1, 2]), z, z, z, z)
        with pytest.raises(ParameterError):
            Decomposition(3, np.array([0]), z, np.array([1, 2]), np.array([0]), z, z, z)

    @settings(max_examples=40)
    @given(planted_small())
    def test_definitions_replayed(self, inst):
        H, s = inst
        dec = decompose(H, s, SMALL_THRESHOLDS)
        core = set(dec.core.tolist())
        bits = s.bits.tolist()
        edges = H.edges.tolist()
        for v in range(H.n):
            if v in core:
                continue
            inc = [e for e in edges if v in e]
            bb1 = any(supports(bits, e, v) and all(w in core for w in e if w != v) for e in inc)
            bb2 = not any(naive_endangered(bits, e, core | {v}) for e in inc)
            assert (v in dec.backbone) == (bb1 and bb2)
            is_free = all({bits[w] for w in e if w in core} == {True, False} for e in inc)
            assert (v in dec.free) == ((v in dec.rest) and is_free)

    @settings(max_examples=40)
    @given(planted_small(), st.integers(0, 2**32 - 1))
    def test_free_flip_energy_invariance(self, inst, seed):
        H, s = inst
        dec = decompose(H, s, SMALL_THRESHOLDS)
        e0 = monochromatic_count(H, s)
        rng = np.random.default_rng(seed)
        for _ in range(100):
            flip = dec.free[rng.random(len(dec.free)) < 0.5]
            assert monochromatic_count(H, s.flipped(flip)) == e0


class TestEstimate:
    def test_gap_is_rigidity_only(self):
        H, s = triangle_instance()
        dec = classify_vertices(H, s, np.arange(6))
        for beta in (0.01, 0.1, 1.0):
            est = cluster_log_estimate(H, s, beta, dec, FULL)
            assert est.upper_total - est.lower_total == pytest.approx(6 * math.exp(-88 * beta), rel=1e-12)

    def test_lower_formula(self):
        inst = gen_planted(10.0, 3, 200, 3.0, 3, balanced=True)
        H, s = inst.hypergraph, inst.sigma
        dec = decompose(H, s, SMALL_THRESHOLDS)
        est = cluster_log_estimate(H, s, 3.0, dec, SMALL_THRESHOLDS)
        assert len(dec.core) > 0
        assert est.lower_total == pytest.approx(len(dec.free) * LN2 - 3.0 * monochromatic_count(H, s))
        assert est.point == pytest.approx((est.lower + est.upper) / 2)
        assert est.lower <= est.upper
        assert "theta" in est.note

    def test_negative_beta(self):
        H, s = triangle_instance()
        with pytest.raises(ParameterError):
            cluster_log_estimate(H, s, -1.0, classify_vertices(H, s, []))

    def test_lower_below_exact_cluster(self):
        checked = 0
        for d, beta in ((6.0, 2.0), (10.0, 3.0)):
            for seed in range(100):
                inst = gen_planted(d, 3, 20, beta, seed, balanced=True)
                H, s = inst.hypergraph, inst.sigma
                dec = decompose(H, s, SMALL_THRESHOLDS)
                est = cluster_log_estimate(H, s, beta, dec, SMALL_THRESHOLDS)
                if not est.feasible or len(dec.core) == 0:
                    continue
                exact = cluster_log(spectrum(H, "overlap", s), beta, est.theta)
                assert est.lower_total <= exact + 1e-12
                checked += 1
        assert checked >= 100


@pytest.mark.slow
def test_k8_profile_whitening_small_at_scale():
    from hypercolor.phase import LN2 as L
    inst = gen_planted(8 * 2**7 * L, 8, 100_000, 8 * L, 77, balanced=True)
    w = whitening(inst.hypergraph, inst.sigma, K8_THRESHOLDS)
    assert len(w.members) / 100_000 <= 0.1
