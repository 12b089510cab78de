import json
import math

import numpy as np
import pytest

from hypercolor.decomposition import K8_THRESHOLDS, SMALL_THRESHOLDS
from hypercolor.errors import ParameterError
from hypercolor.experiments import (CALIBRATION, SCHEMA, ExperimentReport, cluster_point_target, condensation_scan,
                                    decomposition_census, free_entropy_vs_bound, mc_first_moment_check, mean_se,
                                    planted_vs_null, scan_long_csv)
from hypercolor.phase import LN2, beta_crit_root, d_from_c


class TestReport:
    def test_mean_se(self):
        m, se = mean_se([1.0, 2.0, 3.0, 4.0])
        assert m == 2.5 and se == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2, rel=1e-15)
        assert math.isnan(mean_se([1.0])[1])

    def test_json_nonfinite_and_schema(self):
        rep = ExperimentReport("x", {"a": 1}, 3)
        rep.trials.append({"v": math.inf, "w": np.float64(math.nan), "b": np.bool_(True)})
        d = json.loads(rep.to_json())
        assert d["schema"] == SCHEMA and d["calibration_version"] == CALIBRATION["version"]
        assert d["trials"][0] == {"v": "inf", "w": "nan", "b": True}
        assert "wall_clock" not in d

    def test_csv(self):
        rep = ExperimentReport("x", {}, 0)
        assert rep.trials_csv() == ""
        rep.trials += [{"a": 1, "b": 0.5}, {"a": 2, "b": math.nan}]
        assert rep.trials_csv() == "a,b\n1,0.5\n2,nan\n"


class TestFirstMomentCheck:
    def test_beta_zero_exact(self):
        rep = mc_first_moment_check(10, 3, 0.0, 0.0, 5, 1, m=8)
        assert rep.verdicts["first_moment"]["pass"] is True
        assert all(t["z"] == pytest.approx(2.0**10, rel=1e-12) for t in rep.trials)

    def test_single_trial_flagged(self):
        rep = mc_first_moment_check(10, 3, 0.0, 1.0, 1, 1, m=8)
        v = rep.verdicts["first_moment"]
        assert v["pass"] is None and "insufficient" in v["note"]
        assert rep.passed

    def test_deterministic(self):
        a = mc_first_moment_check(10, 3, 0.0, 1.0, 30, 9, m=8)
        b = mc_first_moment_check(10, 3, 0.0, 1.0, 30, 9, m=8)
        assert a.to_json() == b.to_json()
        assert a.to_json() != mc_first_moment_check(10, 3, 0.0, 1.0, 30, 10, m=8).to_json()

    def test_aggregate_recomputes(self):
        rep = mc_first_moment_check(10, 3, 0.0, 1.0, 30, 9, m=8)
        m, se = mean_se([t["z"] for t in rep.trials])
        assert rep.aggregates["z"] == {"mean": m, "se": se}

    def test_passes(self):
        rep = mc_first_moment_check(12, 3, 0.0, 1.0, 400, 4, m=8)
        assert rep.verdicts["first_moment"]["pass"]


class TestFreeEntropy:
    def test_beta_zero(self):
        rep = free_entropy_vs_bound(12, 3, 1.0, 0.0, 4, 0)
        assert abs(rep.aggregates["deficit"]["mean"]) <= 1e-15

    def test_finite_size_allowance(self):
        # the deficit vanishes in this regime as n grows; fit deficit ~ c/n over n = 12..22
        ns = np.arange(12, 23, 2)
        reps = [free_entropy_vs_bound(int(n), 3, 1.0, 2.0, 40, 5) for n in ns]
        dm = np.array([r.aggregates["deficit"]["mean"] for r in reps])
        se = np.array([r.aggregates["deficit"]["se"] for r in reps])
        w = (ns / se) ** 2
        c = float(np.sum(w * dm * ns) / np.sum(w * ns * ns))
        for n, m, s in zip(ns, dm, se):
            assert abs(m - c / n) <= 4 * s
        i20 = list(ns).index(20)
        assert dm[i20] <= abs(c) / 20 + 4 * se[i20]
        assert all(r.verdicts["below_bound"]["pass"] for r in reps)


class TestCensus:
    def test_beta_zero_defined(self):
        rep = decomposition_census(300, 3, 10.0, 0.0, 3, 1, SMALL_THRESHOLDS)
        for t in rep.trials:
            assert t["core"] + t["backbone"] + t["rest"] == 300 and t["free"] <= t["rest"]
            assert t["energy"] >= 0 and t["contained"]

    def test_deterministic_and_self_consistent(self):
        a = decomposition_census(300, 3, 10.0, 3.0, 4, 2, SMALL_THRESHOLDS)
        b = decomposition_census(300, 3, 10.0, 3.0, 4, 2, SMALL_THRESHOLDS)
        assert a.to_json() == b.to_json()
        for key in ("core_fraction", "rest_scaled", "point"):
            m, se = mean_se([t[key] for t in a.trials])
            assert a.aggregates[key]["mean"] == m and a.aggregates[key]["se"] == se

    def test_standard_error_scaling(self):
        # fractions average over n vertices: s.e. ~ n^-1/2, so 4x the vertices halves it
        s1 = decomposition_census(400, 3, 10.0, 3.0, 60, 3, SMALL_THRESHOLDS).aggregates["core_fraction"]["se"]
        s2 = decomposition_census(1600, 3, 10.0, 3.0, 60, 4, SMALL_THRESHOLDS).aggregates["core_fraction"]["se"]
        assert 0.3 <= s2 / s1 <= 0.75


class TestScan:
    def test_grid_domain(self):
        with pytest.raises(ParameterError):
            condensation_scan(d_from_c(8, LN2), 8, [1.0], 100, 1, 0)

    def test_target(self):
        assert cluster_point_target(8, 8 * LN2) == pytest.approx(LN2 / 256 - 8 * LN2 * LN2 / 256, rel=1e-14)

    def test_small_scan_structure(self):
        k = 4
        d = d_from_c(k, LN2)
        rep = condensation_scan(d, k, [2.0, 3.0, 4.0], 400, 2, 1, SMALL_THRESHOLDS)
        assert rep.verdicts["analytic_gap_monotone"]["pass"]
        assert rep.aggregates["regime"] in ("indeterminate_band", "transition_line")
        lines = scan_long_csv(rep).splitlines()
        assert lines[0] == "beta,series,value" and len(lines) == 1 + 3 * 3


class TestPlantedVsNull:
    def test_beta_zero_identical(self):
        rep = planted_vs_null(12, 3, 1.0, 0.0, 5, 0)
        # Z = 2^n under both models; only last-ulp rounding of the log-sum-exp differs
        assert abs(rep.aggregates["difference"]["mean"]) <= 1e-15
        assert all(abs(t["null"] - LN2) <= 4e-16 and abs(t["planted"] - LN2) <= 4e-16 for t in rep.trials)

    def test_small_beta_low_density(self):
        rep = planted_vs_null(14, 3, 1.0, 0.3, 60, 2)
        diff = rep.aggregates["difference"]
        assert abs(diff["mean"]) <= 4 * diff["se"]
        lo, hi = rep.aggregates["support_overlap"]
        assert lo <= hi


@pytest.mark.slow
def test_condensation_scan_k8_sign_change():
    k, n = 8, 100_000
    d = d_from_c(k, LN2)
    grid = [5.5, 6.5, 7.5, 8.5]
    rep = condensation_scan(d, k, grid, n, 1, 11, K8_THRESHOLDS)
    root = beta_crit_root(d, k).beta
    crossing = rep.aggregates["empirical_sign_change"]
    assert crossing is not None
    step = grid[1] - grid[0]
    assert abs(crossing - root) <= step + rep.aggregates["band"]
    assert rep.verdicts["analytic_gap_monotone"]["pass"]


@pytest.mark.slow
def test_condensation_scan_below_line_negative():
    k = 8
    d = d_from_c(k, -0.5)
    rep = condensation_scan(d, k, [5.5, 7.0, 8.5], 50_000, 1, 12, K8_THRESHOLDS)
    assert all(t["measured_gap"] < 0 for t in rep.trials)
    assert all(t["analytic_gap"] < 0 for t in rep.trials)
