import math

import numpy as np
import pytest
from scipy import stats

from cpdg import engine, experiments
from cpdg.experiments import (BGWGraphSpec, ExperimentError, FiniteGraphSpec,
                              bracket_lambda, estimate_survival,
                              path_graph_with_degree, path_transmission,
                              penalised_comparison, stable_star_frequency,
                              star_survival, wilson_interval)
from cpdg.graph import TreeCaps, deterministic, geometric
from cpdg.kernels import KernelSpec

K2_SPEC = FiniteGraphSpec(edges=((0, 1),))
STAR_SPEC = FiniteGraphSpec(edges=((0, 1), (0, 2), (0, 3)))


class TestWilson:
    def test_basic_properties(self):
        lo, hi = wilson_interval(50, 100)
        assert 0.4 < lo < 0.5 < hi < 0.6
        assert wilson_interval(0, 10)[0] == pytest.approx(0.0, abs=1e-12)
        assert wilson_interval(10, 10)[1] == pytest.approx(1.0, abs=1e-12)

    def test_rejects_empty(self):
        with pytest.raises(ExperimentError):
            wilson_interval(0, 0)


class TestEstimateSurvival:
    def test_zero_rate_never_survives(self):
        est, _ = estimate_survival(K2_SPEC, KernelSpec(alpha=0.5), 0.0,
                                   horizon=50.0, replicas=300, seed=1)
        assert est.alive_at_horizon == 0
        assert est.extinct == 300

    def test_counts_partition_replicas(self):
        est, _ = estimate_survival(STAR_SPEC, KernelSpec(alpha=0.3), 1.0,
                                   horizon=5.0, replicas=500, seed=2)
        assert est.extinct + est.alive_at_horizon + est.censored == 500

    def test_closed_edges_leave_pure_death(self):
        # p = 0: survival at the horizon is the chance the root never recovers
        spec = KernelSpec(alpha=0.0, custom_p=lambda a, b: 0.0)
        horizon = 3.0
        est, _ = estimate_survival(K2_SPEC, spec, 2.0, horizon=horizon,
                                   replicas=20_000, seed=3)
        expect = math.exp(-horizon)
        se = math.sqrt(expect * (1 - expect) / est.replicas)
        assert abs(est.p_alive - expect) < 3 * se

    def test_deterministic_reruns(self):
        a, _ = estimate_survival(STAR_SPEC, KernelSpec(alpha=0.3), 1.2,
                                 horizon=8.0, replicas=400, seed=9)
        b, _ = estimate_survival(STAR_SPEC, KernelSpec(alpha=0.3), 1.2,
                                 horizon=8.0, replicas=400, seed=9)
        assert a == b

    def test_bgw_spec_draws_fresh_trees(self):
        spec = BGWGraphSpec(dist=geometric(0.4, k0=1), caps=TreeCaps(2000, 50))
        est, recs = estimate_survival(spec, KernelSpec(alpha=0.6, sigma=1.0), 0.8,
                                      horizon=4.0, replicas=300, seed=4,
                                      collect_records=True)
        assert len(recs) == 300
        assert est.extinct + est.alive_at_horizon + est.censored == 300

    def test_threads_do_not_change_results(self):
        est1, recs1 = estimate_survival(STAR_SPEC, KernelSpec(alpha=0.3), 1.0,
                                        horizon=5.0, replicas=400, seed=21,
                                        collect_records=True, threads=1)
        est2, recs2 = estimate_survival(STAR_SPEC, KernelSpec(alpha=0.3), 1.0,
                                        horizon=5.0, replicas=400, seed=21,
                                        collect_records=True, threads=2)
        assert est1 == est2
        assert recs1 == recs2

    def test_parallel_rejects_unpicklable_kernel(self):
        spec = KernelSpec(alpha=0.0, custom_p=lambda a, b: 0.5)
        with pytest.raises(ExperimentError, match="picklable"):
            estimate_survival(K2_SPEC, spec, 1.0, 2.0, 50, seed=1, threads=2)

    def test_monotone_in_lambda(self):
        # survival proportion non-decreasing along a rate grid, within 3 SE
        values = []
        for j, lam in enumerate((0.3, 0.8, 1.5, 2.5, 4.0)):
            est, _ = estimate_survival(STAR_SPEC, KernelSpec(alpha=0.3), lam,
                                       horizon=10.0, replicas=4000, seed=11)
            values.append(est)
        for a, b in zip(values, values[1:]):
            slack = 3 * math.sqrt(a.se_alive ** 2 + b.se_alive ** 2)
            assert a.p_alive <= b.p_alive + slack


class TestBracket:
    def test_bisection_arithmetic(self):
        res = bracket_lambda(STAR_SPEC, KernelSpec(alpha=0.2), horizon=12.0,
                             replicas=600, target=0.3, lam_lo=0.0, lam_hi=4.0,
                             iterations=5, seed=5)
        assert res.lam_hi - res.lam_lo == pytest.approx(4.0 * 2 ** -5)
        assert res.estimate_lo.p_alive <= 0.3 + 0.1
        assert res.estimate_hi.p_alive >= 0.3 - 0.1

    def test_degenerate_range_rejected(self):
        with pytest.raises(ExperimentError, match="degenerate"):
            bracket_lambda(STAR_SPEC, KernelSpec(alpha=0.2), 10.0, 100, 0.5,
                           0.0, 0.0, 3, seed=6)

    def test_non_bracketing_diagnosed(self):
        with pytest.raises(ExperimentError, match="does not bracket"):
            bracket_lambda(K2_SPEC, KernelSpec(alpha=0.5), horizon=40.0,
                           replicas=200, target=0.99, lam_lo=0.0, lam_hi=0.01,
                           iterations=2, seed=7)

    def test_regular_tree_smoke(self):
        # classical contact process (p = 1) on a small 3-regular tree: a
        # pseudo-critical bracket comes back ordered; no numeric assertion
        edges = [(0, 1), (0, 2), (0, 3)]
        nxt = 4
        for v in (1, 2, 3):
            edges += [(v, nxt), (v, nxt + 1)]
            nxt += 2
        spec = FiniteGraphSpec(edges=tuple(edges))
        res = bracket_lambda(spec, KernelSpec(alpha=0.0), horizon=15.0,
                             replicas=400, target=0.5, lam_lo=0.05, lam_hi=8.0,
                             iterations=4, seed=8)
        assert 0.05 <= res.lam_lo < res.lam_hi <= 8.0


class TestStars:
    kernel = KernelSpec(alpha=0.2, sigma=0.0, kappa=1.0, eta=0.0, nu=1.0)

    def test_stability_frequency_beats_bound(self):
        rep = stable_star_frequency(500, 4, self.kernel, deterministic(2),
                                    replicas=400, seed=8)
        se = math.sqrt(max(rep.frequency * (1 - rep.frequency), 1e-9) / rep.replicas)
        assert rep.frequency >= rep.bound - 3 * se

    def test_survival_records_consistent(self):
        rep = star_survival([30, 60], 4, 0.4, self.kernel, deterministic(2),
                            replicas=80, seed=9, max_windows=2048)
        for rec in rep.records:
            for rr in rec.replicas:
                # stable flag recomputable from the stored trace + constants
                assert rr.stable == (min(rr.good_trace) > rec.constants.threshold)
        assert len(rep.mann_whitney_p) == 1

    def test_zero_rate_median_is_order_one(self):
        rep = star_survival([100], 4, 1e-9, self.kernel, deterministic(2),
                            replicas=60, seed=10, max_windows=512)
        # no infections: extinction once the root recovers
        assert rep.medians[0] < 5.0

    def test_local_survival_guard(self):
        with pytest.raises(ExperimentError):
            star_survival([100], 4, 3.0, self.kernel, deterministic(2),
                          replicas=10, seed=11)


class TestPath:
    def test_graph_has_prescribed_degrees(self):
        g = path_graph_with_degree(4, 3)
        for v in range(5):
            assert g.degree(v) == 3

    def test_single_edge_rate_sanity(self):
        spec = KernelSpec(alpha=0.0, custom_p=lambda a, b: 0.4)
        rep = path_transmission([1], 3, 0.5, spec, replicas=20_000, seed=12)
        pt = rep.points[0]
        # bounded below by the closed-start bound, and the bound holds
        assert pt.bound <= pt.wilson[1]
        assert pt.p_hat > pt.bound

    def test_decay_roughly_geometric(self):
        spec = KernelSpec(alpha=0.0, custom_p=lambda a, b: 0.4)
        rep = path_transmission([1, 2, 3], 3, 0.7, spec, replicas=8000, seed=13)
        ps = [pt.p_hat for pt in rep.points]
        assert ps[0] > ps[1] > ps[2] > 0


class TestPenalisedComparison:
    def test_orderings_and_gap(self):
        spec = FiniteGraphSpec(edges=((0, 1), (1, 2), (2, 3)))
        rep = penalised_comparison(spec, KernelSpec(alpha=0.4, sigma=1.0), 1.5,
                                   nu_values=[1.0, 10.0, 100.0], horizon=8.0,
                                   replicas=3000, seed=14)
        assert all(pt.ordering_ok for pt in rep.points)
        # the fast-update gap at the largest nu is small
        assert rep.points[-1].gap_to_penalised < 0.08

    def test_p_one_matches_classical(self):
        spec = KernelSpec(alpha=0.0)
        caps = engine.Caps(horizon=300.0)
        a = [engine.run_replica(spec_g, spec, 0.9, engine.CPDG, {0}, caps, seed=s).time
             for spec_g in [STAR_SPEC.build(0)[0]] for s in range(8000)]
        b = [engine.run_replica(spec_g, spec, 0.9, engine.PENALISED, {0}, caps, seed=s + 10**6).time
             for spec_g in [STAR_SPEC.build(0)[0]] for s in range(8000)]
        assert stats.ks_2samp(a, b).pvalue > 0.001
