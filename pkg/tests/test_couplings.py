import pytest

from cpdg import engine
from cpdg.engine import Caps, run_coupled, run_coupled_lambda, run_waitandsee_dominating
from cpdg.graph import build_finite
from cpdg.kernels import KernelSpec
from cpdg.rng import replica_seed

from _oracles import random_connected_graph

SPEC = KernelSpec(alpha=0.4, sigma=1.0, nu=1.0)
CAPS = Caps(horizon=60.0, max_events=200_000)


class TestInitialConditionMonotonicity:
    def test_equal_inits_identical(self):
        g = build_finite([(0, 1), (0, 2), (0, 3)])
        for seed in range(50):
            small, big, violation = run_coupled(g, SPEC, 1.0, {0}, {0}, CAPS, seed)
            assert not violation
            assert small == big

    def test_full_star_dominates_root(self):
        g = build_finite([(0, 1), (0, 2), (0, 3)])
        for seed in range(200):
            small, big, violation = run_coupled(g, SPEC, 1.2, {0}, {0, 1, 2, 3}, CAPS, seed)
            assert not violation
            if big.extinct and small.extinct:
                assert small.time <= big.time + 1e-12

    def test_subset_rejected(self):
        g = build_finite([(0, 1)])
        with pytest.raises(ValueError):
            run_coupled(g, SPEC, 1.0, {0, 1}, {0}, CAPS, 1)

    def test_random_sweep(self):
        for gseed in range(5):
            g = random_connected_graph(6, seed=gseed)
            for seed in range(100):
                small, big, violation = run_coupled(
                    g, SPEC, 1.0, {0}, {0, g.n_vertices - 1}, CAPS, replica_seed(gseed, seed))
                assert not violation


class TestLambdaMonotonicity:
    def test_thinned_small_rate_contained(self):
        for gseed in range(4):
            g = random_connected_graph(5, seed=gseed + 50)
            for seed in range(150):
                small, big, violation = run_coupled_lambda(
                    g, SPEC, 0.6, 1.5, {0}, CAPS, replica_seed(gseed + 10, seed))
                assert not violation
                if big.extinct and small.extinct:
                    assert small.time <= big.time + 1e-12

    def test_rate_order_enforced(self):
        g = build_finite([(0, 1)])
        with pytest.raises(ValueError):
            run_coupled_lambda(g, SPEC, 2.0, 1.0, {0}, CAPS, 1)


class TestWaitAndSeeDomination:
    def test_lambda_zero_equal_sets(self):
        g = build_finite([(0, 1), (1, 2)])
        for seed in range(50):
            cpdg, ws, violation = run_waitandsee_dominating(g, SPEC, 0.0, {0}, CAPS, seed)
            assert not violation
            assert cpdg.time == ws.time  # only the shared recovery moves either

    def test_ws_extinction_implies_cpdg_extinct(self):
        g = build_finite([(0, 1), (0, 2), (1, 3)])
        for seed in range(300):
            cpdg, ws, violation = run_waitandsee_dominating(g, SPEC, 0.9, {0}, CAPS, seed)
            assert not violation
            if ws.extinct:
                assert cpdg.extinct
                assert cpdg.time <= ws.time + 1e-12

    def test_random_sweep(self):
        for gseed in range(5):
            g = random_connected_graph(5, seed=gseed + 99)
            for seed in range(100):
                _, _, violation = run_waitandsee_dominating(
                    g, SPEC, 1.1, {0}, CAPS, replica_seed(gseed + 30, seed))
                assert not violation
