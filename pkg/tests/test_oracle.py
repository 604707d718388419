import math

import numpy as np
import pytest

from cpdg import engine, oracle
from cpdg.engine import CPDG, Caps, Simulation
from cpdg.graph import build_finite, grow_bgw, deterministic, TreeCaps
from cpdg.kernels import KernelSpec
from cpdg.rng import replica_seed

K2 = build_finite([(0, 1)])
STAR3 = build_finite([(0, 1), (0, 2), (0, 3)])
SPEC = KernelSpec(alpha=0.5, sigma=1.0, kappa=1.0, eta=0.0, nu=1.0)


class TestBuildExact:
    def test_k2_state_count(self):
        model = oracle.build_exact(K2, SPEC, 1.0)
        assert model.n_states == 8

    def test_generator_rows_sum_to_zero(self):
        for edges in ([(0, 1)], [(0, 1), (1, 2)], [(0, 1), (0, 2), (1, 2)]):
            model = oracle.build_exact(build_finite(edges), SPEC, 1.3)
            rows = np.asarray(model.generator.sum(axis=1)).ravel()
            assert np.abs(rows).max() < 1e-12

    def test_extinct_class_closed(self):
        model = oracle.build_exact(STAR3, SPEC, 1.0)
        q = model.generator.tocoo()
        c_bits, _ = model.split_bits(np.arange(model.n_states))
        for i, j, val in zip(q.row, q.col, q.data):
            if c_bits[i] == 0 and val > 0:
                assert c_bits[j] == 0  # no infections out of the empty class

    def test_state_cap(self):
        with pytest.raises(oracle.StateCapExceeded):
            oracle.build_exact(K2, SPEC, 1.0, state_cap=4)

    def test_lazy_rejected(self):
        g = grow_bgw(deterministic(2), seed=1, caps=TreeCaps(100, 10))
        with pytest.raises(oracle.StateCapExceeded):
            oracle.build_exact(g, SPEC, 1.0)


class TestTransient:
    def test_time_zero_is_init(self):
        model = oracle.build_exact(K2, SPEC, 1.0)
        init = oracle.initial_distribution(model, [0])
        assert oracle.transient_prob(model, init, 0.0, lambda c, b: (c & 1) == 1) == 1.0

    def test_pure_death_matches_exponential(self):
        model = oracle.build_exact(K2, SPEC, 0.0)
        init = oracle.initial_distribution(model, [0])
        for t in (0.3, 1.0, 2.5):
            p = oracle.transient_prob(model, init, t, lambda c, b: c != 0)
            assert abs(p - math.exp(-t)) < 1e-9

    def test_stationary_background_marginal(self):
        model = oracle.build_exact(STAR3, SPEC, 1.0)
        init = oracle.initial_distribution(model, [0])
        for t in (0.0, 0.7, 2.0):
            for j in range(3):
                p = oracle.transient_prob(model, init, t,
                                          lambda c, b, j=j: (b >> j & 1) == 1)
                assert p == pytest.approx(model.p_open[j], abs=1e-9)

    def test_monotone_in_lambda(self):
        init_template = None
        probs = []
        for lam in (0.2, 0.6, 1.0, 1.8, 3.0):
            model = oracle.build_exact(STAR3, SPEC, lam)
            init = oracle.initial_distribution(model, [0])
            probs.append(oracle.transient_prob(model, init, 1.0, lambda c, b: c != 0))
        assert all(a < b for a, b in zip(probs, probs[1:]))

    def test_cross_oracle_k2_alive(self):
        model = oracle.build_exact(K2, SPEC, 1.0)
        init = oracle.initial_distribution(model, [0])
        exact = oracle.transient_prob(model, init, 1.0, lambda c, b: c != 0)
        n = 50_000
        alive = 0
        for i in range(n):
            sim = Simulation(K2, SPEC, 1.0, CPDG, {0}, Caps(horizon=1.5),
                             seed=replica_seed(11, i))
            sim.run(snapshot_times=[1.0])
            alive += len(sim.snapshots[0][1]) > 0
        se = math.sqrt(exact * (1 - exact) / n)
        assert abs(alive / n - exact) < 3 * se


class TestExtinctionStats:
    def test_single_infected_vertex_mean_one(self):
        model = oracle.build_exact(K2, SPEC, 0.0)
        init = oracle.initial_distribution(model, [0])
        st = oracle.extinction_stats(model, init)
        assert st.p_extinct == pytest.approx(1.0, abs=1e-10)
        assert st.mean_time == pytest.approx(1.0, abs=1e-10)

    def test_always_extinct(self):
        for lam in (0.5, 2.0):
            model = oracle.build_exact(STAR3, SPEC, lam)
            init = oracle.initial_distribution(model, [0])
            st = oracle.extinction_stats(model, init)
            assert st.p_extinct == pytest.approx(1.0, abs=1e-9)

    def test_mean_time_against_monte_carlo(self):
        model = oracle.build_exact(K2, KernelSpec(alpha=0.0), 1.0)
        init = oracle.initial_distribution(model, [0])
        st = oracle.extinction_stats(model, init)
        n = 50_000
        times = np.empty(n)
        for i in range(n):
            rec = engine.run_replica(K2, KernelSpec(alpha=0.0), 1.0, CPDG, {0},
                                     Caps(horizon=500.0), seed=replica_seed(12, i))
            times[i] = rec.time
        se = times.std() / math.sqrt(n)
        assert abs(times.mean() - st.mean_time) < 3 * se
