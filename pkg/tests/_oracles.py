"""Independent oracles used by the tests.

These deliberately avoid the closed forms they are checking: the edge race is
simulated as the raw jump process (open/close/infect/recover clocks), and the
geometric sum is assembled from its defining pieces.
"""

import numpy as np

from cpdg.graph import build_finite
from cpdg.rng import mix


def simulate_edge_race(lam, v, p, n, gen):
    """Raw race on one initially-closed edge.

    Returns (success, t_inf): whether the first true transmission beats the
    sender's recovery, and the transmission time (inf where it never fires
    before recovery is irrelevant; t_inf is the raw transmission time).
    """
    t_rec = gen.exponential(1.0, n)
    t_inf = np.zeros(n)
    active = np.arange(n)
    close_rate = (1.0 - p) * v
    while active.size:
        # closed: wait for the next opening
        t_inf[active] += gen.exponential(1.0 / (p * v), active.size)
        # open: race between closing and an infection attempt
        t_inf[active] += gen.exponential(1.0 / (close_rate + lam), active.size)
        fired = gen.random(active.size) < lam / (lam + close_rate)
        active = active[~fired]
    return t_inf < t_rec, t_inf


def simulate_geometric_sum(alpha, beta, q, n, gen):
    """Geom(q) many Exp(alpha)+Exp(beta) pairs, summed."""
    counts = gen.geometric(q, n)
    return gen.gamma(counts, 1.0 / alpha) + gen.gamma(counts, 1.0 / beta)


def random_connected_graph(n_vertices, seed, extra_edge_prob=0.4):
    """Random labelled tree on n_vertices, possibly with one extra edge."""
    rng = np.random.default_rng(mix(seed, 0x67726166))
    edges = []
    for v in range(1, n_vertices):
        edges.append((int(rng.integers(0, v)), v))
    if n_vertices >= 3 and rng.random() < extra_edge_prob:
        present = {tuple(sorted(e)) for e in edges}
        for _ in range(10):
            u, w = rng.integers(0, n_vertices, 2)
            key = (min(int(u), int(w)), max(int(u), int(w)))
            if key[0] != key[1] and key not in present:
                edges.append(key)
                break
    return build_finite(edges)
