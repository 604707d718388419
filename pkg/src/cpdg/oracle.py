"""Exact continuous-time Markov chain computations on tiny instances.

States are (C, B) pairs encoded as index = c_bits | (b_bits << n_vertices),
with vertex i at bit i of c_bits and edge j (in sorted edge order) at bit j
of b_bits. Transient laws come from uniformization with an adaptive Poisson
truncation; absorption statistics from sparse linear solves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import breadth_first_order
from scipy.sparse.linalg import spsolve

from .graph import GraphView
from .kernels import KernelSpec, p_value, v_value

STATE_CAP = 1 << 20


class StateCapExceeded(ValueError):
    """The enumerated (C, B) state space would be too large."""


@dataclass(frozen=True, eq=False)
class ExactModel:
    n_vertices: int
    edges: tuple  # sorted (u, v) pairs
    p_open: np.ndarray
    lam: float
    generator: sparse.csr_matrix
    uniformization_rate: float

    @property
    def n_states(self) -> int:
        return 1 << (self.n_vertices + len(self.edges))

    def encode(self, infected, open_edges) -> int:
        c = 0
        for x in infected:
            c |= 1 << x
        b = 0
        for j, e in enumerate(self.edges):
            if e in open_edges or (e[1], e[0]) in open_edges:
                b |= 1 << j
        return c | (b << self.n_vertices)

    def split_bits(self, idx):
        """(c_bits, b_bits) arrays for an array of state indices."""
        idx = np.asarray(idx)
        mask = (1 << self.n_vertices) - 1
        return idx & mask, idx >> self.n_vertices


def build_exact(graph: GraphView, kernel: KernelSpec, lam: float,
                state_cap: int = STATE_CAP) -> ExactModel:
    """Assemble the sparse generator of the joint (infection, background) chain."""
    if graph.lazy:
        raise StateCapExceeded("exact models need a fully materialized finite graph")
    n = graph.n_vertices
    edges = tuple(graph.edges())
    m = len(edges)
    n_states = 1 << (n + m)
    if n_states > state_cap:
        raise StateCapExceeded(f"2^({n}+{m}) = {n_states} states exceeds the cap {state_cap}")
    p_open = np.array([p_value(kernel, graph.degree(u), graph.degree(v)) for u, v in edges])
    v_rate = np.array([v_value(kernel, graph.degree(u), graph.degree(v)) for u, v in edges])

    rows, cols, vals = [], [], []

    def add(i, j, r):
        if r > 0.0:
            rows.append(i)
            cols.append(j)
            vals.append(r)

    for s in range(n_states):
        c = s & ((1 << n) - 1)
        b = s >> n
        for j in range(m):
            bit = 1 << j
            if b & bit:
                add(s, s ^ (bit << n), v_rate[j] * (1.0 - p_open[j]))  # close
            else:
                add(s, s ^ (bit << n), v_rate[j] * p_open[j])  # open
        for j, (u, v) in enumerate(edges):
            if b >> j & 1:
                ui = c >> u & 1
                vi = c >> v & 1
                if ui != vi:
                    target = v if ui else u
                    add(s, s | (1 << target), lam)
        ci = c
        while ci:
            low = ci & -ci
            add(s, s ^ low, 1.0)  # recovery
            ci ^= low
    q = sparse.coo_matrix((vals, (rows, cols)), shape=(n_states, n_states)).tocsr()
    diag = np.asarray(q.sum(axis=1)).ravel()
    q = q - sparse.diags(diag)
    return ExactModel(n_vertices=n, edges=edges, p_open=p_open, lam=lam,
                      generator=q.tocsr(), uniformization_rate=float(diag.max()))


def initial_distribution(model: ExactModel, infected) -> np.ndarray:
    """Point mass on C0 times the stationary product law of the background."""
    c = 0
    for x in infected:
        c |= 1 << int(x)
    probs = np.ones(1)
    for p in model.p_open:
        probs = np.concatenate([probs * (1.0 - p), probs * p])
    out = np.zeros(model.n_states)
    out[c | (np.arange(probs.size) << model.n_vertices)] = probs
    return out


def transient_distribution(model: ExactModel, init: np.ndarray, t: float,
                           tol: float = 1e-12) -> np.ndarray:
    """State distribution at time t by uniformization (L1 error below tol)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    rate = model.uniformization_rate
    if t == 0.0 or rate == 0.0:
        return init.copy()
    p_mat = sparse.eye(model.n_states, format="csr") + model.generator.multiply(1.0 / rate)
    mu = rate * t
    vec = init.copy()
    acc = np.zeros_like(init)
    log_w = -mu  # log of Poisson(mu) weight at k = 0
    covered = 0.0
    k = 0
    while covered < 1.0 - tol:
        w = math.exp(log_w)
        acc += w * vec
        covered += w
        k += 1
        log_w += math.log(mu) - math.log(k)
        vec = vec @ p_mat
        if k > 100 + 10 * mu + 20 * math.sqrt(mu):
            break
    return acc


def transient_prob(model: ExactModel, init: np.ndarray, t: float, predicate,
                   tol: float = 1e-12) -> float:
    """P(predicate holds at time t); predicate maps (c_bits, b_bits) arrays to bools."""
    dist = transient_distribution(model, init, t, tol=tol)
    c_bits, b_bits = model.split_bits(np.arange(model.n_states))
    mask = np.asarray(predicate(c_bits, b_bits), dtype=bool)
    return float(dist[mask].sum())


@dataclass(frozen=True)
class ExtinctionStats:
    p_extinct: float
    mean_time: float
    n_transient_reachable: int


def extinction_stats(model: ExactModel, init: np.ndarray) -> ExtinctionStats:
    """Absorption analysis: extinction is certain; mean hitting time of C = empty.

    States with C = empty are lumped (the background keeps moving but cannot
    re-infect). Unreachable transient states are pruned before the solve.
    """
    n_states = model.n_states
    c_bits, _ = model.split_bits(np.arange(n_states))
    transient = c_bits != 0

    support = np.nonzero(init > 0)[0]
    reach = np.zeros(n_states, dtype=bool)
    for s in support:
        order = breadth_first_order(model.generator, int(s), directed=True,
                                    return_predecessors=False)
        reach[order] = True
    keep = np.nonzero(transient & reach)[0]
    if keep.size == 0:
        return ExtinctionStats(p_extinct=1.0, mean_time=0.0, n_transient_reachable=0)
    q_tt = model.generator[np.ix_(keep, keep)].tocsc()
    ones = np.ones(keep.size)
    mean_vec = spsolve(-q_tt, ones)
    # absorption probabilities: rates into the C = empty class
    rate_out = -np.asarray(q_tt.sum(axis=1)).ravel()
    absorb = spsolve(-q_tt, rate_out)
    p_ext = float(np.dot(init[keep], absorb) + init[~transient].sum())
    mean_time = float(np.dot(init[keep], mean_vec))
    return ExtinctionStats(p_extinct=p_ext, mean_time=mean_time,
                           n_transient_reachable=int(keep.size))


def tv_distance(empirical_counts: dict, exact: np.ndarray, n_samples: int) -> float:
    """Total-variation distance between a sample histogram and an exact law."""
    emp = np.zeros_like(exact)
    for idx, cnt in empirical_counts.items():
        emp[idx] = cnt / n_samples
    return 0.5 * float(np.abs(emp - exact).sum())
