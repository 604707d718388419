"""Next-event simulation of the contact process on dynamical percolation graphs.

One simulation owns one replica. Edges are resolved lazily: an edge gets a
state only when it first becomes adjacent to the infection (drawn from the
stationary law), and an edge whose clocks went idle is advanced by the exact
two-state transition law on reactivation. Recoveries use the memoryless
property (one pending recovery per infected vertex).

Three families of runners live here:

* ``Simulation`` / ``run_replica`` - the production path (single fast RNG).
* ``KeyedSimulation`` - per-edge / per-vertex seeded streams with replayed
  activation, used to check that adaptive (lazy) activation and activating
  everything at time zero give bit-identical trajectories.
* coupled runners (``run_coupled``, ``run_coupled_lambda``,
  ``run_waitandsee_dominating``) - two processes driven by one realization of
  the shared event streams, with containment asserted after every event.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from heapq import heappop, heappush

from .closedform import bg_transition, lower_bound_rate
from .graph import GraphView, TreeCapExceeded
from .kernels import KernelSpec, p_value, v_value
from .rng import TAG_EDGE_BG, TAG_EDGE_INF, TAG_EDGE_THIN, TAG_SIM, TAG_VERTEX, mix

# event kinds
UPDATE = 0
INFECT = 1
RECOVER = 2
REVEAL = 3

# process variants
CPDG = "cpdg"
WAIT_AND_SEE = "wait_and_see"
PENALISED = "penalised"
LOWER_BOUND = "lower_bound"

# outcomes
EXTINCT = "extinct"
HORIZON = "horizon"
CAP = "cap"
TRUNCATED_TREE = "truncated_tree"
TARGET = "target"  # a designated vertex was infected

_KEY_SHIFT = 21  # vertex ids below 2^21; edge key = (min << SHIFT) | max


@dataclass(frozen=True)
class Caps:
    horizon: float
    max_infected: int = 1 << 30
    max_events: int = 1 << 62


@dataclass(frozen=True)
class TrajectoryRecord:
    outcome: str  # extinct | horizon | cap | truncated_tree
    time: float
    peak_infected: int
    total_events: int
    root_reinfections: tuple
    seed: int

    @property
    def extinct(self) -> bool:
        return self.outcome == EXTINCT


# edge record slots (fast mode)
_OPEN = 0
_TIME = 1
_UP = 2  # update clock scheduled
_INF = 3  # infection clock scheduled
_P = 4
_V = 5
_RATE = 6


class Simulation:
    """One replica of the CPDG (or a static-rate variant) on a graph view."""

    __slots__ = (
        "graph", "kernel", "lam", "variant", "caps", "seed",
        "infected", "edges", "clock", "done", "outcome", "peak",
        "events", "snapshots", "_queue", "_seq", "_rng", "_root",
        "_root_absent", "_reinf", "_allowed", "_thinned", "_has_bg", "_target",
        "event_log",
    )

    def __init__(self, graph: GraphView, kernel: KernelSpec, lam: float,
                 variant: str, init, caps: Caps, seed: int,
                 allowed=None, bg_mode: str = "explicit", target=None,
                 event_log=None):
        if lam < 0:
            raise ValueError("infection rate must be >= 0")
        if bg_mode not in ("explicit", "thinned"):
            raise ValueError(f"unknown bg_mode {bg_mode!r}")
        self.graph = graph
        self.kernel = kernel
        self.lam = lam
        self.variant = variant
        self.caps = caps
        self.seed = seed
        self.infected = set()
        self.edges = {}
        self.clock = 0.0
        self.done = False
        self.outcome = None
        self.peak = 0
        self.events = 0
        self.snapshots = []
        self._queue = []
        self._seq = 0
        self._rng = random.Random(mix(seed, TAG_SIM))
        self._root = graph.root
        self._root_absent = False
        self._reinf = []
        self._allowed = allowed
        self._thinned = bg_mode == "thinned"
        self._has_bg = variant == CPDG
        self._target = target
        self.event_log = event_log  # optional list of "t kind payload" lines
        try:
            for x in sorted(set(init)):
                self._infect(int(x), 0.0)
        except TreeCapExceeded:
            self.done = True
            self.outcome = TRUNCATED_TREE
        if not self.infected and not self.done:
            self.done = True
            self.outcome = EXTINCT

    # -- internals ----------------------------------------------------------

    def _edge_rate(self, p: float, v: float) -> float:
        if self.variant == CPDG:
            return self.lam
        if self.variant == PENALISED:
            return self.lam * p
        if self.variant == LOWER_BOUND:
            return lower_bound_rate(self.lam, v, p) if self.lam > 0 and p > 0 else 0.0
        raise ValueError(f"variant {self.variant!r} not supported by Simulation")

    def _push(self, t: float, kind: int, u: int, v: int):
        self._seq += 1
        heappush(self._queue, (t, self._seq, kind, u, v))

    def _infect(self, y: int, t: float):
        infected = self.infected
        infected.add(y)
        n = len(infected)
        if n > self.peak:
            self.peak = n
        if n > self.caps.max_infected:
            self.done = True
            self.outcome = CAP
            return
        if y == self._root and self._root_absent:
            self._reinf.append(t)
        if y == self._target:
            self.done = True
            self.outcome = TARGET
            return
        rng = self._rng
        self._push(t - math.log(rng.random()), RECOVER, y, -1)
        self._activate_edges(y, t)

    def _activate_edges(self, x: int, t: float):
        graph = self.graph
        kernel = self.kernel
        edges = self.edges
        rng = self._rng
        allowed = self._allowed
        dx = graph.degree(x)
        for y in graph.neighbors(x):
            if allowed is not None and y not in allowed:
                continue
            key = (x << _KEY_SHIFT | y) if x < y else (y << _KEY_SHIFT | x)
            e = edges.get(key)
            if e is None:
                p = p_value(kernel, dx, graph.degree(y))
                v = v_value(kernel, dx, graph.degree(y))
                is_open = (rng.random() < p) if self._has_bg else True
                e = [is_open, t, False, False, p, v, self._edge_rate(p, v)]
                edges[key] = e
            elif self._has_bg and not self._thinned and not e[_UP] and e[_TIME] < t:
                # idle background: advance by the exact two-state transition
                e[_OPEN] = rng.random() < bg_transition(e[_P], e[_V], e[_OPEN], t - e[_TIME])
                e[_TIME] = t
            u, w = (x, y) if x < y else (y, x)
            if self._has_bg and not self._thinned and not e[_UP]:
                e[_UP] = True
                self._push(t - math.log(rng.random()) / e[_V], UPDATE, u, w)
            if e[_RATE] > 0.0 and not e[_INF]:
                e[_INF] = True
                self._push(t - math.log(rng.random()) / e[_RATE], INFECT, u, w)

    # -- public stepping ------------------------------------------------------

    def step(self):
        """Process the earliest event. Returns (t, kind, u, v) or None when done."""
        if self.done:
            return None
        queue = self._queue
        if not queue:
            # no infected vertices and no pending clocks
            self.done = True
            self.outcome = EXTINCT if not self.infected else HORIZON
            return None
        item = heappop(queue)
        t = item[0]
        if t >= self.caps.horizon:
            self.clock = self.caps.horizon
            self.done = True
            self.outcome = HORIZON
            return None
        self.clock = t
        self.events += 1
        if self.events > self.caps.max_events:
            self.done = True
            self.outcome = CAP
            return None
        kind = item[2]
        u = item[3]
        infected = self.infected
        if kind == INFECT:
            v = item[4]
            key = u << _KEY_SHIFT | v
            e = self.edges[key]
            ui = u in infected
            vi = v in infected
            if not (ui or vi):
                e[_INF] = False  # clock dies with the edge idle
                if self.event_log is not None:
                    self.event_log.append(f"{t:.9g} infect {u}-{v} idle")
                return item
            if self._thinned and e[_TIME] < t:
                e[_OPEN] = self._rng.random() < bg_transition(e[_P], e[_V], e[_OPEN], t - e[_TIME])
                e[_TIME] = t
            transmitted = False
            if e[_OPEN] and ui != vi:
                try:
                    self._infect(v if ui else u, t)
                    transmitted = True
                except TreeCapExceeded:
                    self.done = True
                    self.outcome = TRUNCATED_TREE
                    return item
            if not self.done:
                self._push(t - math.log(self._rng.random()) / e[_RATE], INFECT, u, v)
            if self.event_log is not None:
                effect = "transmit" if transmitted else ("closed" if not e[_OPEN] else "idle")
                self.event_log.append(f"{t:.9g} infect {u}-{v} {effect}")
            return item
        if kind == RECOVER:
            infected.remove(u)
            if u == self._root:
                self._root_absent = True
            if not infected:
                self.done = True
                self.outcome = EXTINCT
            if self.event_log is not None:
                self.event_log.append(f"{t:.9g} recover {u}")
            return item
        # UPDATE: redraw the edge state
        v = item[4]
        e = self.edges[u << _KEY_SHIFT | v]
        e[_OPEN] = self._rng.random() < e[_P]
        e[_TIME] = t
        if u in infected or v in infected:
            self._push(t - math.log(self._rng.random()) / e[_V], UPDATE, u, v)
        else:
            e[_UP] = False
        if self.event_log is not None:
            self.event_log.append(f"{t:.9g} update {u}-{v} {'open' if e[_OPEN] else 'closed'}")
        return item

    # -- state observation ----------------------------------------------------

    def resolve_edge_state(self, u: int, v: int, t: float) -> bool:
        """Open/closed state of edge {u, v} at time t (resolving lazily if needed)."""
        if not self._has_bg:
            return True
        key = (u << _KEY_SHIFT | v) if u < v else (v << _KEY_SHIFT | u)
        e = self.edges.get(key)
        rng = self._rng
        if e is None:
            p = p_value(self.kernel, self.graph.degree(u), self.graph.degree(v))
            vv = v_value(self.kernel, self.graph.degree(u), self.graph.degree(v))
            is_open = rng.random() < p
            self.edges[key] = [is_open, t, False, False, p, vv,
                               self._edge_rate(p, vv)]
            return is_open
        if e[_TIME] < t and not (e[_UP] and not self._thinned):
            e[_OPEN] = rng.random() < bg_transition(e[_P], e[_V], e[_OPEN], t - e[_TIME])
            e[_TIME] = t
        return e[_OPEN]

    def take_snapshot(self, t: float):
        """Record (t, infected frozenset, open-edge frozenset) for a finite graph."""
        open_edges = frozenset(
            (u, v) for u, v in self.graph.edges() if self.resolve_edge_state(u, v, t)
        ) if self._has_bg else frozenset()
        self.snapshots.append((t, frozenset(self.infected), open_edges))

    # -- driving ----------------------------------------------------------------

    def run(self, snapshot_times=()) -> TrajectoryRecord:
        snaps = sorted(snapshot_times)
        si = 0
        queue = self._queue
        horizon = self.caps.horizon
        while not self.done:
            t_next = queue[0][0] if queue else horizon
            while si < len(snaps) and snaps[si] <= min(t_next, horizon):
                self.take_snapshot(snaps[si])
                si += 1
            self.step()
        if self.outcome == EXTINCT and si < len(snaps):
            # the background keeps evolving after extinction, and pending
            # update times carry real information (they are known to exceed
            # the extinction time), so drain them instead of resampling
            while si < len(snaps):
                t_next = queue[0][0] if queue else math.inf
                while si < len(snaps) and snaps[si] <= min(t_next, horizon):
                    self.take_snapshot(snaps[si])
                    si += 1
                if si >= len(snaps) or not queue or t_next >= horizon:
                    break
                _, _, kind, u, v = heappop(queue)
                e = self.edges[u << _KEY_SHIFT | v]
                if kind == UPDATE:
                    e[_OPEN] = self._rng.random() < e[_P]
                    e[_TIME] = t_next
                    e[_UP] = False  # nothing infected anymore; suspend
                else:
                    e[_INF] = False
        time = self.clock if self.outcome != HORIZON else horizon
        return TrajectoryRecord(
            outcome=self.outcome, time=time, peak_infected=self.peak,
            total_events=self.events, root_reinfections=tuple(self._reinf),
            seed=self.seed,
        )


def run_replica(graph: GraphView, kernel: KernelSpec, lam: float, variant: str,
                init, caps: Caps, seed: int, allowed=None,
                bg_mode: str = "explicit", snapshot_times=(), target=None) -> TrajectoryRecord:
    """Run one replica to extinction or censoring; deterministic given seed."""
    if variant == WAIT_AND_SEE:
        rec, _ = WaitSeeSimulation(graph, kernel, lam, init, caps, seed).run()
        return rec
    sim = Simulation(graph, kernel, lam, variant, init, caps, seed,
                     allowed=allowed, bg_mode=bg_mode, target=target)
    return sim.run(snapshot_times=snapshot_times)


# ---------------------------------------------------------------------------
# wait-and-see process (standalone)
# ---------------------------------------------------------------------------

class WaitSeeSimulation:
    """The dominating wait-and-see process: tracks revealed edges, not open ones.

    Unrevealed edges touching the infection reveal (and infect) at rate
    lam * p(dx, dy); revealed edges carry a rate-lam infection clock and
    unreveal at rate v(dx, dy); recoveries at rate 1. Starts with no edge
    revealed.
    """

    __slots__ = ("graph", "kernel", "lam", "caps", "seed", "infected",
                 "revealed", "edges", "clock", "done", "outcome", "peak",
                 "events", "extinction_time", "_queue", "_seq", "_rng",
                 "_run_to_horizon")

    # edge record: [revealed, rev_sched, inf_sched, unrev_sched, p, v]

    def __init__(self, graph, kernel, lam, init, caps, seed,
                 run_to_horizon=False):
        self.graph = graph
        self.kernel = kernel
        self.lam = lam
        self.caps = caps
        self.seed = seed
        self.infected = set()
        self.revealed = set()
        self.edges = {}
        self.clock = 0.0
        self.done = False
        self.outcome = None
        self.peak = 0
        self.events = 0
        self.extinction_time = math.inf
        self._queue = []
        self._seq = 0
        self._rng = random.Random(mix(seed, TAG_SIM))
        self._run_to_horizon = run_to_horizon
        for x in sorted(set(init)):
            self._infect(int(x), 0.0)
        if not self.infected:
            self.extinction_time = 0.0
            if not run_to_horizon:
                self.done = True
                self.outcome = EXTINCT

    def _push(self, t, kind, u, v):
        self._seq += 1
        heappush(self._queue, (t, self._seq, kind, u, v))

    def _infect(self, y, t):
        self.infected.add(y)
        if len(self.infected) > self.peak:
            self.peak = len(self.infected)
        if len(self.infected) > self.caps.max_infected:
            self.done = True
            self.outcome = CAP
            return
        rng = self._rng
        self._push(t - math.log(rng.random()), RECOVER, y, -1)
        dx = self.graph.degree(y)
        for z in self.graph.neighbors(y):
            key = (y << _KEY_SHIFT | z) if y < z else (z << _KEY_SHIFT | y)
            e = self.edges.get(key)
            if e is None:
                p = p_value(self.kernel, dx, self.graph.degree(z))
                v = v_value(self.kernel, dx, self.graph.degree(z))
                e = [False, False, False, False, p, v]
                self.edges[key] = e
            if not e[0] and not e[1] and self.lam * e[4] > 0.0:
                e[1] = True
                u, w = (y, z) if y < z else (z, y)
                self._push(t - math.log(rng.random()) / (self.lam * e[4]), REVEAL, u, w)

    def step(self):
        if self.done:
            return None
        queue = self._queue
        if not queue:
            self.done = True
            self.outcome = EXTINCT if not self.infected else HORIZON
            return None
        item = heappop(queue)
        t = item[0]
        if t >= self.caps.horizon:
            self.clock = self.caps.horizon
            self.done = True
            self.outcome = HORIZON if self.infected else EXTINCT
            return None
        self.clock = t
        self.events += 1
        kind, u, v = item[2], item[3], item[4]
        rng = self._rng
        infected = self.infected
        if kind == RECOVER:
            infected.remove(u)
            if not infected and self.extinction_time == math.inf:
                self.extinction_time = t
                if not self._run_to_horizon:
                    self.done = True
                    self.outcome = EXTINCT
            return item
        key = u << _KEY_SHIFT | v
        e = self.edges[key]
        ui = u in infected
        vi = v in infected
        if kind == REVEAL:
            e[1] = False
            if e[0] or not (ui or vi):
                return item
            e[0] = True
            self.revealed.add(key)
            if ui != vi:
                self._infect(v if ui else u, t)
            if not self.done:
                if not e[2]:
                    e[2] = True
                    self._push(t - math.log(rng.random()) / self.lam, INFECT, u, v)
                if not e[3]:
                    e[3] = True
                    self._push(t - math.log(rng.random()) / e[5], UPDATE, u, v)
            return item
        if kind == INFECT:
            if not e[0]:
                e[2] = False
                return item
            if ui != vi:
                self._infect(v if ui else u, t)
            if not self.done:
                self._push(t - math.log(rng.random()) / self.lam, INFECT, u, v)
            return item
        # UPDATE = unreveal
        e[0] = False
        e[3] = False
        self.revealed.discard(key)
        if (ui or vi) and not e[1] and self.lam * e[4] > 0.0:
            e[1] = True
            self._push(t - math.log(rng.random()) / (self.lam * e[4]), REVEAL, u, v)
        return item

    def state(self):
        """(infected frozenset, revealed edge-pair frozenset)."""
        pairs = frozenset((k >> _KEY_SHIFT, k & ((1 << _KEY_SHIFT) - 1)) for k in self.revealed)
        return frozenset(self.infected), pairs

    def run(self, snapshot_times=()):
        snaps = sorted(snapshot_times)
        si = 0
        out = []
        while not self.done:
            t_next = self._queue[0][0] if self._queue else math.inf
            while si < len(snaps) and snaps[si] <= min(t_next, self.caps.horizon):
                out.append((snaps[si],) + self.state())
                si += 1
            self.step()
        while si < len(snaps) and snaps[si] <= self.caps.horizon:
            # queue drained: no infection and no revealed edges remain
            out.append((snaps[si],) + self.state())
            si += 1
        time = self.extinction_time if self.extinction_time < math.inf else self.clock
        rec = TrajectoryRecord(
            outcome=EXTINCT if self.extinction_time < math.inf else (self.outcome or HORIZON),
            time=time, peak_infected=self.peak, total_events=self.events,
            root_reinfections=(), seed=self.seed,
        )
        return rec, out


# ---------------------------------------------------------------------------
# keyed streams: activation-order soundness
# ---------------------------------------------------------------------------

class _EdgeStreams:
    __slots__ = ("open", "p", "v", "bg", "inf", "thin", "next_up", "revealed", "b_used")

    def __init__(self, p, v, bg, inf, thin=None):
        self.p = p
        self.v = v
        self.bg = bg
        self.inf = inf
        self.thin = thin
        self.open = bg.random() < p  # stationary draw at time 0
        self.next_up = -math.log(bg.random()) / v
        self.revealed = False
        self.b_used = False


def _edge_streams(graph, kernel, seed, u, v, with_thin=False):
    p = p_value(kernel, graph.degree(u), graph.degree(v))
    vv = v_value(kernel, graph.degree(u), graph.degree(v))
    bg = random.Random(mix(seed, TAG_EDGE_BG, u, v))
    inf = random.Random(mix(seed, TAG_EDGE_INF, u, v))
    thin = random.Random(mix(seed, TAG_EDGE_THIN, u, v)) if with_thin else None
    return _EdgeStreams(p, vv, bg, inf, thin)


class KeyedSimulation:
    """CPDG with per-edge / per-vertex seeded streams and replayed activation.

    With ``eager=True`` every edge and recovery stream is realized from time
    zero; with ``eager=False`` an edge's streams are fast-forwarded to the
    current time when it first touches the infection. Both modes consume the
    same per-entity streams in the same order, so identical seeds must give
    bit-identical infection trajectories; this is the activation-order
    soundness check behind the default lazy engine.
    """

    def __init__(self, graph: GraphView, kernel: KernelSpec, lam: float,
                 init, horizon: float, seed: int, eager: bool):
        self.graph = graph
        self.kernel = kernel
        self.lam = lam
        self.horizon = horizon
        self.seed = seed
        self.infected = set()
        self.trajectory = []  # (t, "+"|"-", vertex)
        self.clock = 0.0
        self._edges = {}
        self._rec = {}  # vertex -> (stream, next_time)
        self._queue = []
        self._seq = 0
        if eager:
            for u, v in graph.edges():
                self._create_edge(u, v, 0.0)
            for x in range(graph.n_vertices):
                self._create_vertex(x, 0.0)
        for x in sorted(set(init)):
            self._mark_infected(x, 0.0)

    def _push(self, t, kind, u, v):
        self._seq += 1
        heappush(self._queue, (t, self._seq, kind, u, v))

    def _create_edge(self, u, v, t):
        u, v = (u, v) if u < v else (v, u)
        e = _edge_streams(self.graph, self.kernel, self.seed, u, v)
        # replay background updates that happened before t
        while e.next_up <= t:
            e.open = e.bg.random() < e.p
            e.next_up += -math.log(e.bg.random()) / e.v
        self._push(e.next_up, UPDATE, u, v)
        if self.lam > 0.0:
            # replay the infection clock up to t
            s = -math.log(e.inf.random()) / self.lam
            while s <= t:
                s += -math.log(e.inf.random()) / self.lam
            self._push(s, INFECT, u, v)
        self._edges[(u, v)] = e
        return e

    def _create_vertex(self, x, t):
        stream = random.Random(mix(self.seed, TAG_VERTEX, x))
        s = -math.log(stream.random())
        while s <= t:
            s += -math.log(stream.random())
        self._rec[x] = stream
        self._push(s, RECOVER, x, -1)

    def _mark_infected(self, y, t):
        self.infected.add(y)
        self.trajectory.append((t, "+", y))
        if y not in self._rec:
            self._create_vertex(y, t)
        for z in self.graph.neighbors(y):
            key = (y, z) if y < z else (z, y)
            if key not in self._edges:
                self._create_edge(key[0], key[1], t)

    def run(self):
        queue = self._queue
        infected = self.infected
        while queue and infected:
            t, _, kind, u, v = heappop(queue)
            if t >= self.horizon:
                self.clock = self.horizon
                return self
            self.clock = t
            if kind == RECOVER:
                s = t - math.log(self._rec[u].random())
                self._push(s, RECOVER, u, -1)
                if u in infected:
                    infected.remove(u)
                    self.trajectory.append((t, "-", u))
                continue
            e = self._edges[(u, v)]
            if kind == UPDATE:
                e.open = e.bg.random() < e.p
                e.next_up = t - math.log(e.bg.random()) / e.v
                self._push(e.next_up, UPDATE, u, v)
                continue
            # INFECT
            self._push(t - math.log(e.inf.random()) / self.lam, INFECT, u, v)
            if e.open:
                ui, vi = u in infected, v in infected
                if ui != vi:
                    self._mark_infected(v if ui else u, t)
        return self


# ---------------------------------------------------------------------------
# coupled runners (shared graphical representation)
# ---------------------------------------------------------------------------

@dataclass
class _Tracker:
    """Per-process bookkeeping inside a coupled run."""

    infected: set
    root: int
    extinction_time: float = math.inf
    peak: int = 0
    root_absent: bool = False
    reinfections: list = field(default_factory=list)

    def add(self, y, t):
        self.infected.add(y)
        if len(self.infected) > self.peak:
            self.peak = len(self.infected)
        if y == self.root and self.root_absent:
            self.reinfections.append(t)

    def remove(self, x, t):
        if x in self.infected:
            self.infected.remove(x)
            if x == self.root:
                self.root_absent = True
            if not self.infected and self.extinction_time == math.inf:
                self.extinction_time = t

    def record(self, outcome, clock, events, seed):
        if self.extinction_time < math.inf:
            return TrajectoryRecord(EXTINCT, self.extinction_time, self.peak,
                                    events, tuple(self.reinfections), seed)
        return TrajectoryRecord(outcome, clock, self.peak, events,
                                tuple(self.reinfections), seed)


def _eager_setup(graph, kernel, seed, lam_clock, with_thin):
    """Realize all streams of a small finite graph from time zero."""
    queue = []
    seq = 0
    edges = {}
    for u, v in graph.edges():
        e = _edge_streams(graph, kernel, seed, u, v, with_thin=with_thin)
        edges[(u, v)] = e
        seq += 1
        heappush(queue, (e.next_up, seq, UPDATE, u, v))
        if lam_clock > 0.0:
            seq += 1
            heappush(queue, (-math.log(e.inf.random()) / lam_clock, seq, INFECT, u, v))
    recs = {}
    for x in range(graph.n_vertices):
        stream = random.Random(mix(seed, TAG_VERTEX, x))
        recs[x] = stream
        seq += 1
        heappush(queue, (-math.log(stream.random()), seq, RECOVER, x, -1))
    return queue, seq, edges, recs


def run_coupled(graph: GraphView, kernel: KernelSpec, lam: float,
                init_small, init_big, caps: Caps, seed: int):
    """Two CPDGs on one realized graphical representation, nested initial sets.

    Returns (record_small, record_big, violation) where violation reports any
    failure of the pathwise containment C_small(t) <= C_big(t).
    """
    small_set, big_set = set(init_small), set(init_big)
    if not small_set <= big_set:
        raise ValueError("init_small must be a subset of init_big")
    return _run_coupled_pair(graph, kernel, lam, lam, small_set, big_set,
                             caps, seed, thin_ratio=None)


def run_coupled_lambda(graph: GraphView, kernel: KernelSpec, lam_small: float,
                       lam_big: float, init, caps: Caps, seed: int):
    """Two CPDGs sharing one event stream, the smaller rate thinned from the bigger."""
    if not 0.0 <= lam_small <= lam_big:
        raise ValueError("need 0 <= lam_small <= lam_big")
    init = set(init)
    return _run_coupled_pair(graph, kernel, lam_small, lam_big, set(init),
                             set(init), caps, seed, thin_ratio=lam_small / lam_big)


def _run_coupled_pair(graph, kernel, lam_small, lam_big, small_init, big_init,
                      caps, seed, thin_ratio):
    queue, seq, edges, recs = _eager_setup(graph, kernel, seed, lam_big,
                                           with_thin=thin_ratio is not None)
    small = _Tracker(infected=set(), root=graph.root)
    big = _Tracker(infected=set(), root=graph.root)
    for x in sorted(big_init):
        big.add(x, 0.0)
        if x in small_init:
            small.add(x, 0.0)
    violation = False
    events = 0
    clock = 0.0
    cs, cb = small.infected, big.infected
    while queue and cb and not violation:
        t, _, kind, u, v = heappop(queue)
        if t >= caps.horizon:
            clock = caps.horizon
            break
        clock = t
        events += 1
        if events > caps.max_events:
            break
        if kind == RECOVER:
            seq += 1
            heappush(queue, (t - math.log(recs[u].random()), seq, RECOVER, u, -1))
            small.remove(u, t)
            big.remove(u, t)
        elif kind == UPDATE:
            e = edges[(u, v)]
            e.open = e.bg.random() < e.p
            seq += 1
            heappush(queue, (t - math.log(e.bg.random()) / e.v, seq, UPDATE, u, v))
        else:
            e = edges[(u, v)]
            seq += 1
            heappush(queue, (t - math.log(e.inf.random()) / lam_big, seq, INFECT, u, v))
            if e.open:
                small_uses = thin_ratio is None or e.thin.random() < thin_ratio
                ui, vi = u in cb, v in cb
                if ui != vi:
                    big.add(v if ui else u, t)
                if small_uses:
                    ui, vi = u in cs, v in cs
                    if ui != vi:
                        small.add(v if ui else u, t)
        if not cs <= cb:
            violation = True
    outcome = HORIZON if clock >= caps.horizon else (CAP if events > caps.max_events else EXTINCT)
    return (small.record(outcome, clock, events, seed),
            big.record(outcome, clock, events, seed),
            violation)


def run_waitandsee_dominating(graph: GraphView, kernel: KernelSpec, lam: float,
                              init, caps: Caps, seed: int):
    """Couple a CPDG with the wait-and-see process on shared streams.

    The wait-and-see side starts with every edge unrevealed and the same
    infected set; reveal decisions reuse the open/closed state the first time
    after each update and an independent thinning stream afterwards. Returns
    (record_cpdg, record_ws, violation) with violation reporting any failure
    of C(t) <= C_ws(t).
    """
    queue, seq, edges, recs = _eager_setup(graph, kernel, seed, lam, with_thin=True)
    cp = _Tracker(infected=set(), root=graph.root)
    ws = _Tracker(infected=set(), root=graph.root)
    for x in sorted(set(init)):
        cp.add(x, 0.0)
        ws.add(x, 0.0)
    violation = False
    events = 0
    clock = 0.0
    c, cx = cp.infected, ws.infected
    while queue and cx and not violation:
        t, _, kind, u, v = heappop(queue)
        if t >= caps.horizon:
            clock = caps.horizon
            break
        clock = t
        events += 1
        if events > caps.max_events:
            break
        if kind == RECOVER:
            seq += 1
            heappush(queue, (t - math.log(recs[u].random()), seq, RECOVER, u, -1))
            cp.remove(u, t)
            ws.remove(u, t)
        elif kind == UPDATE:
            e = edges[(u, v)]
            e.open = e.bg.random() < e.p
            e.revealed = False
            e.b_used = False
            seq += 1
            heappush(queue, (t - math.log(e.bg.random()) / e.v, seq, UPDATE, u, v))
        else:
            e = edges[(u, v)]
            seq += 1
            heappush(queue, (t - math.log(e.inf.random()) / lam, seq, INFECT, u, v))
            # CPDG: transmission needs an open edge
            ui, vi = u in c, v in c
            newly_c = (v if ui else u) if (e.open and ui != vi) else None
            # wait-and-see: revealed edges carry the full rate; unrevealed
            # edges reveal at the thinned rate, reading the open state once
            # per background era and independent coins afterwards
            newly_x = None
            uxi, vxi = u in cx, v in cx
            if e.revealed:
                if uxi != vxi:
                    newly_x = v if uxi else u
            elif uxi or vxi:
                if not e.b_used:
                    decide = e.open
                    e.b_used = True
                else:
                    decide = e.thin.random() < e.p
                if decide:
                    e.revealed = True
                    if uxi != vxi:
                        newly_x = v if uxi else u
            if newly_x is not None:
                ws.add(newly_x, t)
            if newly_c is not None:
                cp.add(newly_c, t)
        if not c <= cx:
            violation = True
    outcome = HORIZON if clock >= caps.horizon else (CAP if events > caps.max_events else EXTINCT)
    return (cp.record(outcome, clock, events, seed),
            ws.record(outcome, clock, events, seed),
            violation)
