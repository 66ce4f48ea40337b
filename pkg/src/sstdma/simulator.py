"""Synchronous frame/slot/period engine over an interference graph."""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence, TextIO

from .protocol import (
    FrameConfig,
    NodeState,
    RelativeState,
    on_carrier_sense,
    on_timeslot_start,
    ready_state,
    relative_state,
    start_competition,
)
from .topology import InterferenceGraph

ALLOCATED = RelativeState.ALLOCATED

TRACE_HEADER = "round,slot,period,node,event"


def node_rng(master_seed: int, uid: int) -> random.Random:
    """Per-node stream keyed on (master seed, node uid)."""
    return random.Random(f"sstdma/{master_seed}/{uid}")


@dataclass
class World:
    graph: InterferenceGraph
    cfg: FrameConfig
    states: list[NodeState]
    round_index: int = 0
    master_seed: int = 0
    next_uid: int = 0

    def __post_init__(self):
        if len(self.states) != self.graph.node_count:
            raise ValueError(f"{len(self.states)} states for {self.graph.node_count} nodes")
        self.next_uid = max(self.next_uid, len(self.states))

    def neighbors(self, i: int) -> list[NodeState]:
        return [self.states[j] for j in self.graph.adjacency[i]]

    def relative_states(self) -> list[RelativeState]:
        return [relative_state(s, self.neighbors(i)) for i, s in enumerate(self.states)]

    @property
    def slots(self) -> list[int | None]:
        return [s.slot for s in self.states]


@dataclass
class RoundTrace:
    round_index: int
    periods: dict[int, dict[int, int]] = field(default_factory=dict)
    beacons: dict[int, dict[int, list[int]]] = field(default_factory=dict)
    data: dict[int, list[int]] = field(default_factory=dict)
    competitors: set[int] = field(default_factory=set)
    losers: set[int] = field(default_factory=set)
    deliveries: int = 0
    receiver_collisions: int = 0
    data_conflicts: int = 0
    m_samples: dict[int, int] = field(default_factory=dict)
    relative_before: list[RelativeState] = field(default_factory=list)
    relative_after: list[RelativeState] = field(default_factory=list)
    busy: set[int] = field(default_factory=set)


@dataclass
class RunResult:
    allocation_round: list[int | None]
    t_max: int | None
    converged: bool
    rounds: int
    traces: list[RoundTrace] | None = None

    def to_dict(self) -> dict:
        alloc = [a for a in self.allocation_round if a is not None]
        return {
            "converged": self.converged,
            "t_max": self.t_max,
            "rounds": self.rounds,
            "mean_allocation_round": sum(alloc) / len(alloc) if alloc else None,
            "allocation_round": self.allocation_round,
        }


# -- world construction ----------------------------------------------------------


def make_world(graph: InterferenceGraph, cfg: FrameConfig, seed: int = 0, init: str = "ready") -> World:
    """Build a world; ``init`` is ``ready``, ``random`` (arbitrary corruption) or ``safe``."""
    states = [ready_state(cfg, node_rng(seed, i)) for i in range(graph.node_count)]
    world = World(graph, cfg, states, master_seed=seed)
    setup = random.Random(f"sstdma-init/{seed}")
    if init == "ready":
        pass
    elif init == "random":
        for s in states:
            corrupt_state(s, cfg, setup)
    elif init == "safe":
        assign_safe_slots(world, setup)
    else:
        raise ValueError(f"unknown init mode {init!r}")
    return world


def corrupt_state(state: NodeState, cfg: FrameConfig, rng: random.Random) -> None:
    """Overwrite the protocol variables with arbitrary in-range values."""
    choice = rng.randrange(cfg.T + 1)
    state.slot = None if choice == cfg.T else choice
    state.unused = [rng.random() < 0.5 for _ in range(cfg.T)]
    state.signal = rng.random() < 0.5
    state.backoff_count = rng.randint(0, cfg.backoff[1]) if cfg.backoff else 0
    state.priority_class = rng.randrange(cfg.priority_classes)
    state.busy = rng.random() < 0.5


def assign_safe_slots(world: World, rng: random.Random) -> None:
    """Greedy slot assignment in random node order, with consistent unused views.

    Nodes whose neighbors already take every slot keep ``None``, which is
    the exhaustion case of a safe configuration.
    """
    g, T = world.graph, world.cfg.T
    order = list(range(g.node_count))
    rng.shuffle(order)
    for i in order:
        st = world.states[i]
        taken = {world.states[j].slot for j in g.adjacency[i]}
        free = [t for t in range(T) if t not in taken]
        st.slot = rng.choice(free) if free else None
    sync_unused(world)


def sync_unused(world: World) -> None:
    """Set every node's unused view to the true neighborhood occupancy."""
    T = world.cfg.T
    for i, st in enumerate(world.states):
        taken = {world.states[j].slot for j in world.graph.adjacency[i]}
        st.unused = [t not in taken for t in range(T)]
        st.signal = False


# -- safety ----------------------------------------------------------------------------


def node_safe(world: World, i: int) -> bool:
    s = world.states[i].slot
    nbr_slots = {world.states[j].slot for j in world.graph.adjacency[i]}
    if s is not None:
        return 0 <= s < world.cfg.T and s not in nbr_slots
    return all(t in nbr_slots for t in range(world.cfg.T))


def is_safe(world: World) -> bool:
    return all(node_safe(world, i) for i in range(world.graph.node_count))


def _settled(world: World, rel: Sequence[RelativeState]) -> list[bool]:
    # exhausted nodes (no slot, every slot held by a neighbor) count as settled
    return [r is ALLOCATED or (world.states[i].slot is None and node_safe(world, i)) for i, r in enumerate(rel)]


# -- one broadcasting round --------------------------------------------------------


def run_round(world: World, trace_out: TextIO | None = None) -> tuple[World, RoundTrace]:
    """Execute one full frame (slots 0..T-1) in place."""
    cfg, states, adj = world.cfg, world.states, world.graph.adjacency
    r = world.round_index
    trace = RoundTrace(round_index=r, relative_before=world.relative_states())
    emit: Callable[[int, object, int, str], None] | None = None
    if trace_out is not None:
        def emit(t, k, node, event):
            trace_out.write(f"{r},{t},{'' if k is None else k},{node},{event}\n")

    for t in range(cfg.T):
        competitors = [i for i, st in enumerate(states) if on_timeslot_start(st, t, cfg)]
        if t == 0:
            trace.busy = {i for i, st in enumerate(states) if st.busy}
            for i, st in enumerate(states):
                if st.slot is not None:
                    trace.m_samples[i] = sum(1 for j in adj[i] if states[j].slot == st.slot)
        if not competitors:
            continue
        trace.competitors.update(competitors)
        period = {i: start_competition(states[i], cfg) for i in competitors}
        trace.periods[t] = period
        active = set(competitors)
        beaconed: set[int] = set()
        slot_beacons: dict[int, list[int]] = {}
        for k in range(1, cfg.n + 1):
            tx = [i for i in competitors if i in active and period[i] == k]
            if not tx:
                continue
            slot_beacons[k] = tx
            beaconed.update(tx)
            active.difference_update(tx)
            sensers: set[int] = set()
            for i in tx:
                sensers |= adj[i]
                if emit:
                    emit(t, k, i, "beacon")
            for j in sorted(sensers) if emit else sensers:
                contending = j in active
                on_carrier_sense(states[j], t, j in beaconed)
                if emit:
                    emit(t, k, j, "sense")
                if contending:
                    active.discard(j)
                    trace.losers.add(j)
                    if emit:
                        emit(t, k, j, "lose")
        trace.beacons[t] = slot_beacons
        # every beaconing node heard no strictly earlier beacon, so all send DATA
        data_tx = sorted(beaconed)
        trace.data[t] = data_tx
        heard: dict[int, int] = {}
        for i in data_tx:
            if emit:
                emit(t, None, i, "data")
            if adj[i] & beaconed:
                trace.data_conflicts += 1
            for j in adj[i]:
                heard[j] = heard.get(j, 0) + 1
            states[i].signal = False
        for j in sorted(heard) if emit else heard:
            if j in beaconed:
                continue
            if heard[j] == 1:
                trace.deliveries += 1
                if emit:
                    emit(t, None, j, "deliver")
            else:
                trace.receiver_collisions += 1
                if emit:
                    emit(t, None, j, "collide")

    world.round_index += 1
    trace.relative_after = world.relative_states()
    return world, trace


def measure_round_metrics(trace: RoundTrace, world_before: World | None = None) -> dict:
    """Winners W, failed competitors L and matching-neighbor samples of one round."""
    before = world_before.relative_states() if world_before is not None else trace.relative_before
    after = trace.relative_after
    W = sum(1 for b, a in zip(before, after) if b is not ALLOCATED and a is ALLOCATED)
    L = sum(1 for i in trace.competitors if after[i] is not ALLOCATED)
    return {"W": W, "L": L, "m": dict(trace.m_samples)}


# -- runs ------------------------------------------------------------------------------------


def run_until_safe(
    world: World,
    max_rounds: int,
    keep_traces: bool = False,
    trace_out: TextIO | None = None,
    on_round: Callable[[World, RoundTrace], None] | None = None,
) -> RunResult:
    """Run rounds until the world is safe and every node has settled.

    A node's allocation round is the number of rounds after which it is
    Allocated (or exhausted) for good within this run.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    N = world.graph.node_count
    last_unsettled = [-1] * N
    traces: list[RoundTrace] | None = [] if keep_traces else None

    def done(rel, elapsed):
        ok = _settled(world, rel)
        for i, s in enumerate(ok):
            if not s:
                last_unsettled[i] = elapsed
        return all(ok) and is_safe(world)

    converged = done(world.relative_states(), 0)
    elapsed = 0
    while not converged and elapsed < max_rounds:
        _, trace = run_round(world, trace_out)
        elapsed += 1
        if traces is not None:
            traces.append(trace)
        if on_round is not None:
            on_round(world, trace)
        converged = done(trace.relative_after, elapsed)

    if converged:
        alloc: list[int | None] = [u + 1 for u in last_unsettled]
        t_max = max(alloc)
    else:
        alloc = [None if u == elapsed else u + 1 for u in last_unsettled]
        t_max = None
    return RunResult(allocation_round=alloc, t_max=t_max, converged=converged, rounds=elapsed, traces=traces)


# -- faults ----------------------------------------------------------------------------------


class FaultKind(enum.Enum):
    STATE_CORRUPTION = "state_corruption"
    EDGE_CHANGE = "edge_change"
    NODE_CHURN = "node_churn"


def inject_fault(
    world: World,
    kind: FaultKind | str,
    rng: random.Random,
    *,
    fraction: float | None = None,
    nodes: Iterable[int] | None = None,
    add_edges: Iterable[tuple[int, int]] = (),
    remove_edges: Iterable[tuple[int, int]] = (),
    random_edge_changes: int = 0,
    add_nodes: int = 0,
    attach: int = 3,
    remove_nodes: Iterable[int] = (),
) -> World:
    """Apply a transient fault at a round boundary (in place).

    StateCorruption overwrites ``nodes`` (or a random ``fraction``; all nodes
    by default).  EdgeChange applies explicit additions/removals plus
    ``random_edge_changes`` random toggles.  NodeChurn removes the given
    nodes, then adds ``add_nodes`` corrupted nodes each linked to up to
    ``attach`` random existing nodes.
    """
    kind = FaultKind(kind)
    cfg = world.cfg
    N = world.graph.node_count
    if kind is FaultKind.STATE_CORRUPTION:
        if nodes is not None:
            targets = sorted(set(nodes))
        elif fraction is not None:
            targets = sorted(rng.sample(range(N), round(fraction * N)))
        else:
            targets = list(range(N))
        for i in targets:
            if not 0 <= i < N:
                raise ValueError(f"node {i} out of range")
            corrupt_state(world.states[i], cfg, rng)
    elif kind is FaultKind.EDGE_CHANGE:
        edges = set(world.graph.edges())
        for i, j in add_edges:
            edges.add((min(i, j), max(i, j)))
        for i, j in remove_edges:
            edges.discard((min(i, j), max(i, j)))
        for _ in range(random_edge_changes):
            if N < 2:
                break
            i, j = sorted(rng.sample(range(N), 2))
            edges.symmetric_difference_update({(i, j)})
        world.graph = InterferenceGraph.from_edges(N, sorted(edges))
    elif kind is FaultKind.NODE_CHURN:
        gone = set(remove_nodes)
        keep = [i for i in range(N) if i not in gone]
        if not keep and add_nodes == 0:
            raise ValueError("churn would leave an empty graph")
        remap = {old: new for new, old in enumerate(keep)}
        edges = [(remap[i], remap[j]) for i, j in world.graph.edges() if i in remap and j in remap]
        states = [world.states[i] for i in keep]
        for _ in range(add_nodes):
            st = ready_state(cfg, node_rng(world.master_seed, world.next_uid))
            world.next_uid += 1
            corrupt_state(st, cfg, rng)
            new = len(states)
            if new:
                for j in rng.sample(range(new), min(attach, new)):
                    edges.append((j, new))
            states.append(st)
        if not states:
            raise ValueError("churn would leave an empty graph")
        world.graph = InterferenceGraph.from_edges(len(states), edges)
        world.states = states
    return world
