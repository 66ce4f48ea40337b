"""Per-node MAC state machine.

Each node holds a broadcasting slot (``None`` stands for the busy/unset
value), a view of which timeslots look unused, and a signal flag that is
raised only while it competes inside its own slot.  Transitions mutate the
``NodeState`` in place; the simulator owns ordering between nodes.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from typing import Sequence


@dataclass(frozen=True)
class FrameConfig:
    """TDMA frame layout.

    ``priority_partition`` holds inclusive 1-based period ranges, one per
    priority class, highest priority first.  ``backoff`` is the optional
    ``(CW_start, CW_end)`` window for back-off slot selection.
    """

    T: int
    n: int = 2
    priority_partition: tuple[tuple[int, int], ...] | None = None
    backoff: tuple[int, int] | None = None

    def __post_init__(self):
        if self.T < 2:
            raise ValueError(f"frame size T must be >= 2, got {self.T}")
        if self.n < 2:
            raise ValueError(f"number of signaling periods n must be >= 2, got {self.n}")
        if self.priority_partition is None:
            object.__setattr__(self, "priority_partition", ((1, self.n),))
        part = tuple(tuple(r) for r in self.priority_partition)
        object.__setattr__(self, "priority_partition", part)
        expected = 1
        for lo, hi in part:
            if lo > hi:
                raise ValueError(f"empty priority range [{lo}, {hi}]")
            if lo != expected:
                raise ValueError(f"priority ranges must be contiguous and disjoint, got {part}")
            expected = hi + 1
        if expected != self.n + 1:
            raise ValueError(f"priority ranges must cover 1..{self.n}, got {part}")
        if self.backoff is not None:
            cw_start, cw_end = self.backoff
            if not 1 <= cw_start <= cw_end:
                raise ValueError(f"back-off window needs 1 <= CW_start <= CW_end, got {self.backoff}")

    @property
    def priority_classes(self) -> int:
        return len(self.priority_partition)


@dataclass(eq=False)
class NodeState:
    slot: int | None
    unused: list[bool]
    signal: bool = False
    backoff_count: int = 0
    priority_class: int = 0
    rng: random.Random = field(default_factory=random.Random, repr=False)
    busy: bool = False

    @property
    def unused_set(self) -> list[int]:
        return [t for t, free in enumerate(self.unused) if free]

    def snapshot(self) -> tuple:
        """Protocol variables only (no RNG), for comparisons in tests and traces."""
        return (self.slot, tuple(self.unused), self.signal, self.backoff_count, self.priority_class)


def ready_state(cfg: FrameConfig, rng: random.Random | None = None, priority_class: int = 0) -> NodeState:
    """A node with no slot and every timeslot marked unused."""
    return NodeState(
        slot=None,
        unused=[True] * cfg.T,
        priority_class=priority_class,
        rng=rng if rng is not None else random.Random(),
    )


class RelativeState(enum.Enum):
    READY = "Ready"
    OBTAINING = "Obtaining"
    ALLOCATED = "Allocated"
    UNSTABLE = "Unstable"


def select_unused_uniform(unused_set: Sequence[int], rng: random.Random) -> int | None:
    if not unused_set:
        return None
    return unused_set[rng.randrange(len(unused_set))]


def select_unused_backoff(
    state: NodeState, unused_set: Sequence[int], cw: tuple[int, int], rng: random.Random
) -> int | None:
    """Back-off selection: count down over unused slots before picking one.

    A fresh counter is drawn from ``[CW_start, CW_end]`` whenever it is zero.
    If it does not exceed the number of unused slots the counter is cleared
    and a uniform unused slot is returned; otherwise the unused-slot count is
    deducted and ``None`` is returned.
    """
    if state.backoff_count == 0:
        state.backoff_count = rng.randint(cw[0], cw[1])
    if state.backoff_count <= len(unused_set):
        state.backoff_count = 0
        return select_unused_uniform(unused_set, rng)
    state.backoff_count -= len(unused_set)
    return None


def on_timeslot_start(state: NodeState, t: int, cfg: FrameConfig) -> bool:
    """Timeslot event; returns True iff the node competes in slot ``t``.

    At ``t == 0`` a slotless node picks from the unused slots observed over
    the previous frame, before slot 0's stale mark is cleared.  Then ``t`` is
    marked unused and the signal flag dropped; the caller raises it again
    through ``start_competition``.
    """
    if not 0 <= t < cfg.T:
        raise ValueError(f"timeslot {t} outside [0, {cfg.T - 1}]")
    if t == 0:
        if state.slot is None:
            candidates = state.unused_set
            if cfg.backoff is not None:
                state.slot = select_unused_backoff(state, candidates, cfg.backoff, state.rng)
            else:
                state.slot = select_unused_uniform(candidates, state.rng)
            state.busy = not candidates
        else:
            state.busy = False
    state.unused[t] = True
    state.signal = False
    return state.slot == t


def start_competition(state: NodeState, cfg: FrameConfig) -> int:
    """Raise the signal flag and draw the period in which to beacon."""
    state.signal = True
    return choose_signal_period(state.priority_class, cfg, state.rng)


def choose_signal_period(priority_class: int, cfg: FrameConfig, rng: random.Random) -> int:
    if not 0 <= priority_class < cfg.priority_classes:
        raise ValueError(f"priority class {priority_class} invalid for {cfg.priority_classes} classes")
    lo, hi = cfg.priority_partition[priority_class]
    return rng.randint(lo, hi)


def on_carrier_sense(state: NodeState, t: int, has_already_signaled: bool) -> NodeState:
    """React to a beacon sensed in slot ``t``.

    The slot is marked used and competition stops.  A node contending for
    ``t`` that has not yet sent its own beacon gives the slot up; one that
    beaconed in the same period keeps it.
    """
    state.unused[t] = False
    state.signal = False
    if state.slot == t and not has_already_signaled:
        state.slot = None
    return state


def _neighbor_consistent(node: NodeState, neighbors: Sequence[NodeState]) -> bool:
    used = {nb.slot for nb in neighbors}
    for t, free in enumerate(node.unused):
        if t == node.slot:
            continue
        if free == (t in used):
            return False
    return True


def relative_state(node: NodeState, neighbors: Sequence[NodeState]) -> RelativeState:
    """Classify a node against its neighborhood at a frame boundary."""
    if node.signal:
        return RelativeState.UNSTABLE
    if node.slot is not None and not 0 <= node.slot < len(node.unused):
        return RelativeState.UNSTABLE
    if not _neighbor_consistent(node, neighbors):
        return RelativeState.UNSTABLE
    if node.slot is None:
        if any(node.unused):
            return RelativeState.READY
        return RelativeState.UNSTABLE
    s = node.slot
    for nb in neighbors:
        if nb.slot == s or nb.unused[s]:
            return RelativeState.OBTAINING
    return RelativeState.ALLOCATED


def priority_dominance(a_class: int, b_class: int, cfg: FrameConfig) -> bool:
    """True iff every period of class ``a`` precedes every period of class ``b``."""
    for c in (a_class, b_class):
        if not 0 <= c < cfg.priority_classes:
            raise ValueError(f"priority class {c} invalid for {cfg.priority_classes} classes")
    return cfg.priority_partition[a_class][1] < cfg.priority_partition[b_class][0]
