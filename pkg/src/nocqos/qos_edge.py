"""Bandwidth enforcement at the network edge.

Each priority or bandwidth thread owns a saturating credit counter that
earns its allocation every cycle and pays one credit per target beat
serviced. A negative count demotes the thread to best effort; the edge
publishes effective levels back into the fabric over a delayed sideband.
"""

from __future__ import annotations

from collections import deque
from typing import Mapping, NamedTuple, Optional, Sequence

from .arbiters import BranchView, EpochArbiterState, leveled_epoch_pick
from .model import QosLevel, ThreadConfig

FRAC_BITS = 32
ONE = 1 << FRAC_BITS


def to_fixed(value: float) -> int:
    return int(round(value * ONE))


def from_fixed(value: int) -> float:
    return value / ONE


class CreditCounter(NamedTuple):
    """Credits in target beats, held as fixed point with FRAC_BITS fraction bits."""

    count: int
    allocation_per_cycle: int
    pos_limit: int
    neg_limit: int

    @classmethod
    def create(cls, allocation_per_cycle: float, pos_limit: float, neg_limit: float,
               count: float = 0.0) -> "CreditCounter":
        return cls(to_fixed(count), to_fixed(allocation_per_cycle),
                   to_fixed(pos_limit), to_fixed(neg_limit))

    @property
    def credits(self) -> float:
        return self.count / ONE


def credit_tick(counter: CreditCounter) -> CreditCounter:
    count, alloc, pos, neg = counter
    count += alloc
    if count > pos:
        count = pos
    return CreditCounter(count, alloc, pos, neg)


def credit_debit(counter: CreditCounter, beats_serviced: int) -> CreditCounter:
    if beats_serviced < 1:
        raise ValueError("a serviced request covers at least one beat")
    count, alloc, pos, neg = counter
    count -= beats_serviced * ONE
    if count < neg:
        count = neg
    return CreditCounter(count, alloc, pos, neg)


def effective_level(thread: ThreadConfig, counter: Optional[CreditCounter]) -> QosLevel:
    if thread.level == QosLevel.BEST_EFFORT or counter is None:
        return QosLevel.BEST_EFFORT
    return thread.level if counter.count >= 0 else QosLevel.BEST_EFFORT


class EdgeState(NamedTuple):
    counters: Mapping        # thread_id -> CreditCounter
    level_states: Mapping    # QosLevel -> EpochArbiterState over edge branches

    @classmethod
    def initial(cls, counters: Mapping, branch_ids) -> "EdgeState":
        ids = list(branch_ids)
        return cls(dict(counters),
                   {lvl: EpochArbiterState.initial(ids) for lvl in QosLevel})


def edge_pick(branches: Sequence[BranchView], state: EdgeState):
    """Pick among head requests at the highest non-empty effective level.

    ``branches`` must already carry each head's effective level (see
    ``effective_level``); ties within a level go through the epoch scheme.
    """
    winner, level_states = leveled_epoch_pick(branches, state.level_states)
    return winner, EdgeState(state.counters, level_states)


class Sideband:
    """Shift register carrying effective thread levels to interior nodes."""

    def __init__(self, delay: int, initial: Mapping):
        if delay < 0:
            raise ValueError("sideband delay must be ≥ 0")
        self.delay = delay
        self._slots = deque([dict(initial)] * (delay + 1), maxlen=delay + 1)

    def publish(self, levels: Mapping) -> None:
        self._slots.append(dict(levels))

    def observe(self) -> Mapping:
        """Levels as seen inside the fabric, ``delay`` publications old."""
        return self._slots[0]


def publish_sideband(sideband: Sideband, levels: Mapping) -> Mapping:
    sideband.publish(levels)
    return sideband.observe()
