"""Pure arbitration decisions.

Every ``*_pick`` takes the branches presenting a head-of-line request this
cycle plus explicit scheme state, and returns the winner together with the
successor state. Nothing here mutates its inputs.
"""

from __future__ import annotations

from typing import Hashable, Iterable, Mapping, NamedTuple, Optional, Sequence

from .model import ConfigurationError, QosLevel

BranchId = Hashable


class BranchView(NamedTuple):
    branch_id: BranchId
    has_pending: bool
    head_marked: bool = False
    head_effective_level: QosLevel = QosLevel.BEST_EFFORT


class TdmaWheel(NamedTuple):
    slots: tuple
    index: int = 0

    @property
    def owner(self):
        return self.slots[self.index]


class FixedWeightState(NamedTuple):
    weights: Mapping
    grants_remaining: int = 0
    current_holder: Optional[BranchId] = None


class EpochArbiterState(NamedTuple):
    current_epoch: int
    closed: frozenset
    lrs_order: tuple
    # branches whose waiting marked head was let into the current epoch
    admitted: frozenset = frozenset()

    @classmethod
    def initial(cls, branch_ids: Iterable[BranchId]) -> "EpochArbiterState":
        return cls(0, frozenset(), tuple(sorted(branch_ids)), frozenset())


def fixed_priority_pick(branches: Sequence[BranchView], order: Sequence[BranchId]) -> Optional[BranchId]:
    rank = {b: i for i, b in enumerate(order)}
    best, best_rank = None, None
    for view in branches:
        r = rank.get(view.branch_id)
        if r is None:
            raise ConfigurationError(f"branch {view.branch_id!r} missing from priority order")
        if view.has_pending and (best_rank is None or r < best_rank):
            best, best_rank = view.branch_id, r
    return best


def round_robin_pick(branches: Sequence[BranchView], last_winner: Optional[BranchId]):
    """Cyclic order is the order of ``branches``; ``last_winner`` gets lowest priority."""
    n = len(branches)
    start = 0
    if last_winner is not None:
        for i, view in enumerate(branches):
            if view.branch_id == last_winner:
                start = i + 1
                break
    for k in range(n):
        view = branches[(start + k) % n]
        if view.has_pending:
            return view.branch_id, view.branch_id
    return None, last_winner


def tdma_pick(branches: Sequence[BranchView], wheel: TdmaWheel):
    """Strict TDMA: only the current slot's owner may win; the wheel always turns."""
    owner = wheel.slots[wheel.index]
    winner = None
    for view in branches:
        if view.branch_id == owner and view.has_pending:
            winner = owner
            break
    return winner, TdmaWheel(wheel.slots, (wheel.index + 1) % len(wheel.slots))


def fixed_weight_pick(branches: Sequence[BranchView], state: FixedWeightState):
    holder = state.current_holder
    if holder is not None and state.grants_remaining > 0:
        for view in branches:
            if view.branch_id == holder and view.has_pending:
                return holder, FixedWeightState(state.weights, state.grants_remaining - 1, holder)
    winner, _ = round_robin_pick(branches, holder)
    if winner is None:
        return None, state
    return winner, FixedWeightState(state.weights, int(state.weights[winner]) - 1, winner)


def _blocked(branches: Sequence[BranchView], admitted: frozenset) -> set:
    return {b.branch_id for b in branches
            if b.has_pending and b.head_marked and b.branch_id not in admitted}


def _should_advance(branches: Sequence[BranchView], admitted: frozenset) -> bool:
    # Every branch waits on a next-epoch marker or has nothing to send, and
    # at least one marker is actually waiting.
    blocked = False
    for b in branches:
        if not b.has_pending:
            continue
        if b.head_marked and b.branch_id not in admitted:
            blocked = True
        else:
            return False
    return blocked


def epoch_advance(branches: Sequence[BranchView], state: EpochArbiterState) -> EpochArbiterState:
    if not _should_advance(branches, state.admitted):
        return state
    return EpochArbiterState(
        state.current_epoch + 1,
        frozenset(),
        state.lrs_order,
        state.admitted | _blocked(branches, state.admitted),
    )


def epoch_pick(branches: Sequence[BranchView], state: EpochArbiterState):
    """Least-recently-served pick among branches still inside the current epoch.

    A head carrying a marker for the next epoch is held back until the epoch
    advances. When every contender is held back the advance happens on the
    spot, so a lone branch never waits on its own marker.
    """
    if _should_advance(branches, state.admitted):
        state = epoch_advance(branches, state)
    views = {b.branch_id: b for b in branches if b.has_pending}
    if not views:
        return None, state
    admitted = state.admitted
    blocked = _blocked(branches, admitted)
    winner = None
    for bid in state.lrs_order:
        if bid in views and bid not in blocked:
            winner = bid
            break
    closed = state.closed | blocked if blocked else state.closed
    if winner is None:
        return None, EpochArbiterState(state.current_epoch, closed, state.lrs_order, admitted)
    if views[winner].head_marked:
        admitted = admitted - {winner}
    lrs = tuple(b for b in state.lrs_order if b != winner) + (winner,)
    return winner, EpochArbiterState(state.current_epoch, closed, lrs, admitted)


def _at_level(branches: Sequence[BranchView], level: QosLevel) -> list:
    return [b if not b.has_pending or b.head_effective_level == level
            else BranchView(b.branch_id, False, b.head_marked, b.head_effective_level)
            for b in branches]


def leveled_epoch_pick(branches: Sequence[BranchView], states: Mapping[QosLevel, EpochArbiterState]):
    """Strict priority across effective levels, epoch + LRS within a level.

    ``states`` holds one epoch arbiter per level; each sees the full branch
    set but only branches currently at its level count as pending.
    """
    levels = sorted({b.head_effective_level for b in branches if b.has_pending}, reverse=True)
    for level in levels:
        winner, new_state = epoch_pick(_at_level(branches, level), states[level])
        if new_state is not states[level]:
            states = {**states, level: new_state}
        if winner is not None:
            return winner, states
    return None, states


def leveled_epoch_advance(branches: Sequence[BranchView], states: Mapping[QosLevel, EpochArbiterState]):
    # a level with nothing pending cannot advance
    levels = {b.head_effective_level for b in branches if b.has_pending}
    if not levels:
        return states
    out = dict(states)
    for level in levels:
        out[level] = epoch_advance(_at_level(branches, level), states[level])
    return out
