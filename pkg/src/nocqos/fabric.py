"""Request-network topology: marker insertion, buffered arbitration nodes
and the tree that carries requests from initiators to the target edge.

Every node (and the edge in front of the target) keeps one FIFO per
``(input port, thread)`` pair. A port is either an attached initiator or a
child node, so threads keep independent buffering end to end.
"""

from __future__ import annotations

from collections import deque
from typing import Dict, Iterable, List, Optional

from . import arbiters as arb
from .arbiters import BranchView, EpochArbiterState, FixedWeightState, TdmaWheel
from .model import QosLevel, Request, ScenarioConfig

EDGE = "edge"


def insert_marker(seq_no: int, epoch_size: int) -> bool:
    """True when request ``seq_no`` opens a new epoch of ``epoch_size`` requests."""
    if epoch_size < 1:
        raise ValueError("epoch size must be ≥ 1")
    return seq_no > 0 and seq_no % epoch_size == 0


def mark_stream(requests: Iterable[Request], epoch_size: int) -> List[Request]:
    out = []
    for req in requests:
        req.epoch_marker = insert_marker(req.seq_no, epoch_size)
        out.append(req)
    return out


# -- per-point arbiter state ----------------------------------------------

class PointArbiter:
    """Holds one arbitration point's scheme state and applies the pure picks."""

    def __init__(self, keys: List[tuple]):
        self.keys = list(keys)

    def pick(self, views: List[BranchView], cycle: int):
        raise NotImplementedError

    def idle(self, cycle: int) -> None:
        """Called on cycles where no pick is attempted."""

    def advance(self, views: List[BranchView]) -> None:
        """End-of-cycle epoch bookkeeping; a no-op outside the epoch scheme."""


class FixedPriorityArbiter(PointArbiter):
    def __init__(self, keys, thread_order):
        super().__init__(keys)
        rank = {t: i for i, t in enumerate(thread_order)}
        self.order = sorted(self.keys, key=lambda k: (rank.get(k[1], len(rank)), self.keys.index(k)))

    def pick(self, views, cycle):
        return arb.fixed_priority_pick(views, self.order)


class RoundRobinArbiter(PointArbiter):
    def __init__(self, keys):
        super().__init__(keys)
        self.last_winner = None

    def pick(self, views, cycle):
        winner, self.last_winner = arb.round_robin_pick(views, self.last_winner)
        return winner


class FixedWeightArbiter(PointArbiter):
    def __init__(self, keys, thread_weights):
        super().__init__(keys)
        self.state = FixedWeightState({k: int(thread_weights[k[1]]) for k in self.keys})

    def pick(self, views, cycle):
        winner, self.state = arb.fixed_weight_pick(views, self.state)
        return winner


class TdmaArbiter(PointArbiter):
    """Strict TDMA over thread-owned slots; the wheel turns every cycle.

    With ``backfill`` an unused slot goes round-robin to any other waiting
    branch (exploration only; the paper scenarios run strict).
    """

    def __init__(self, keys, slots, backfill=False, offset=0):
        super().__init__(keys)
        self.wheel = TdmaWheel(tuple(slots), offset % len(slots))
        self.backfill = backfill
        self._rr_last = None

    def idle(self, cycle):
        self.wheel = TdmaWheel(self.wheel.slots, (self.wheel.index + 1) % len(self.wheel.slots))

    def pick(self, views, cycle):
        owner = self.wheel.owner
        thread_views = [BranchView(owner, any(v.has_pending and v.branch_id[1] == owner for v in views))]
        winner, self.wheel = arb.tdma_pick(thread_views, self.wheel)
        if winner is not None:
            for v in views:
                if v.has_pending and v.branch_id[1] == owner:
                    return v.branch_id
        if self.backfill:
            key, self._rr_last = arb.round_robin_pick(views, self._rr_last)
            return key
        return None


class QosArbiter(PointArbiter):
    """Strict order across effective levels, epoch scheme within a level."""

    def __init__(self, keys):
        super().__init__(keys)
        self.level_states = {lvl: EpochArbiterState.initial(self.keys) for lvl in QosLevel}

    def pick(self, views, cycle):
        winner, self.level_states = arb.leveled_epoch_pick(views, self.level_states)
        return winner

    def advance(self, views):
        self.level_states = arb.leveled_epoch_advance(views, self.level_states)


def make_arbiter(config: ScenarioConfig, keys, hops_to_edge: int = 0) -> PointArbiter:
    scheme = config.arbitration_scheme
    if scheme == "fixed_priority":
        return FixedPriorityArbiter(keys, config.priority_order)
    if scheme == "round_robin":
        return RoundRobinArbiter(keys)
    if scheme == "fixed_weight":
        return FixedWeightArbiter(keys, config.weights)
    if scheme == "tdma":
        offset = hops_to_edge if config.tdma_align else 0
        return TdmaArbiter(keys, config.tdma_wheel, config.tdma_backfill, offset)
    if scheme == "qos":
        return QosArbiter(keys)
    raise ValueError(f"unknown scheme {scheme!r}")


# -- nodes and topology ----------------------------------------------------

class FabricNode:
    """An arbitration point with per-(port, thread) input FIFOs.

    ``parent`` is another FabricNode, or None for the edge node whose single
    output is the target itself.
    """

    def __init__(self, name: str, keys: List[tuple], depth: int, arbiter: PointArbiter):
        self.name = name
        self.keys = list(keys)
        self.depth = depth
        self.queues: Dict[tuple, deque] = {k: deque() for k in self.keys}
        self.arbiter = arbiter
        self.parent: Optional["FabricNode"] = None
        self.forwarded = 0

    def has_space(self, key) -> bool:
        return len(self.queues[key]) < self.depth

    def occupancy(self) -> int:
        return sum(len(q) for q in self.queues.values())

    def is_empty(self) -> bool:
        for q in self.queues.values():
            if q:
                return False
        return True

    def out_key(self, key) -> tuple:
        return (self.name, key[1])

    def views(self, levels, blocked=None) -> List[BranchView]:
        """Head-of-line views; ``blocked`` keys are shown as not pending."""
        out = []
        best_effort = QosLevel.BEST_EFFORT
        queues = self.queues
        for key in self.keys:
            q = queues[key]
            level = levels.get(key[1], best_effort)
            if q and (blocked is None or key not in blocked):
                out.append(BranchView(key, True, q[0].epoch_marker, level))
            else:
                out.append(BranchView(key, False, False, level))
        return out


def node_step(node: FabricNode, cycle: int, levels) -> Optional[Request]:
    """Forward at most one head request into the parent's FIFO.

    Branches whose downstream FIFO is full are withheld from arbitration.
    """
    parent = node.parent
    if node.is_empty():
        node.arbiter.idle(cycle)
        return None
    pq, depth, name = parent.queues, parent.depth, node.name
    full = {k for k, q in node.queues.items() if q and len(pq[(name, k[1])]) >= depth}
    views = node.views(levels, full)
    winner = node.arbiter.pick(views, cycle)
    if winner is None:
        return None
    req = node.queues[winner].popleft()
    parent.queues[node.out_key(winner)].append(req)
    node.forwarded += 1
    return req


class Topology:
    """Tree of FabricNodes built from a scenario; ``order`` lists nodes root first."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        children: Dict[Optional[str], List[str]] = {}
        for n in config.nodes:
            children.setdefault(n.parent, []).append(n.name)
        attached: Dict[str, list] = {}
        for ini in config.initiators:
            attached.setdefault(ini.attach, []).append(ini)

        subtree_threads: Dict[str, list] = {}

        def collect(name: str) -> list:
            threads = [i.thread for i in attached.get(name, [])]
            for child in children.get(name, []):
                threads += collect(child)
            subtree_threads[name] = sorted(set(threads), key=threads.index)
            return subtree_threads[name]

        roots = children.get(None, [])
        for r in roots:
            collect(r)

        self.order: List[str] = []
        frontier = list(roots)
        while frontier:
            self.order.extend(frontier)
            frontier = [c for name in frontier for c in children.get(name, [])]

        parents = {n.name: n.parent for n in config.nodes}
        self.nodes: Dict[str, FabricNode] = {}
        for name in self.order:
            keys = [(i.name, i.thread) for i in attached.get(name, [])]
            for child in children.get(name, []):
                keys += [(child, t) for t in subtree_threads[child]]
            depth = self._depth(name, parents)
            self.nodes[name] = FabricNode(name, keys, config.queue_depth,
                                          make_arbiter(config, keys, depth))
        edge_keys = [(r, t) for r in roots for t in subtree_threads[r]]
        self.edge = FabricNode(EDGE, edge_keys, config.queue_depth, make_arbiter(config, edge_keys))
        for name, node in self.nodes.items():
            p = parents[name]
            node.parent = self.edge if p is None else self.nodes[p]
        self.first_hop = {i.name: self.nodes[i.attach] for i in config.initiators}
        self.hops = {i.name: self._depth(i.attach, parents) for i in config.initiators}

    @staticmethod
    def _depth(name, parents) -> int:
        d = 0
        while name is not None:
            d += 1
            name = parents[name]
        return d

    def points(self) -> List[FabricNode]:
        return [self.nodes[n] for n in self.order] + [self.edge]

    def in_flight(self) -> int:
        return sum(n.occupancy() for n in self.points())


def route_topology_step(topology: Topology, cycle: int, levels) -> List[tuple]:
    """Step interior nodes root first; returns ``(node name, request)`` transfers.

    Root-first order lets space freed at a parent this cycle be used by a
    child in the same cycle, while a forwarded request can only compete at
    the parent from the next cycle on.
    """
    moves = []
    for name in topology.order:
        req = node_step(topology.nodes[name], cycle, levels)
        if req is not None:
            moves.append((name, req))
    return moves
