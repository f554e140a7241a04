"""Deterministic cycle loop.

Phase order within one cycle is fixed and part of the simulator contract:

1. deliver read responses that are due
2. generators emit, markers are inserted, sources inject into the fabric
3. every credit counter earns its allocation
4. the edge grants one request if the target is idle, then debits credits
5. interior nodes forward, root first
6. epoch bookkeeping at every arbitration point
7. metrics sampling

Latencies count cycles inclusively: a read issued at cycle i whose last beat
moves at cycle j has latency j - i + 1, and the target part of it (grant g)
is j - g + 1 = target latency + occupancy.
"""

from __future__ import annotations

import logging
from collections import deque
from typing import Dict, List, Optional

from .fabric import Topology, insert_marker, route_topology_step
from .metrics import (CpuReport, InitiatorReport, MetricsReport, ThreadReport, latency_stats,
                      mips, service_deficit_jitter, window_bandwidth)
from .model import (CpuTraffic, QosLevel, Request, ScenarioConfig, StreamTraffic, require_valid)
from .qos_edge import CreditCounter, Sideband, credit_debit, credit_tick, effective_level
from .target import TargetModel
from .traffic import CpuGenerator, GreedyGenerator, make_generator

log = logging.getLogger(__name__)


class SimRun:
    def __init__(self, config: ScenarioConfig, record_trace: bool = False):
        require_valid(config)
        self.config = config
        self.cycle = 0
        self.topology = Topology(config)
        tg = config.target
        self.target = TargetModel(tg.beat_bytes, tg.latency_cycles)
        self.word_bytes = config.word_bytes
        self.record_trace = record_trace
        self.trace: List[tuple] = []

        self.generators = {}
        for ini in config.initiators:
            if ini.enabled:
                gen = make_generator(ini, config.rng_seed, config.word_bytes, tg.clock_mhz)
                if isinstance(gen, CpuGenerator):
                    gen.record = record_trace
                self.generators[ini.name] = gen
        self.thread_of = {i.name: i.thread for i in config.initiators}
        self.epoch_size = {i.name: config.thread(i.thread).epoch_size for i in config.initiators}
        self.sources: Dict[str, deque] = {i.name: deque() for i in config.initiators}
        self.seq = {i.name: 0 for i in config.initiators}

        self.thread_cfg = {t.thread_id: t for t in config.threads}
        self.counters: Dict[str, CreditCounter] = {}
        for t in config.threads:
            if t.level != QosLevel.BEST_EFFORT:
                pos, neg = config.credit_limits(t.thread_id)
                self.counters[t.thread_id] = CreditCounter.create(t.allocation_fraction, pos, neg)
        self.levels = self._levels()
        self.sideband = Sideband(config.sideband_delay, self.levels)
        self.uses_levels = config.arbitration_scheme == "qos"

        self.responses: Dict[int, list] = {}
        self.generated = 0
        self.serviced = 0
        self._init_metrics()

    # -- bookkeeping -----------------------------------------------------

    def _levels(self) -> Dict[str, QosLevel]:
        return {tid: effective_level(cfg, self.counters.get(tid))
                for tid, cfg in self.thread_cfg.items()}

    def _init_metrics(self):
        names = [i.name for i in self.config.initiators]
        self.m_offered = {n: 0 for n in names}
        self.m_events = {n: [] for n in names}
        self.m_latency = {n: [] for n in names}
        self.m_requests = {n: 0 for n in names}
        self.m_misses = {n: 0 for n in names}
        self.m_target_latency: List[int] = []
        self.m_edge_wait: List[int] = []
        tids = list(self.thread_cfg)
        self.m_demoted = {t: 0 for t in tids}
        self.m_credit_sum = {t: 0 for t in tids}
        self.m_credit_min = {t: None for t in tids}
        self.m_credit_max = {t: None for t in tids}

    @property
    def measuring(self) -> bool:
        return self.cycle >= self.config.warmup_cycles

    def in_flight(self) -> int:
        return sum(len(q) for q in self.sources.values()) + self.topology.in_flight()

    # -- the cycle -------------------------------------------------------

    def step(self) -> None:
        t = self.cycle
        cfg = self.config
        measuring = t >= cfg.warmup_cycles
        topo = self.topology

        # 1. responses
        due = self.responses.pop(t, None)
        if due:
            for req in due:
                self.generators[req.initiator_id].on_read_complete(t)
                if measuring:
                    self.m_latency[req.initiator_id].append(t - req.issue_cycle + 1)
                    self.m_misses[req.initiator_id] += 1

        # 2. emission and injection
        for name, gen in self.generators.items():
            src = self.sources[name]
            if isinstance(gen, GreedyGenerator):
                gen.source_empty = not src
            emitted = gen.emit(t)
            if emitted:
                thread = self.thread_of[name]
                n = self.epoch_size[name]
                for kind, words in emitted:
                    seq = self.seq[name]
                    self.seq[name] = seq + 1
                    src.append(Request(name, thread, kind, words, insert_marker(seq, n), seq, t))
                    self.generated += 1
                    if measuring:
                        self.m_offered[name] += words * self.word_bytes
                    if self.record_trace:
                        self.trace.append((t, name, kind, words))
            if src:
                hop = topo.first_hop[name]
                key = (name, self.thread_of[name])
                q = hop.queues[key]
                while src and len(q) < hop.depth:
                    q.append(src.popleft())

        # 3. credits earn
        counters = self.counters
        for tid, c in counters.items():
            counters[tid] = credit_tick(c)
        levels = self._levels() if counters else self.levels

        # 4. grant at the target
        edge = topo.edge
        if self.target.is_idle(t) and not edge.is_empty():
            winner = edge.arbiter.pick(edge.views(levels), t)
            if winner is not None:
                self._grant(edge.queues[winner].popleft(), t, measuring)
                if counters:
                    levels = self._levels()
        else:
            edge.arbiter.idle(t)
        self.levels = levels
        self.sideband.publish(levels)

        # 5. fabric
        inner_levels = self.sideband.observe()
        for name, req in route_topology_step(topo, t, inner_levels):
            if topo.nodes[name].parent is edge:
                req.edge_arrival = t

        # 6. epoch bookkeeping
        if self.uses_levels:
            for node in topo.points():
                if not node.is_empty():
                    node.arbiter.advance(node.views(levels if node is edge else inner_levels))

        # 7. sampling
        if measuring:
            for tid, c in counters.items():
                v = c.count
                self.m_credit_sum[tid] += v
                lo = self.m_credit_min[tid]
                if lo is None or v < lo:
                    self.m_credit_min[tid] = v
                hi = self.m_credit_max[tid]
                if hi is None or v > hi:
                    self.m_credit_max[tid] = v
                if v < 0:
                    self.m_demoted[tid] += 1

        self.cycle = t + 1

    def _grant(self, req: Request, t: int, measuring: bool) -> None:
        res = self.target.service(req.is_read, req.burst_words, self.word_bytes, t)
        req.beats = res.occupancy
        req.grant_cycle = t
        self.serviced += 1
        c = self.counters.get(req.thread_id)
        if c is not None:
            self.counters[req.thread_id] = credit_debit(c, res.occupancy)
        name = req.initiator_id
        gen = self.generators.get(name)
        closed_loop = gen is not None and gen.closed_loop and req.is_read
        if closed_loop:
            done = res.last_beat_cycle + self.config.target.response_cycles
            # delivery is always strictly after the grant cycle
            self.responses.setdefault(max(done, t + 1), []).append(req)
        if not measuring:
            return
        self.m_events[name].append((t - self.config.warmup_cycles, req.burst_words * self.word_bytes))
        self.m_requests[name] += 1
        if closed_loop:
            self.m_target_latency.append(res.last_beat_cycle - t + 1)
            if req.edge_arrival >= 0:
                self.m_edge_wait.append(t - req.edge_arrival - 1)
        elif req.is_read:
            done = res.last_beat_cycle + self.config.target.response_cycles
            self.m_latency[name].append(done - req.issue_cycle + 1)

    def run(self, cycles: Optional[int] = None) -> None:
        end = self.config.sim_cycles if cycles is None else self.cycle + cycles
        step = self.step
        while self.cycle < end:
            step()

    # -- report ----------------------------------------------------------

    def report(self) -> MetricsReport:
        cfg = self.config
        clock = cfg.target.clock_mhz
        mc = cfg.measure_cycles
        measured = max(0, min(self.cycle - cfg.warmup_cycles, mc))
        inis = []
        cpu = None
        wheel = cfg.tdma_wheel if cfg.arbitration_scheme == "tdma" else None
        for ini in cfg.initiators:
            name = ini.name
            events = self.m_events[name]
            delivered = sum(b for _, b in events)
            tr = ini.traffic
            jrate = tr.rate_mbps if isinstance(tr, StreamTraffic) else 0.0
            inis.append(InitiatorReport(
                name=name, thread=ini.thread,
                offered_mbps=self.m_offered[name] / measured * clock if measured else 0.0,
                delivered_mbps=delivered / measured * clock if measured else 0.0,
                delivered_bytes=delivered,
                requests_serviced=self.m_requests[name],
                read_latency=latency_stats(self.m_latency[name]),
                jitter_rate_mbps=jrate,
                deficit_jitter_bytes=service_deficit_jitter(events, jrate / clock, 0, measured),
                windows_mbps=window_bandwidth(events, 0, measured, cfg.window_cycles, clock),
                slot_share_mbps=(wheel.count(ini.thread) / len(wheel) * cfg.target.peak_mbps
                                 if wheel else None),
            ))
            if cpu is None and isinstance(tr, CpuTraffic) and ini.enabled:
                secs = measured / (clock * 1e6)
                cpu = CpuReport(
                    name=name,
                    mips=mips(self.m_misses[name], tr.instr_per_miss, secs) if secs > 0 else 0.0,
                    misses_serviced=self.m_misses[name],
                    instr_per_miss=tr.instr_per_miss,
                    target_latency=latency_stats(self.m_target_latency),
                    edge_wait=latency_stats(self.m_edge_wait),
                )
        threads = []
        one = float(1 << 32)
        for tid, tcfg in self.thread_cfg.items():
            has = tid in self.counters and measured > 0
            threads.append(ThreadReport(
                thread=tid, level=tcfg.level.label,
                allocation_mbps=tcfg.allocation_fraction * cfg.target.peak_mbps,
                demoted_fraction=self.m_demoted[tid] / measured if has else 0.0,
                credit_min=self.m_credit_min[tid] / one if has else 0.0,
                credit_mean=self.m_credit_sum[tid] / measured / one if has else 0.0,
                credit_max=self.m_credit_max[tid] / one if has else 0.0,
            ))
        return MetricsReport(
            scenario=cfg.name, scheme=cfg.arbitration_scheme, seed=cfg.rng_seed,
            measure_cycles=measured, window_cycles=cfg.window_cycles, clock_mhz=clock,
            initiators=inis, threads=threads, cpu=cpu,
            generated=self.generated, serviced=self.serviced, in_flight=self.in_flight(),
        )


def run_scenario(config: ScenarioConfig, record_trace: bool = False) -> MetricsReport:
    sim = SimRun(config, record_trace=record_trace)
    sim.run()
    return sim.report()
