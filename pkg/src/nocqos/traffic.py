"""Initiator workload models.

Generators only decide *when* and *what* to issue; the engine wraps each
``(kind, words)`` emission into a Request and feeds it to the fabric.
Every generator draws from its own seeded ``random.Random`` so one
initiator's parameters never perturb another's trace.
"""

from __future__ import annotations

import csv
import math
import random
import zlib
from collections import deque
from fractions import Fraction
from pathlib import Path

from .model import CpuTraffic, GreedyTraffic, StreamTraffic, TraceTraffic

TRACE_FIELDS = ("cycle", "initiator", "kind", "words")


def derive_seed(scenario_seed: int, initiator: str) -> int:
    """Stable per-initiator seed (independent of initiator ordering)."""
    return (scenario_seed * 1_000_003 + zlib.crc32(initiator.encode())) & 0xFFFFFFFF


def geometric(rng: random.Random, mean: float) -> int:
    """Geometric draw on {1, 2, ...} with the given mean (inverse transform)."""
    if mean <= 1.0:
        return 1
    p = 1.0 / mean
    u = 1.0 - rng.random()  # (0, 1]
    return 1 + int(math.log(u) / math.log1p(-p))


class CpuGenerator:
    """Closed-loop cached CPU: think, miss, stall until the line returns.

    Writebacks ride along with a miss as posted writes and never stall.
    """

    closed_loop = True

    def __init__(self, params: CpuTraffic, rng: random.Random):
        self.params = params
        self.rng = rng
        self.outstanding = False
        self.next_issue = geometric(rng, params.mean_think_cycles)
        self.think_draws = []  # filled only when tracing is on
        self.record = False

    def on_read_complete(self, cycle: int) -> None:
        self.outstanding = False
        think = geometric(self.rng, self.params.mean_think_cycles)
        if self.record:
            self.think_draws.append(think)
        self.next_issue = cycle + think

    def emit(self, cycle: int):
        if self.outstanding or cycle < self.next_issue:
            return ()
        self.outstanding = True
        words = self.params.burst_words
        if self.rng.random() < self.params.writeback_prob:
            return (("read", words), ("write", words))
        return (("read", words),)


class StreamGenerator:
    """Open-loop stream at a target byte rate.

    ``bursty`` spaces bursts by geometric gaps, ``regular`` by exact
    fractional periods and ``fixed`` by the mean gap rounded to a cycle.
    """

    closed_loop = False

    def __init__(self, params: StreamTraffic, rng: random.Random, word_bytes: int,
                 clock_mhz: float):
        self.params = params
        self.rng = rng
        self.word_bytes = word_bytes
        bytes_per_cycle = params.rate_mbps / clock_mhz
        self.mean_gap = params.mean_words * word_bytes / bytes_per_cycle
        self._regular_period = Fraction(params.mean_words * word_bytes).limit_denominator() / \
            Fraction(bytes_per_cycle).limit_denominator(1 << 20)
        self._regular_next = Fraction(0)
        self.next_issue = 0 if params.arrival != "bursty" else geometric(rng, self.mean_gap) - 1

    def _gap(self) -> int:
        arrival = self.params.arrival
        if arrival == "bursty":
            return geometric(self.rng, self.mean_gap)
        if arrival == "fixed":
            return max(1, round(self.mean_gap))
        self._regular_next += self._regular_period
        return max(0, math.ceil(self._regular_next) - self.next_issue)

    def emit(self, cycle: int):
        out = []
        while cycle >= self.next_issue:
            p = self.params
            words = p.min_words if p.min_words == p.max_words else self.rng.randint(p.min_words, p.max_words)
            kind = "read" if p.read_fraction >= 1.0 or self.rng.random() < p.read_fraction else "write"
            out.append((kind, words))
            gap = self._gap()
            if gap <= 0:
                gap = 1
            self.next_issue += gap
        return out


class GreedyGenerator:
    """Keeps exactly one request waiting at its source at all times."""

    closed_loop = False

    def __init__(self, params: GreedyTraffic, rng: random.Random):
        self.params = params
        self.rng = rng
        self.source_empty = True

    def emit(self, cycle: int):
        if not self.source_empty:
            return ()
        p = self.params
        kind = "read" if p.read_fraction >= 1.0 or self.rng.random() < p.read_fraction else "write"
        return ((kind, p.burst_words),)


class TraceGenerator:
    closed_loop = False

    def __init__(self, records):
        self.records = deque(sorted(records, key=lambda r: r[0]))

    def emit(self, cycle: int):
        out = []
        while self.records and self.records[0][0] <= cycle:
            _, kind, words = self.records.popleft()
            out.append((kind, words))
        return out


def read_trace(path, initiator: str):
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if row["initiator"] != initiator:
                continue
            kind = row["kind"].strip()
            if kind not in ("read", "write"):
                raise ValueError(f"{path}: bad request kind {kind!r}")
            records.append((int(row["cycle"]), kind, int(row["words"])))
    return records


def write_trace(path, records) -> None:
    """Write ``(cycle, initiator, kind, words)`` records in replayable form."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for rec in records:
            w.writerow(rec)


def make_generator(initiator, scenario_seed: int, word_bytes: int, clock_mhz: float):
    seed = initiator.seed if initiator.seed is not None else derive_seed(scenario_seed, initiator.name)
    rng = random.Random(seed)
    tr = initiator.traffic
    if isinstance(tr, CpuTraffic):
        return CpuGenerator(tr, rng)
    if isinstance(tr, StreamTraffic):
        return StreamGenerator(tr, rng, word_bytes, clock_mhz)
    if isinstance(tr, GreedyTraffic):
        return GreedyGenerator(tr, rng)
    if isinstance(tr, TraceTraffic):
        return TraceGenerator(read_trace(Path(tr.path), initiator.name))
    raise TypeError(f"unsupported traffic {tr!r}")
