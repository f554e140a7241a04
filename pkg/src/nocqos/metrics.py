"""Run measurements: bandwidth series, latency statistics, service-deficit
jitter and the CPU MIPS figure."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

log = logging.getLogger(__name__)


def mips(misses_serviced: int, instr_per_miss: float, elapsed_seconds: float) -> float:
    if elapsed_seconds <= 0:
        raise ValueError("elapsed time must be positive")
    if misses_serviced == 0:
        log.warning("no cache misses serviced in the measurement window; reporting 0 MIPS")
        return 0.0
    return misses_serviced * instr_per_miss / elapsed_seconds / 1e6


def service_deficit_jitter(events: Sequence[Tuple[int, float]], rate: float,
                           start: int, end: int) -> float:
    """Worst shortfall of service against ``rate`` bytes/cycle over any interval.

    ``events`` are ``(cycle, bytes)`` services inside ``[start, end)``, sorted
    by cycle. With deficit D(t) = rate*(t - start + 1) - served(<= t), the
    answer is max over t1 < t2 of D(t2) - D(t1), found with a running minimum.
    """
    if rate <= 0 or end <= start:
        return 0.0
    best = 0.0
    d_min = 0.0          # D(start - 1)
    served = 0.0
    prev = start - 1     # last cycle at which D has been folded in
    i, n = 0, len(events)
    while i < n:
        cyc = events[i][0]
        # D rises linearly up to cyc - 1 with no service
        if cyc - 1 > prev:
            d_before = rate * (cyc - start) - served
            if d_before - d_min > best:
                best = d_before - d_min
        while i < n and events[i][0] == cyc:
            served += events[i][1]
            i += 1
        d_at = rate * (cyc - start + 1) - served
        if d_at - d_min > best:
            best = d_at - d_min
        if d_at < d_min:
            d_min = d_at
        prev = cyc
    if end - 1 > prev:
        d_end = rate * (end - start) - served
        best = max(best, d_end - d_min)
    return best


def window_bandwidth(events: Sequence[Tuple[int, float]], start: int, end: int,
                     window_cycles: int, clock_mhz: float) -> List[float]:
    """Tumbling-window delivered bandwidth in MB/s (a trailing partial window is kept)."""
    if window_cycles < 1:
        raise ValueError("window must be ≥ 1 cycle")
    n = max(0, math.ceil((end - start) / window_cycles))
    sums = [0.0] * n
    for cyc, b in events:
        if start <= cyc < end:
            sums[(cyc - start) // window_cycles] += b
    out = []
    for k, s in enumerate(sums):
        length = min(window_cycles, end - start - k * window_cycles)
        out.append(s / length * clock_mhz)
    return out


def latency_stats(samples: Sequence[int]) -> Dict[str, float]:
    if not samples:
        return {"min": float("nan"), "mean": float("nan"), "p95": float("nan"), "max": float("nan")}
    arr = np.asarray(samples, dtype=float)
    return {"min": float(arr.min()), "mean": float(arr.mean()),
            "p95": float(np.percentile(arr, 95)), "max": float(arr.max())}


@dataclass
class InitiatorReport:
    name: str
    thread: str
    offered_mbps: float
    delivered_mbps: float
    delivered_bytes: int
    requests_serviced: int
    read_latency: Dict[str, float]
    jitter_rate_mbps: float
    deficit_jitter_bytes: float
    windows_mbps: List[float] = field(default_factory=list)
    # TDMA only: the bandwidth ceiling implied by the thread's wheel slots
    slot_share_mbps: Optional[float] = None


@dataclass
class ThreadReport:
    thread: str
    level: str
    allocation_mbps: float
    demoted_fraction: float
    credit_min: float
    credit_mean: float
    credit_max: float


@dataclass
class CpuReport:
    name: str
    mips: float
    misses_serviced: int
    instr_per_miss: float
    target_latency: Dict[str, float]
    edge_wait: Dict[str, float]


@dataclass
class MetricsReport:
    scenario: str
    scheme: str
    seed: int
    measure_cycles: int
    window_cycles: int
    clock_mhz: float
    initiators: List[InitiatorReport]
    threads: List[ThreadReport]
    cpu: Optional[CpuReport]
    generated: int
    serviced: int
    in_flight: int

    def initiator(self, name: str) -> InitiatorReport:
        for r in self.initiators:
            if r.name == name:
                return r
        raise KeyError(name)

    def thread(self, name: str) -> ThreadReport:
        for r in self.threads:
            if r.thread == name:
                return r
        raise KeyError(name)

    @property
    def total_delivered_mbps(self) -> float:
        return sum(r.delivered_mbps for r in self.initiators)

    def to_dict(self) -> dict:
        return asdict(self)

    # -- output formats ----------------------------------------------------

    def windows_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["initiator", "window", "start_cycle", "end_cycle", "delivered_mbps"])
        for r in self.initiators:
            for k, bw in enumerate(r.windows_mbps):
                s = k * self.window_cycles
                e = min(s + self.window_cycles, self.measure_cycles)
                w.writerow([r.name, k, s, e, _fmt(bw)])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["initiator", "thread", "offered_mbps", "delivered_mbps", "requests",
                    "lat_min", "lat_mean", "lat_p95", "lat_max",
                    "jitter_rate_mbps", "deficit_jitter_bytes", "slot_share_mbps"])
        for r in self.initiators:
            lat = r.read_latency
            w.writerow([r.name, r.thread, _fmt(r.offered_mbps), _fmt(r.delivered_mbps),
                        r.requests_serviced, _fmt(lat["min"]), _fmt(lat["mean"]),
                        _fmt(lat["p95"]), _fmt(lat["max"]),
                        _fmt(r.jitter_rate_mbps), _fmt(r.deficit_jitter_bytes),
                        "" if r.slot_share_mbps is None else _fmt(r.slot_share_mbps)])
        return buf.getvalue()

    def threads_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["thread", "level", "allocation_mbps", "demoted_fraction",
                    "credit_min", "credit_mean", "credit_max"])
        for t in self.threads:
            w.writerow([t.thread, t.level, _fmt(t.allocation_mbps), _fmt(t.demoted_fraction),
                        _fmt(t.credit_min), _fmt(t.credit_mean), _fmt(t.credit_max)])
        return buf.getvalue()

    def summary_text(self) -> str:
        lines = [f"scenario {self.scenario} (scheme {self.scheme}, seed {self.seed}, "
                 f"{self.measure_cycles} measured cycles)"]
        if self.cpu is not None:
            c = self.cpu
            lines.append(f"  {c.name} MIPS: {c.mips:.1f}  (misses {c.misses_serviced}, "
                         f"{c.instr_per_miss:.2f} instr/miss)")
        lines.append(f"  {'initiator':<10}{'offered':>10}{'delivered':>11}{'lat mean':>10}"
                     f"{'lat p95':>9}{'jitter B':>10}")
        for r in self.initiators:
            lat = r.read_latency
            lines.append(f"  {r.name:<10}{r.offered_mbps:>8.1f}MB{r.delivered_mbps:>9.1f}MB"
                         f"{lat['mean']:>10.2f}{lat['p95']:>9.1f}{r.deficit_jitter_bytes:>10.1f}")
        if self.cpu is not None:
            r = self.initiator(self.cpu.name)
            if r.slot_share_mbps is not None:
                lines.append(f"  {r.name} bandwidth ceiling at its TDMA slot share: "
                             f"{r.slot_share_mbps:.0f} MB/s ({100 * r.delivered_mbps / r.slot_share_mbps:.0f}% used)")
        lines.append(f"  total delivered {self.total_delivered_mbps:.1f} MB/s")
        for t in self.threads:
            if t.allocation_mbps > 0:
                lines.append(f"  thread {t.thread}: {t.level}, {t.allocation_mbps:.0f} MB/s, "
                             f"demoted {100 * t.demoted_fraction:.1f}% of cycles")
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "windows.csv").write_text(self.windows_csv(), encoding="utf-8")
        (out / "summary.csv").write_text(self.summary_csv(), encoding="utf-8")
        (out / "threads.csv").write_text(self.threads_csv(), encoding="utf-8")
        (out / "summary.txt").write_text(self.summary_text(), encoding="utf-8")
        return out


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isnan(x):
        return ""
    return f"{x:.6f}" if isinstance(x, float) else str(x)
