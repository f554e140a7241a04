"""SRAM-like shared target: one beat per cycle, fixed access latency."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple


class ServiceResult(NamedTuple):
    occupancy: int
    last_beat_cycle: int   # last read beat, or last accepted write beat
    done_cycle: int        # first cycle the target is free again


@dataclass
class TargetModel:
    beat_bytes: int = 8
    latency_cycles: int = 1
    busy_until: int = 0

    def is_idle(self, cycle: int) -> bool:
        return cycle >= self.busy_until

    def occupancy(self, burst_words: int, word_bytes: int) -> int:
        return max(1, -(-burst_words * word_bytes // self.beat_bytes))

    def service(self, is_read: bool, burst_words: int, word_bytes: int, cycle: int) -> ServiceResult:
        """Grant a whole burst at ``cycle``; the target stays busy until it drains."""
        if not self.is_idle(cycle):
            raise RuntimeError(f"target busy until cycle {self.busy_until}, grant at {cycle}")
        occ = self.occupancy(burst_words, word_bytes)
        self.busy_until = cycle + occ
        if is_read:
            last = cycle + self.latency_cycles + occ - 1
        else:
            last = cycle + occ - 1
        return ServiceResult(occ, last, cycle + occ)

    def peak_bytes_per_cycle(self) -> int:
        return self.beat_bytes
