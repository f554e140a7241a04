"""The six system experiments (priority / TDMA / QoS x low / high miss rate)
and small synthetic scenarios used by property checks."""

from __future__ import annotations

from typing import Dict, Iterable, Optional

from .model import (CpuTraffic, GreedyTraffic, InitiatorConfig, NodeConfig, QosLevel,
                    ScenarioConfig, StreamTraffic, TargetConfig, ThreadConfig)

PEAK_MBPS = 1600.0

MISS = {
    # miss rate, mean think time in interconnect cycles after the last miss response
    "low": (0.0285, 35.0),
    "high": (0.25, 4.0),
}

TDMA_WHEEL = ["MPEG", "CPU", "MPEG", "VID", "MPEG", "CPU", "MPEG", "GEN"]
PRIORITY_ORDER = ["CPU", "MPEG", "VID", "GEN"]
ALLOCATION_MBPS = {"MPEG": 800.0, "VID": 240.0}
ALLOCATION_MBPS["CPU"] = PEAK_MBPS - sum(ALLOCATION_MBPS.values())

# Bytes per word in the system presets: 8-byte words make every burst a whole
# number of target beats, so a beat allocation equals a data-rate allocation.
WORD_BYTES = 8
# The CPU may run at most this many beats into debt. Shallower than the
# default (-pos_limit) so the spare best-effort share goes to the latency
# critical CPU rather than to GEN; MPEG and VID allocations are unaffected.
CPU_NEG_LIMIT_BEATS = 3.0

PRESET_NAMES = ("priority-low", "priority-high", "tdma-low", "tdma-high", "qos-low", "qos-high")
_SCHEME = {"priority": "fixed_priority", "tdma": "tdma", "qos": "qos"}


def system_threads() -> list:
    return [
        ThreadConfig("CPU", QosLevel.PRIORITY, ALLOCATION_MBPS["CPU"] / PEAK_MBPS, epoch_size=1,
                     neg_limit=-CPU_NEG_LIMIT_BEATS),
        ThreadConfig("MPEG", QosLevel.BANDWIDTH, ALLOCATION_MBPS["MPEG"] / PEAK_MBPS, epoch_size=8),
        ThreadConfig("VID", QosLevel.BANDWIDTH, ALLOCATION_MBPS["VID"] / PEAK_MBPS, epoch_size=1),
        ThreadConfig("GEN", QosLevel.BEST_EFFORT, 0.0, epoch_size=1),
    ]


def system_initiators(miss: str) -> list:
    miss_rate, think = MISS[miss]
    return [
        InitiatorConfig("CPU", "node2", "CPU",
                        CpuTraffic(miss_rate=miss_rate, mean_think_cycles=think)),
        InitiatorConfig("MPEG", "node2", "MPEG",
                        StreamTraffic(min_words=1, max_words=8, read_fraction=2 / 3,
                                      rate_mbps=800.0, arrival="bursty")),
        InitiatorConfig("VID", "node1", "VID",
                        StreamTraffic(min_words=8, max_words=8, read_fraction=1.0,
                                      rate_mbps=200.0, arrival="regular")),
        InitiatorConfig("GEN", "node1", "GEN",
                        StreamTraffic(min_words=1, max_words=8, read_fraction=0.5,
                                      rate_mbps=100.0, arrival="bursty")),
    ]


def system_nodes() -> list:
    return [NodeConfig("node2", None), NodeConfig("node1", "node2")]


def preset(name: str, **overrides) -> ScenarioConfig:
    try:
        scheme_key, miss = name.split("-")
        scheme = _SCHEME[scheme_key]
        MISS[miss]
    except (ValueError, KeyError):
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}") from None
    cfg = ScenarioConfig(
        name=name,
        arbitration_scheme=scheme,
        initiators=system_initiators(miss),
        threads=system_threads(),
        nodes=system_nodes(),
        target=TargetConfig(),
        word_bytes=WORD_BYTES,
        priority_order=list(PRIORITY_ORDER),
        tdma_wheel=list(TDMA_WHEEL),
        weights={"CPU": 1, "MPEG": 4, "VID": 1, "GEN": 1},
    )
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg


def all_presets(**overrides) -> Dict[str, ScenarioConfig]:
    return {n: preset(n, **overrides) for n in PRESET_NAMES}


def greedy_scenario(epoch_sizes: Dict[str, int], scheme: str = "qos", tree: Optional[Iterable[str]] = None,
                    burst_words: int = 2, **overrides) -> ScenarioConfig:
    """Greedy best-effort initiators contending for the target.

    With ``tree`` the named initiators sit behind an extra leaf node feeding
    the root; otherwise all attach to the single root node.
    """
    leaf = set(tree or ())
    nodes = [NodeConfig("root", None)]
    if leaf:
        nodes.append(NodeConfig("leaf", "root"))
    inis = [InitiatorConfig(name, "leaf" if name in leaf else "root", name,
                            GreedyTraffic(burst_words=burst_words))
            for name in epoch_sizes]
    threads = [ThreadConfig(name, QosLevel.BEST_EFFORT, 0.0, epoch_size=n)
               for name, n in epoch_sizes.items()]
    cfg = ScenarioConfig(name="greedy", arbitration_scheme=scheme, initiators=inis,
                         threads=threads, nodes=nodes, warmup_cycles=0,
                         priority_order=list(epoch_sizes), tdma_wheel=list(epoch_sizes),
                         weights={n: 1 for n in epoch_sizes})
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return cfg
