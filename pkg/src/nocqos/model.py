"""Domain vocabulary shared by the simulator: levels, requests, threads and
scenario configuration, plus validation and the YAML config format."""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Any, Optional, Union

import yaml

SCHEMES = ("fixed_priority", "round_robin", "tdma", "fixed_weight", "qos")


class ConfigurationError(ValueError):
    """Raised when a scenario or arbiter input is structurally invalid."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class QosLevel(IntEnum):
    """Thread service level. Larger value wins under strict level priority."""

    BEST_EFFORT = 0
    BANDWIDTH = 1
    PRIORITY = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value: Union[str, int, "QosLevel"]) -> "QosLevel":
        if isinstance(value, QosLevel):
            return value
        try:
            if isinstance(value, int):
                return cls(value)
            return cls[str(value).strip().upper().replace("-", "_")]
        except (KeyError, ValueError):
            raise ConfigurationError(f"unknown QoS level {value!r}") from None


@dataclass(slots=True)
class Request:
    """One read or write burst in flight through the fabric."""

    initiator_id: str
    thread_id: str
    kind: str
    burst_words: int
    epoch_marker: bool
    seq_no: int
    issue_cycle: int
    beats: int = 0
    edge_arrival: int = -1
    grant_cycle: int = -1

    @property
    def is_read(self) -> bool:
        return self.kind == "read"


@dataclass
class ThreadConfig:
    thread_id: str
    level: QosLevel = QosLevel.BEST_EFFORT
    allocation_fraction: float = 0.0
    epoch_size: int = 1
    # None selects the default: twice the largest burst (in beats) of the
    # thread's initiators, mirrored for the negative side.
    pos_limit: Optional[float] = None
    neg_limit: Optional[float] = None

    def __post_init__(self):
        self.level = QosLevel.parse(self.level)


@dataclass
class CpuTraffic:
    kind: str = "cpu"
    core_mhz: float = 800.0
    cpi: float = 1.0
    loadstore_fraction: float = 0.25
    miss_rate: float = 0.0285
    burst_words: int = 4
    writeback_prob: float = 0.25
    mean_think_cycles: float = 35.0

    @property
    def instr_per_miss(self) -> float:
        return 1.0 / (self.loadstore_fraction * self.miss_rate)


@dataclass
class StreamTraffic:
    kind: str = "stream"
    min_words: int = 1
    max_words: int = 8
    read_fraction: float = 1.0
    rate_mbps: float = 100.0
    arrival: str = "bursty"  # bursty | regular | fixed

    @property
    def mean_words(self) -> float:
        return (self.min_words + self.max_words) / 2.0


@dataclass
class GreedyTraffic:
    """Always has a request waiting; used for arbitration property runs."""

    kind: str = "greedy"
    burst_words: int = 2
    read_fraction: float = 1.0


@dataclass
class TraceTraffic:
    """Replays records ``cycle,initiator,kind,words`` from a CSV file."""

    kind: str = "trace"
    path: str = ""


Traffic = Union[CpuTraffic, StreamTraffic, GreedyTraffic, TraceTraffic]
_TRAFFIC_KINDS = {
    "cpu": CpuTraffic,
    "stream": StreamTraffic,
    "greedy": GreedyTraffic,
    "trace": TraceTraffic,
}


@dataclass
class InitiatorConfig:
    name: str
    attach: str
    thread: str
    traffic: Traffic = field(default_factory=StreamTraffic)
    enabled: bool = True
    seed: Optional[int] = None


@dataclass
class NodeConfig:
    name: str
    parent: Optional[str] = None  # None feeds the target edge


@dataclass
class TargetConfig:
    beat_bytes: int = 8
    latency_cycles: int = 1
    clock_mhz: float = 200.0
    # fixed, contention-free return path from target to initiator
    response_cycles: int = 0

    @property
    def peak_mbps(self) -> float:
        return self.beat_bytes * self.clock_mhz


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    arbitration_scheme: str = "qos"
    initiators: list = field(default_factory=list)
    threads: list = field(default_factory=list)
    nodes: list = field(default_factory=list)
    target: TargetConfig = field(default_factory=TargetConfig)
    word_bytes: int = 4
    warmup_cycles: int = 10_000
    measure_cycles: int = 1_000_000
    rng_seed: int = 1
    queue_depth: int = 4
    sideband_delay: int = 0
    window_cycles: int = 10_000
    priority_order: list = field(default_factory=list)
    tdma_wheel: list = field(default_factory=list)
    tdma_backfill: bool = False
    # shift each interior wheel by its hop distance to the edge so a request
    # forwarded in its slot meets its own slot at the next point
    tdma_align: bool = True
    weights: dict = field(default_factory=dict)

    @property
    def sim_cycles(self) -> int:
        return self.warmup_cycles + self.measure_cycles

    def thread(self, thread_id: str) -> ThreadConfig:
        for t in self.threads:
            if t.thread_id == thread_id:
                return t
        raise KeyError(thread_id)

    def initiator(self, name: str) -> InitiatorConfig:
        for i in self.initiators:
            if i.name == name:
                return i
        raise KeyError(name)

    def burst_beats(self, words: int) -> int:
        return max(1, -(-words * self.word_bytes // self.target.beat_bytes))

    def max_burst_beats(self, thread_id: str) -> int:
        """Largest burst, in target beats, any initiator on the thread can issue."""
        words = 1
        for ini in self.initiators:
            if ini.thread != thread_id:
                continue
            tr = ini.traffic
            if isinstance(tr, StreamTraffic):
                words = max(words, tr.max_words)
            elif isinstance(tr, (CpuTraffic, GreedyTraffic)):
                words = max(words, tr.burst_words)
            else:
                words = max(words, 8)
        return self.burst_beats(words)

    def credit_limits(self, thread_id: str) -> tuple:
        t = self.thread(thread_id)
        pos = t.pos_limit if t.pos_limit is not None else 2.0 * self.max_burst_beats(thread_id)
        neg = t.neg_limit if t.neg_limit is not None else -pos
        return pos, neg


def validate(config: ScenarioConfig) -> list:
    """Return every violated invariant; an empty list means the config is ok."""
    v = []
    if config.arbitration_scheme not in SCHEMES:
        v.append(f"unknown arbitration scheme {config.arbitration_scheme!r}")
    for attr in ("word_bytes", "queue_depth", "window_cycles"):
        if getattr(config, attr) < 1:
            v.append(f"{attr} must be ≥ 1")
    for attr in ("warmup_cycles", "measure_cycles", "sideband_delay"):
        if getattr(config, attr) < 0:
            v.append(f"{attr} must be ≥ 0")
    tg = config.target
    if tg.beat_bytes < 1 or tg.clock_mhz <= 0:
        v.append("target beat_bytes and clock_mhz must be positive")
    if tg.latency_cycles < 1:
        v.append("target latency_cycles must be ≥ 1")
    if tg.response_cycles < 0:
        v.append("target response_cycles must be ≥ 0")

    thread_ids = [t.thread_id for t in config.threads]
    if len(set(thread_ids)) != len(thread_ids):
        v.append("duplicate thread ids")
    alloc_sum = 0.0
    for t in config.threads:
        if t.epoch_size < 1:
            v.append(f"thread {t.thread_id}: epoch size must be ≥ 1")
        if not 0.0 <= t.allocation_fraction <= 1.0:
            v.append(f"thread {t.thread_id}: allocation must lie in [0, 1]")
        if t.level == QosLevel.BEST_EFFORT:
            if t.allocation_fraction != 0:
                v.append(f"thread {t.thread_id}: best_effort threads take no allocation")
        else:
            alloc_sum += t.allocation_fraction
        if t.pos_limit is not None and t.pos_limit < 0:
            v.append(f"thread {t.thread_id}: pos_limit must be ≥ 0")
        if t.neg_limit is not None and t.neg_limit > 0:
            v.append(f"thread {t.thread_id}: neg_limit must be ≤ 0")
    if alloc_sum > 1.0 + 1e-9:
        v.append(f"allocation sum > 1 ({alloc_sum:.4g})")

    node_names = [n.name for n in config.nodes]
    if not node_names:
        v.append("topology needs at least one node")
    if len(set(node_names)) != len(node_names):
        v.append("duplicate node names")
    known_nodes = set(node_names)
    for n in config.nodes:
        if n.parent is not None and n.parent not in known_nodes:
            v.append(f"node {n.name}: unknown parent {n.parent!r}")
    parents = {n.name: n.parent for n in config.nodes}
    for name in node_names:
        seen, cur = set(), name
        while cur is not None and cur in parents:
            if cur in seen:
                v.append(f"node {name}: cycle in topology")
                break
            seen.add(cur)
            cur = parents[cur]

    names = [i.name for i in config.initiators]
    if len(set(names)) != len(names):
        v.append("duplicate initiator names")
    if set(names) & known_nodes:
        v.append("initiator and node names must be distinct")
    for ini in config.initiators:
        if ini.attach not in known_nodes:
            v.append(f"initiator {ini.name}: unknown attach node {ini.attach!r}")
        if ini.thread not in thread_ids:
            v.append(f"initiator {ini.name}: unknown thread {ini.thread!r}")
        v.extend(f"initiator {ini.name}: {msg}" for msg in _traffic_violations(ini.traffic))

    used = {i.thread for i in config.initiators}
    scheme = config.arbitration_scheme
    if scheme == "fixed_priority":
        missing = used - set(config.priority_order)
        if missing:
            v.append(f"priority order misses threads {sorted(missing)}")
    elif scheme == "tdma":
        if not config.tdma_wheel:
            v.append("TDMA wheel must be non-empty")
        unknown = set(config.tdma_wheel) - set(thread_ids)
        if unknown:
            v.append(f"TDMA wheel names unknown threads {sorted(unknown)}")
    elif scheme == "fixed_weight":
        for tid in used:
            w = config.weights.get(tid)
            if w is None:
                v.append(f"no weight for thread {tid}")
            elif int(w) != w or w < 1:
                v.append(f"thread {tid}: weight must be an integer ≥ 1")
    return v


def _traffic_violations(tr) -> list:
    v = []
    if isinstance(tr, CpuTraffic):
        if not 0 < tr.miss_rate <= 1 or not 0 < tr.loadstore_fraction <= 1:
            v.append("miss_rate and loadstore_fraction must lie in (0, 1]")
        if tr.burst_words < 1:
            v.append("burst_words must be ≥ 1")
        if tr.mean_think_cycles < 1:
            v.append("mean_think_cycles must be ≥ 1")
        if not 0 <= tr.writeback_prob <= 1:
            v.append("writeback_prob must lie in [0, 1]")
    elif isinstance(tr, StreamTraffic):
        if not 1 <= tr.min_words <= tr.max_words:
            v.append("need 1 ≤ min_words ≤ max_words")
        if tr.rate_mbps <= 0:
            v.append("rate_mbps must be positive")
        if not 0 <= tr.read_fraction <= 1:
            v.append("read_fraction must lie in [0, 1]")
        if tr.arrival not in ("bursty", "regular", "fixed"):
            v.append(f"unknown arrival discipline {tr.arrival!r}")
    elif isinstance(tr, GreedyTraffic):
        if tr.burst_words < 1:
            v.append("burst_words must be ≥ 1")
    elif isinstance(tr, TraceTraffic):
        if not tr.path:
            v.append("trace traffic needs a path")
    else:
        v.append(f"unknown traffic type {type(tr).__name__}")
    return v


def require_valid(config: ScenarioConfig) -> None:
    violations = validate(config)
    if violations:
        raise ConfigurationError(violations)


# -- serialization ---------------------------------------------------------

def to_dict(config: ScenarioConfig) -> dict:
    d = asdict(config)
    for t in d["threads"]:
        t["level"] = QosLevel(t["level"]).label
    return d


def from_dict(data: dict) -> ScenarioConfig:
    data = copy.deepcopy(data)
    try:
        threads = [ThreadConfig(**t) for t in data.pop("threads", [])]
        nodes = [NodeConfig(**n) for n in data.pop("nodes", [])]
        target = TargetConfig(**data.pop("target", {}))
        initiators = []
        for ini in data.pop("initiators", []):
            tr = dict(ini.pop("traffic", {"kind": "stream"}))
            kind = tr.get("kind", "stream")
            if kind not in _TRAFFIC_KINDS:
                raise ConfigurationError(f"unknown traffic kind {kind!r}")
            initiators.append(InitiatorConfig(traffic=_TRAFFIC_KINDS[kind](**tr), **ini))
        return ScenarioConfig(initiators=initiators, threads=threads, nodes=nodes,
                              target=target, **data)
    except TypeError as exc:
        raise ConfigurationError(f"malformed config: {exc}") from None


def dump_yaml(config: ScenarioConfig) -> str:
    return yaml.safe_dump(to_dict(config), sort_keys=False)


def load_yaml(text: str) -> ScenarioConfig:
    data = yaml.safe_load(text)
    if not isinstance(data, dict):
        raise ConfigurationError("config file must hold a mapping")
    return from_dict(data)


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    return load_yaml(Path(path).read_text(encoding="utf-8"))


def save_config(config: ScenarioConfig, path: Union[str, Path]) -> None:
    Path(path).write_text(dump_yaml(config), encoding="utf-8")


def apply_override(data: dict, key: str, value: Any) -> None:
    """Set a dotted ``key`` in the dict form of a config.

    List items may be addressed by their ``name`` or ``thread_id``, e.g.
    ``threads.CPU.pos_limit`` or ``initiators.GEN.seed``.
    """
    parts = key.split(".")
    cur: Any = data
    for i, part in enumerate(parts):
        last = i == len(parts) - 1
        if isinstance(cur, list):
            match = [x for x in cur if isinstance(x, dict)
                     and part in (x.get("name"), x.get("thread_id"))]
            if not match:
                raise ConfigurationError(f"override {key}: no list item named {part!r}")
            if last:
                raise ConfigurationError(f"override {key}: cannot replace a list item")
            cur = match[0]
        elif isinstance(cur, dict):
            if last:
                if part not in cur and not (len(parts) == 2 and parts[0] == "weights"):
                    raise ConfigurationError(f"override {key}: unknown key {part!r}")
                cur[part] = value
                return
            if part not in cur:
                raise ConfigurationError(f"override {key}: unknown key {part!r}")
            cur = cur[part]
        else:
            raise ConfigurationError(f"override {key}: {part!r} is not a container")
