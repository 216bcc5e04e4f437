"""Experiment configuration: JSON schema, validation, round-trip.

A config file is a single JSON object with sections `topology`,
`devices`, `workload`, `coherence`, plus top-level run controls.  All
unset keys fall back to the defaults below (the device latencies default
to the calibrated values: requester 10 ns, cache 12 ns, controller
40 ns, port 25 ns, bus propagation 1 ns, switching 20 ns).
"""

import json
from dataclasses import dataclass, field, asdict

from .topology import TopologyError, LinkSpec, make_topology

TOPOLOGY_KINDS = ("chain", "tree", "ring", "spine_leaf", "fully_connected",
                  "single_bus")
PATTERNS = ("stream", "uniform", "skewed", "trace")
POLICY_NAMES = ("FIFO", "LRU", "LFI", "LIFO", "MRU", "BLOCK")


class ConfigError(Exception):
    """Schema violation; message names the offending field path."""


@dataclass
class DeviceLatencies:
    requester_process: int = 10
    cache_access: int = 12
    controller: int = 40
    port_delay: int = 25
    bus_propagation: int = 1
    switching: int = 20
    memory_access: int = 50


@dataclass
class TopologyConfig:
    preset: str = "single_bus"
    n_requesters: int = 1
    n_endpoints: int = 1
    link_bandwidth: float = 64.0
    terminal_bandwidth: float = 0.0     # 0 -> same as link_bandwidth
    duplex: str = "full"
    turnaround: int = 0
    header_overhead: float = 0.0
    spines: int = 2
    leaf_size: int = 4
    tree_fanout: int = 2
    bandwidth_scale: float = 1.0
    links: list = field(default_factory=list)   # explicit link records
    roles: dict = field(default_factory=dict)   # node id -> role

    def build(self, propagation=1):
        if self.links:
            roles = {int(k): v for k, v in self.roles.items()}
            links = [LinkSpec(l["a"], l["b"],
                              l.get("bandwidth", self.link_bandwidth)
                              * self.bandwidth_scale,
                              l.get("propagation", propagation),
                              l.get("duplex", self.duplex),
                              l.get("turnaround", self.turnaround),
                              l.get("header_overhead", self.header_overhead))
                     for l in self.links]
            return roles, links
        return make_topology(
            self.preset, self.n_requesters, self.n_endpoints,
            link_bandwidth=self.link_bandwidth * self.bandwidth_scale,
            propagation=propagation, duplex=self.duplex,
            turnaround=self.turnaround, header_overhead=self.header_overhead,
            tree_fanout=self.tree_fanout, spines=self.spines,
            leaf_size=self.leaf_size,
            terminal_bandwidth=self.terminal_bandwidth * self.bandwidth_scale)


@dataclass
class WorkloadConfig:
    pattern: str = "uniform"
    footprint_bytes: int = 1 << 20
    hot_fraction: float = 0.10
    hot_prob: float = 0.90
    read_ratio: float = 1.0
    requests_per_requester: int = 4000
    warmup_per_requester: int = 4000
    issue_interval: int = 1
    issue_jitter: int = 0               # max uniform extra ns per issue
    queue_capacity: int = 16
    interleave_granularity: int = 64
    stream_offset_split: bool = True     # stream requesters get disjoint ranges
    trace_files: list = field(default_factory=list)


@dataclass
class CoherenceConfig:
    enabled: bool = False
    sf_capacity: int = 256
    victim_policy: str = "FIFO"
    invblk_max_len: int = 1
    cache_capacity: int = 256


@dataclass
class ExperimentConfig:
    seed: int = 1
    repeat: int = 1
    routing: str = "oblivious"
    output_dir: str = "out"
    normalize_base: float = 0.0          # 0 -> max link bandwidth
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    devices: DeviceLatencies = field(default_factory=DeviceLatencies)
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    coherence: CoherenceConfig = field(default_factory=CoherenceConfig)
    requester_overrides: dict = field(default_factory=dict)  # index -> fields

    def to_dict(self):
        d = asdict(self)
        d["requester_overrides"] = {str(k): v for k, v
                                    in self.requester_overrides.items()}
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, **kw)


def _expect(cond, path, msg):
    if not cond:
        raise ConfigError(f"{path}: {msg}")


def _load_section(cls, data, path):
    _expect(isinstance(data, dict), path, "must be an object")
    fields = {f.name for f in cls.__dataclass_fields__.values()}
    for key in data:
        _expect(key in fields, f"{path}.{key}", "unknown key")
    return cls(**data)


def config_from_dict(data, path="config"):
    _expect(isinstance(data, dict), path, "must be an object")
    known = {f.name for f in ExperimentConfig.__dataclass_fields__.values()}
    for key in data:
        _expect(key in known, f"{path}.{key}", "unknown key")

    cfg = ExperimentConfig(
        seed=data.get("seed", 1),
        repeat=data.get("repeat", 1),
        routing=data.get("routing", "oblivious"),
        output_dir=data.get("output_dir", "out"),
        normalize_base=data.get("normalize_base", 0.0),
        topology=_load_section(TopologyConfig, data.get("topology", {}),
                               f"{path}.topology"),
        devices=_load_section(DeviceLatencies, data.get("devices", {}),
                              f"{path}.devices"),
        workload=_load_section(WorkloadConfig, data.get("workload", {}),
                               f"{path}.workload"),
        coherence=_load_section(CoherenceConfig, data.get("coherence", {}),
                                f"{path}.coherence"),
        requester_overrides={int(k): v for k, v in
                             data.get("requester_overrides", {}).items()},
    )
    validate(cfg, path)
    return cfg


def validate(cfg, path="config"):
    t, w, c = cfg.topology, cfg.workload, cfg.coherence
    _expect(cfg.routing in ("oblivious", "adaptive"), f"{path}.routing",
            f"must be oblivious or adaptive, got {cfg.routing!r}")
    _expect(cfg.repeat >= 1, f"{path}.repeat", "must be >= 1")
    if not t.links:
        _expect(t.preset in TOPOLOGY_KINDS, f"{path}.topology.preset",
                f"must be one of {TOPOLOGY_KINDS}, got {t.preset!r}")
        _expect(t.n_requesters >= 1, f"{path}.topology.n_requesters", "must be >= 1")
        _expect(t.n_endpoints >= 1, f"{path}.topology.n_endpoints", "must be >= 1")
    _expect(t.link_bandwidth > 0, f"{path}.topology.link_bandwidth", "must be > 0")
    _expect(t.duplex in ("full", "half"), f"{path}.topology.duplex",
            f"must be full or half, got {t.duplex!r}")
    _expect(t.header_overhead >= 0, f"{path}.topology.header_overhead",
            "must be >= 0")
    _expect(w.pattern in PATTERNS, f"{path}.workload.pattern",
            f"must be one of {PATTERNS}, got {w.pattern!r}")
    for name in ("hot_fraction", "hot_prob", "read_ratio"):
        v = getattr(w, name)
        _expect(0.0 <= v <= 1.0, f"{path}.workload.{name}",
                f"must be in [0,1], got {v}")
    _expect(w.issue_interval >= 0, f"{path}.workload.issue_interval", "must be >= 0")
    _expect(w.issue_jitter >= 0, f"{path}.workload.issue_jitter", "must be >= 0")
    _expect(w.queue_capacity >= 1, f"{path}.workload.queue_capacity", "must be >= 1")
    _expect(w.footprint_bytes >= 64, f"{path}.workload.footprint_bytes",
            "must be at least one cacheline")
    _expect(c.victim_policy in POLICY_NAMES, f"{path}.coherence.victim_policy",
            f"must be one of {POLICY_NAMES}, got {c.victim_policy!r}")
    _expect(1 <= c.invblk_max_len <= 4, f"{path}.coherence.invblk_max_len",
            "must be in [1,4]")
    if c.enabled:
        _expect(c.sf_capacity >= 1, f"{path}.coherence.sf_capacity", "must be >= 1")
        _expect(c.cache_capacity >= 1, f"{path}.coherence.cache_capacity",
                "must be >= 1")
    if w.pattern == "trace":
        _expect(len(w.trace_files) >= 1, f"{path}.workload.trace_files",
                "trace pattern needs at least one trace file")
    # the topology itself must generate cleanly
    try:
        t.build(propagation=cfg.devices.bus_propagation)
    except TopologyError as e:
        raise ConfigError(f"{path}.topology: {e}") from e
    return cfg


def load_config(path):
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e
    return config_from_dict(data)


def save_config(cfg, path):
    with open(path, "w") as f:
        f.write(cfg.to_json())
        f.write("\n")
