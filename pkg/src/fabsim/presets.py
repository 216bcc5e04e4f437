"""Canned experiment configurations.

Each builder returns {label: ExperimentConfig}; the CLI runs every
labelled config and writes one report directory per label.  These are
the setups behind the acceptance suite: topology bandwidth scaling,
hop-latency structure, iso-bisection comparisons, adaptive-vs-oblivious
routing under noisy neighbors, snoop-filter victim policies, block
invalidation sweeps, duplex/header mixes, and trace replay.
"""

from .config import (CoherenceConfig, DeviceLatencies, ExperimentConfig,
                     TopologyConfig, WorkloadConfig)
from .topology import (ROLE_ENDPOINT, ROLE_REQUESTER, ROLE_SWITCH,
                       preset_bisection)

# a link narrow enough that serialization, not device latency, limits
# throughput: 64 B cachelines take 64 ns to serialize
LOADED_BW = 1.0


def _loaded(kind, scale, seed, requests=1500, warmup=200, routing="adaptive",
            read_ratio=1.0, header_overhead=0.0, duplex="full",
            issue_interval=1):
    n = scale // 2
    return ExperimentConfig(
        seed=seed,
        routing=routing,
        normalize_base=LOADED_BW,
        topology=TopologyConfig(preset=kind, n_requesters=n, n_endpoints=n,
                                link_bandwidth=LOADED_BW, duplex=duplex,
                                header_overhead=header_overhead),
        workload=WorkloadConfig(pattern="uniform", footprint_bytes=1 << 20,
                                read_ratio=read_ratio,
                                requests_per_requester=requests,
                                warmup_per_requester=warmup,
                                issue_interval=issue_interval),
    )


def topology_sweep(seed=1, scale=16, kinds=("chain", "tree", "ring",
                                            "spine_leaf", "fully_connected")):
    """Normalized aggregate bandwidth across fabric shapes."""
    if isinstance(kinds, str):
        kinds = (kinds,)
    return {kind: _loaded(kind, scale, seed) for kind in kinds}


# per-requester issue interval that loads each preset's bottleneck to
# about 85%: 8 requesters sharing one 64 ns/cacheline bridge
LOADED_INTERVAL = 600


def hop_latency(seed=1, scale=16):
    """Per-hop-group latency under load: chain versus ring.

    Requesters issue in phase on a long period over slow links, so each
    round of responses merges at the shared links in hop order and the
    queuing a packet sees grows with its path length instead of
    collapsing onto one saturated queue."""
    out = {}
    for kind in ("chain", "ring"):
        cfg = _loaded(kind, scale, seed, requests=500, warmup=50,
                      issue_interval=10000)
        cfg.topology.link_bandwidth = 0.0625   # 1024 ns per cacheline
        cfg.topology.terminal_bandwidth = 64.0
        out[kind] = cfg
    return out


def iso_bisection(seed=1, scale=16, kinds=("chain", "tree", "spine_leaf",
                                           "fully_connected")):
    """Same shapes with fabric link bandwidths scaled so every topology
    has the chain's bisection bandwidth; the load pattern matches the
    hop-latency study (in-phase issue over slow fabric links)."""
    if isinstance(kinds, str):
        kinds = (kinds,)
    out = {}
    n = scale // 2
    base_bw = 0.0625
    stub_bw = 64.0
    for kind in kinds:
        cfg = _loaded(kind, scale, seed, requests=400, warmup=50,
                      issue_interval=10000)
        bis = preset_bisection(kind, n, n, link_bandwidth=1.0,
                               spines=cfg.topology.spines,
                               leaf_size=cfg.topology.leaf_size,
                               tree_fanout=cfg.topology.tree_fanout,
                               terminal_bandwidth=stub_bw / base_bw)
        cfg.topology.link_bandwidth = base_bw / bis
        cfg.topology.terminal_bandwidth = stub_bw
        cfg.normalize_base = base_bw / bis
        out[kind] = cfg
    return out


def _noisy_neighbor_topology():
    """Two-spine leaf fabric: 8 noisy requesters on two leaves, one
    observed host alone on a third, 8 endpoints on the remaining two."""
    leaves = list(range(5))
    spines = [5, 6]
    roles = {s: ROLE_SWITCH for s in leaves + spines}
    links = [{"a": leaf, "b": sp} for leaf in leaves for sp in spines]
    host_of = [0] * 4 + [1] * 4 + [2] + [3] * 4 + [4] * 4
    for i, leaf in enumerate(host_of):
        node = 7 + i
        roles[node] = ROLE_REQUESTER if i < 9 else ROLE_ENDPOINT
        links.append({"a": leaf, "b": node})
    return roles, links


OBSERVED_HOST = 8      # requester index of the observed host above


def routing_noisy(seed=1, routing="adaptive", requests=1200, warmup=200):
    roles, links = _noisy_neighbor_topology()
    return {routing: ExperimentConfig(
        seed=seed,
        routing=routing,
        normalize_base=LOADED_BW,
        topology=TopologyConfig(link_bandwidth=LOADED_BW, links=links,
                                roles=roles),
        workload=WorkloadConfig(pattern="uniform", footprint_bytes=1 << 20,
                                requests_per_requester=requests,
                                warmup_per_requester=warmup),
    )}


def victim_policies(seed=1, policy="FIFO", requests=10000, warmup=6000):
    """Skewed coherent workload on a shared bus.

    The requester cache covers the whole 1000-line footprint, so the
    snoop filter (20% of the footprint) is the only capacity limit and
    every filter eviction invalidates a live cache line.  The hot set is
    sized against the filter so recency-averse policies keep it tracked."""
    return {policy: ExperimentConfig(
        seed=seed,
        normalize_base=LOADED_BW,
        topology=TopologyConfig(preset="single_bus", n_requesters=1,
                                n_endpoints=1, link_bandwidth=1e9),
        workload=WorkloadConfig(pattern="skewed", footprint_bytes=64000,
                                hot_fraction=0.032, hot_prob=0.90,
                                requests_per_requester=requests,
                                warmup_per_requester=warmup,
                                issue_interval=25),
        coherence=CoherenceConfig(enabled=True, sf_capacity=200,
                                  victim_policy=policy, cache_capacity=1000),
    )}


def invblk_sweep(seed=1, block_len=1, requests=2500, warmup=300):
    """Write streams from two requesters through one coherent endpoint;
    contiguous snoop-filter victims are invalidated in one block.

    Issue is open loop below bus saturation, so the demand bandwidth is
    set by the issue rate; block length only changes how often the
    endpoint stalls on an invalidation round trip."""
    return {f"len{block_len}": ExperimentConfig(
        seed=seed,
        normalize_base=LOADED_BW,
        topology=TopologyConfig(preset="single_bus", n_requesters=2,
                                n_endpoints=1, link_bandwidth=LOADED_BW),
        workload=WorkloadConfig(pattern="stream", footprint_bytes=64000,
                                read_ratio=0.0,
                                requests_per_requester=requests,
                                warmup_per_requester=warmup,
                                issue_interval=600),
        coherence=CoherenceConfig(enabled=True, sf_capacity=300,
                                  victim_policy="BLOCK",
                                  invblk_max_len=block_len,
                                  cache_capacity=200),
    )}


def duplex_rwmix(seed=1, read_ratio=1.0, header_overhead=0.0, duplex="full",
                 requests=1500, warmup=200):
    """Read/write mixing on a shared bus under a duplex/header setting."""
    label = f"{duplex}_r{read_ratio:g}_h{header_overhead:g}"
    return {label: ExperimentConfig(
        seed=seed,
        normalize_base=LOADED_BW,
        topology=TopologyConfig(preset="single_bus", n_requesters=4,
                                n_endpoints=4, link_bandwidth=LOADED_BW,
                                duplex=duplex,
                                header_overhead=header_overhead),
        workload=WorkloadConfig(pattern="uniform", footprint_bytes=1 << 20,
                                read_ratio=read_ratio,
                                requests_per_requester=requests,
                                warmup_per_requester=warmup),
    )}


def mix_sweep(seed=1, steps=11, **kw):
    """Mix degree 0 to 0.5 in 0.05 steps, zero header, full duplex."""
    out = {}
    for i in range(steps):
        mix = round(0.05 * i, 2)
        cfg = duplex_rwmix(seed=seed, read_ratio=1.0 - mix, **kw)
        out[f"mix{mix:g}"] = next(iter(cfg.values()))
    return out


def idle_latency(seed=1):
    """One requester, one shared bus, one endpoint, one request."""
    return {"idle": ExperimentConfig(
        seed=seed,
        topology=TopologyConfig(preset="single_bus", n_requesters=1,
                                n_endpoints=1, link_bandwidth=64.0),
        workload=WorkloadConfig(pattern="stream", footprint_bytes=64,
                                requests_per_requester=1,
                                warmup_per_requester=0, queue_capacity=1),
    )}


def loaded_latency(seed=1, intervals=(400, 200, 100, 50, 25, 10, 1)):
    """Latency versus offered load on the shared-bus system."""
    out = {}
    for iv in intervals:
        cfg = _loaded("single_bus", 8, seed)
        cfg.workload.issue_interval = iv
        out[f"interval{iv}"] = cfg
    return out


def trace_replay(seed=1, trace_files=(), requests=2000, warmup=0):
    """Replay on-disk traces on the shared-bus system."""
    files = list(trace_files)
    return {"trace": ExperimentConfig(
        seed=seed,
        normalize_base=LOADED_BW,
        topology=TopologyConfig(preset="single_bus", n_requesters=len(files),
                                n_endpoints=4, link_bandwidth=LOADED_BW),
        workload=WorkloadConfig(pattern="trace", trace_files=files,
                                requests_per_requester=requests,
                                warmup_per_requester=warmup),
    )}


PRESETS = {
    "topology_sweep": topology_sweep,
    "hop_latency": hop_latency,
    "iso_bisection": iso_bisection,
    "routing_noisy": routing_noisy,
    "victim_policies": victim_policies,
    "invblk_sweep": invblk_sweep,
    "duplex_rwmix": duplex_rwmix,
    "mix_sweep": mix_sweep,
    "idle_latency": idle_latency,
    "loaded_latency": loaded_latency,
}
