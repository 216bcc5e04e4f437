"""Measurement-window metrics and CSV reporting.

Bandwidth counts one cacheline per completed measured demand request
over the measurement window.  Latency decomposes on each packet's stage
ledger, so the per-stage means sum exactly to the mean total latency.
Bus utility is busy time over available channel time (two channels for a
full-duplex bus, one for half); transmission efficiency is payload bytes
over total bytes actually serialized.
"""

import csv
from dataclasses import dataclass, field

from .devices import CACHELINE, STAGES, ST_QUEUING

SUMMARY_COLUMNS = (
    "seed", "topology", "routing", "window_ns", "completed",
    "bandwidth_bytes_per_ns", "normalized_bandwidth", "mean_latency_ns",
    "max_latency_ns", "mean_queuing_ns", "bus_utility",
    "transmission_efficiency", "invalidations", "mean_inval_wait_ns",
)

HOPS_COLUMNS = ("hops", "count", "mean_latency_ns", "max_latency_ns") + tuple(
    f"mean_{s}_ns" for s in STAGES)

BUS_COLUMNS = ("bus", "duplex", "busy_fwd_ns", "busy_rev_ns",
               "payload_fwd_bytes_ns", "payload_rev_bytes_ns", "utility",
               "efficiency")


@dataclass
class HopGroup:
    hops: int
    count: int = 0
    total_latency: int = 0
    max_latency: int = 0
    stage_totals: dict = field(default_factory=dict)

    def add(self, pkt):
        self.count += 1
        lat = pkt.latency()
        self.total_latency += lat
        if lat > self.max_latency:
            self.max_latency = lat
        for stage, ns in pkt.ledger.items():
            self.stage_totals[stage] = self.stage_totals.get(stage, 0) + ns

    def mean_latency(self):
        return self.total_latency / self.count

    def mean_stage(self, stage):
        return self.stage_totals.get(stage, 0) / self.count


@dataclass
class RunSummary:
    seed: int
    topology: str
    routing: str
    window_ns: int
    completed: int
    bandwidth: float
    normalized_bandwidth: float
    mean_latency: float
    max_latency: int
    mean_queuing: float
    bus_utility: float
    transmission_efficiency: float
    invalidations: int
    mean_inval_wait: float
    hop_groups: dict = field(default_factory=dict)   # hops -> HopGroup
    bus_rows: list = field(default_factory=list)

    def summary_row(self):
        return [self.seed, self.topology, self.routing, self.window_ns,
                self.completed, f"{self.bandwidth:.6f}",
                f"{self.normalized_bandwidth:.6f}",
                f"{self.mean_latency:.3f}", self.max_latency,
                f"{self.mean_queuing:.3f}", f"{self.bus_utility:.6f}",
                f"{self.transmission_efficiency:.6f}", self.invalidations,
                f"{self.mean_inval_wait:.3f}"]


def ledger_total(pkt):
    return sum(pkt.ledger.values())


def summarize(sim):
    """Collapse a finished simulation into a RunSummary."""
    cfg = sim.cfg
    t0, t1 = sim.window()
    window = t1 - t0
    packets = sim.measured_packets()
    completed = len(packets)

    bandwidth = CACHELINE * completed / window
    base = cfg.normalize_base
    if base <= 0:
        base = max(l.bandwidth for l in sim.graph.links)

    groups = {}
    total_lat = 0
    max_lat = 0
    total_q = 0
    total_wait = 0
    for p in packets:
        lat = p.latency()
        total_lat += lat
        if lat > max_lat:
            max_lat = lat
        total_q += p.ledger.get(ST_QUEUING, 0)
        total_wait += p.inval_wait
        g = groups.get(p.req_hops)
        if g is None:
            g = groups[p.req_hops] = HopGroup(p.req_hops)
        g.add(p)

    busy = [0, 0]
    payload = [0, 0]
    channel_time = 0
    bus_rows = []
    for bus in sim.all_buses():
        n_chan = 1 if bus.spec.duplex == "half" else 2
        channel_time += n_chan * window
        busy[0] += bus.busy_accum[0]
        busy[1] += bus.busy_accum[1]
        payload[0] += bus.payload_accum[0]
        payload[1] += bus.payload_accum[1]
        b_tot = sum(bus.busy_accum)
        p_tot = sum(bus.payload_accum)
        bus_rows.append([bus.name, bus.spec.duplex,
                         bus.busy_accum[0], bus.busy_accum[1],
                         bus.payload_accum[0], bus.payload_accum[1],
                         f"{b_tot / (n_chan * window):.6f}",
                         f"{(p_tot / b_tot):.6f}" if b_tot else ""])

    busy_total = busy[0] + busy[1]
    utility = busy_total / channel_time if channel_time else 0.0
    efficiency = ((payload[0] + payload[1]) / busy_total) if busy_total else 0.0

    return RunSummary(
        seed=sim.seed,
        topology=cfg.topology.preset if not cfg.topology.links else "custom",
        routing=cfg.routing,
        window_ns=window,
        completed=completed,
        bandwidth=bandwidth,
        normalized_bandwidth=bandwidth / base,
        mean_latency=total_lat / completed if completed else 0.0,
        max_latency=max_lat,
        mean_queuing=total_q / completed if completed else 0.0,
        bus_utility=utility,
        transmission_efficiency=efficiency,
        invalidations=(sim.invalidation_count()
                       if cfg.coherence.enabled else 0),
        mean_inval_wait=total_wait / completed if completed else 0.0,
        hop_groups=groups,
        bus_rows=bus_rows,
    )


def hops_rows(summary):
    rows = []
    for hops in sorted(summary.hop_groups):
        g = summary.hop_groups[hops]
        row = [hops, g.count, f"{g.mean_latency():.3f}", g.max_latency]
        row += [f"{g.mean_stage(s):.3f}" for s in STAGES]
        rows.append(row)
    return rows


def write_csv(path, columns, rows):
    """Deterministic CSV: fixed column order, '\\n' line endings."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)


def write_reports(out_dir, summaries):
    """Write summary.csv, latency_by_hops.csv, bus_stats.csv for a list
    of RunSummary objects (one per seed/repeat)."""
    import os
    os.makedirs(out_dir, exist_ok=True)
    write_csv(os.path.join(out_dir, "summary.csv"), SUMMARY_COLUMNS,
              [s.summary_row() for s in summaries])
    hrows = []
    for s in summaries:
        for row in hops_rows(s):
            hrows.append([s.seed] + row)
    write_csv(os.path.join(out_dir, "latency_by_hops.csv"),
              ("seed",) + HOPS_COLUMNS, hrows)
    brows = []
    for s in summaries:
        for row in s.bus_rows:
            brows.append([s.seed] + row)
    write_csv(os.path.join(out_dir, "bus_stats.csv"),
              ("seed",) + BUS_COLUMNS, brows)


def pearson(xs, ys):
    n = len(xs)
    if n != len(ys) or n < 2:
        raise ValueError("need two equal-length series of length >= 2")
    mx = sum(xs) / n
    my = sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        return 0.0
    return sxy / (sxx * syy) ** 0.5
