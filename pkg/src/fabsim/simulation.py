"""Simulation harness: wires the topology, devices, and workload into one
event loop and runs the warm-up + measurement protocol.

Measurement protocol: every requester first issues its warm-up quota;
the harness waits until the whole system drains, then opens the
measurement window, resets all bus accumulators, and lets the measured
requests run from the independent RNG stream.  The window closes at the
last measured completion.
"""

from . import topology as topo
from .config import ExperimentConfig
from .coherence import LocalCache, SnoopFilter, VictimPolicy
from .devices import (
    CACHELINE, MEM_RD, MEM_WR, Bus, InterleavePolicy, MemoryEndpoint,
    Packet, Requester, RoutingFault, RoutingTable, Switch,
)
from .engine import EventLoop, make_rng
from .workload import PatternSpec, RequestStream, load_trace


class Simulation:
    def __init__(self, cfg: ExperimentConfig, seed=None, trace_events=False):
        self.cfg = cfg
        self.seed = cfg.seed if seed is None else seed
        self.loop = EventLoop(trace=trace_events)
        self.measuring = False
        self.measurement_start = 0
        self.last_completion = 0
        self.completed_measured = 0
        self._warm_done = 0

        dev = cfg.devices
        roles, links = cfg.topology.build(propagation=dev.bus_propagation)
        self.graph = topo.build_graph(roles, links)
        g = self.graph

        self.header_bytes = round(cfg.topology.header_overhead * CACHELINE)

        # one bus per link; hub stubs share the hub's bus
        self.link_bus = {}
        self.hub_bus = {}
        for l in g.links:
            key = (min(l.a, l.b), max(l.a, l.b))
            hub = None
            if g.roles[l.a] == topo.ROLE_BUS_HUB:
                hub = l.a
            elif g.roles[l.b] == topo.ROLE_BUS_HUB:
                hub = l.b
            if hub is not None:
                if hub not in self.hub_bus:
                    self.hub_bus[hub] = Bus(l, dev.port_delay, name=f"bus{hub}")
                self.link_bus[key] = self.hub_bus[hub]
            else:
                self.link_bus[key] = Bus(l, dev.port_delay,
                                         name=f"link{key[0]}-{key[1]}")

        self._build_switches()
        self._build_endpoints()
        self._build_requesters()

    # -- construction --------------------------------------------------

    def _build_switches(self):
        g, dev = self.graph, self.cfg.devices
        dists = {t: self._bfs_dist(t) for t in g.terminals()}
        self.switches = {}
        for node, role in g.roles.items():
            if role != topo.ROLE_SWITCH:
                continue
            cands = {}
            for t, dist in dists.items():
                if t not in g.edge_port_map:
                    continue
                port = g.edge_port_map[t]
                if node not in dist:
                    raise RoutingFault(f"switch {node} cannot reach port {port}")
                nh = [nb for nb, _ in g.adj[node]
                      if nb in dist and dist[nb] == dist[node] - 1]
                cands[port] = sorted(nh)
            self.switches[node] = Switch(self, node, RoutingTable(cands),
                                         dev.switching, self.cfg.routing)

    def _bfs_dist(self, term):
        """Link distance to `term`, expanding through transit nodes only."""
        g = self.graph
        dist = {term: 0}
        frontier = [term]
        while frontier:
            nxt = []
            for v in frontier:
                if v != term and g.roles[v] in topo.TERMINAL_ROLES:
                    continue
                for nb, _ in g.adj[v]:
                    if nb not in dist:
                        dist[nb] = dist[v] + 1
                        nxt.append(nb)
            frontier = nxt
        return dist

    def _build_endpoints(self):
        g, dev, coh = self.graph, self.cfg.devices, self.cfg.coherence
        self.endpoints = {}
        for node in g.endpoints():
            dcoh = None
            if coh.enabled:
                policy = VictimPolicy(coh.victim_policy,
                                      max_block_len=coh.invblk_max_len)
                dcoh = SnoopFilter(coh.sf_capacity, policy)
            self.endpoints[node] = MemoryEndpoint(
                self, node, g.edge_port_map[node],
                controller_time=dev.controller,
                access_latency=dev.memory_access,
                dcoh=dcoh, header_bytes=self.header_bytes)

    def _build_requesters(self):
        g, w, coh = self.graph, self.cfg.workload, self.cfg.coherence
        ep_ports = [g.edge_port_map[n] for n in g.endpoints()]
        self.requesters = {}
        self._port_owner = {}
        req_nodes = g.requesters()
        for idx, node in enumerate(req_nodes):
            ov = self.cfg.requester_overrides.get(idx, {})
            pattern = ov.get("pattern", w.pattern)
            spec = PatternSpec(
                kind=pattern,
                footprint_bytes=ov.get("footprint_bytes", w.footprint_bytes),
                hot_fraction=ov.get("hot_fraction", w.hot_fraction),
                hot_prob=ov.get("hot_prob", w.hot_prob),
                read_ratio=ov.get("read_ratio", w.read_ratio),
                total_requests=ov.get("requests", w.requests_per_requester),
                warmup_requests=ov.get("warmup", w.warmup_per_requester),
            )
            trace = None
            if pattern == "trace":
                files = ov.get("trace_files", w.trace_files)
                trace, _bad = load_trace(files[idx % len(files)])
            stream = RequestStream(spec, self.seed, stream_id=idx, trace=trace)
            if pattern == "stream" and w.stream_offset_split:
                lines = spec.footprint_bytes // CACHELINE
                stream._stream_pos = (lines // len(req_nodes)) * idx
            cache = None
            if coh.enabled:
                cache = LocalCache(ov.get("cache_capacity", coh.cache_capacity),
                                   self.cfg.devices.cache_access)
            self.requesters[node] = Requester(
                self, node, g.edge_port_map[node], stream,
                InterleavePolicy(w.interleave_granularity, ep_ports),
                queue_capacity=ov.get("queue_capacity", w.queue_capacity),
                issue_interval=ov.get("issue_interval", w.issue_interval),
                issue_jitter=ov.get("issue_jitter", w.issue_jitter),
                jitter_rng=make_rng(self.seed, 5000 + idx),
                process_time=self.cfg.devices.requester_process,
                cache=cache, header_bytes=self.header_bytes)
            self._port_owner[g.edge_port_map[node]] = self.requesters[node]

    # -- fabric plumbing ----------------------------------------------

    def bus_for(self, a, b):
        key = (min(a, b), max(a, b))
        return self.link_bus[key], 0 if a < b else 1

    def inject(self, pkt, from_node):
        """Hand a packet from a terminal to its attached neighbor."""
        neighbor = self.graph.adj[from_node][0][0]
        self.hop(pkt, from_node, neighbor)

    def hop(self, pkt, cur, nxt):
        g, now = self.graph, self.loop.now
        if g.roles.get(nxt) == topo.ROLE_BUS_HUB:
            # shared bus: one transaction straight through to the target
            target = g.port_node_map[pkt.dst]
            bus = self.hub_bus[nxt]
            direction = 0 if g.roles[target] == topo.ROLE_ENDPOINT else 1
            deliver, _ = bus.transmit(pkt, direction, now)
            self.loop.schedule(deliver, lambda p=pkt, n=target: self.arrive(p, n),
                               target=f"hub{nxt}")
        else:
            bus, direction = self.bus_for(cur, nxt)
            deliver, _ = bus.transmit(pkt, direction, now)
            self.loop.schedule(deliver, lambda p=pkt, n=nxt: self.arrive(p, n),
                               target=f"link{cur}-{nxt}")

    def arrive(self, pkt, node):
        role = self.graph.roles[node]
        if role == topo.ROLE_SWITCH:
            self.switches[node].forward(pkt)
        elif role == topo.ROLE_ENDPOINT:
            self.endpoints[node].on_packet(pkt)
        else:
            self.requesters[node].on_packet(pkt)

    def requester_has_cache(self, port):
        owner = self._port_owner.get(port)
        return owner is not None and owner.cache is not None

    # -- measurement protocol ------------------------------------------

    def notify_warmup_done(self, requester):
        self._warm_done += 1

    def on_request_complete(self, pkt):
        if pkt.measured:
            self.completed_measured += 1
            if pkt.completed_at > self.last_completion:
                self.last_completion = pkt.completed_at

    def all_buses(self):
        seen, out = set(), []
        for bus in self.link_bus.values():
            if id(bus) not in seen:
                seen.add(id(bus))
                out.append(bus)
        return out

    def run(self):
        for r in self.requesters.values():
            r.start()
        self.loop.run()                 # warm-up phase drains completely
        if self._warm_done != len(self.requesters):
            raise RuntimeError("warm-up barrier incomplete: "
                               f"{self._warm_done}/{len(self.requesters)}")
        self.measuring = True
        self.measurement_start = self.loop.now
        self.last_completion = self.loop.now
        self._coh_baseline = {n: (e.dcoh.invalidation_count, e.dcoh.bisnp_sent)
                              for n, e in self.endpoints.items()
                              if e.dcoh is not None}
        for bus in self.all_buses():
            bus.reset_accumulators()
            bus.recording = True
        for r in self.requesters.values():
            r.resume()
        self.loop.run()
        for bus in self.all_buses():
            bus.recording = False
        return self

    # -- post-run accessors --------------------------------------------

    def window(self):
        return self.measurement_start, max(self.last_completion,
                                           self.measurement_start + 1)

    def measured_packets(self):
        out = []
        for node in sorted(self.requesters):
            out.extend(self.requesters[node].completed)
        return out

    def invalidation_count(self):
        """Cache invalidations observed during the measurement window."""
        total = 0
        for n, e in self.endpoints.items():
            if e.dcoh is not None:
                base = self._coh_baseline.get(n, (0, 0))[0]
                total += e.dcoh.invalidation_count - base
        return total
