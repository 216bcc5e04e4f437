"""Device layer: packets, duplex buses, PBR switches, requesters, and
memory endpoints.

Packet size model: data-bearing packets (write requests, read responses,
dirty back-invalidate responses) carry the 64 B cacheline payload;
header-only packets (read requests, write acks, snoops, clean snoop
responses) cost the configured header size, a ratio of the payload
length.  A link traversal charges serialization + propagation + one port
delay at each end; switch traversal charges switching time and one hop.
"""

import math
from dataclasses import dataclass, field

CACHELINE = 64

# packet kinds
MEM_RD = "MemRd"
MEM_WR = "MemWr"
RD_RESP = "RdResp"
WR_RESP = "WrResp"
BI_SNP = "BISnp"
BI_RSP = "BIRsp"
ERR_RESP = "ErrResp"

DATA_KINDS = (MEM_WR, RD_RESP)          # BIRsp carries data only when dirty

# ledger stage tags
ST_REQUESTER = "requester"
ST_CACHE = "cache"
ST_QUEUING = "queuing"
ST_SWITCHING = "switching"
ST_BUS = "bus"
ST_PORT = "port"
ST_ENDPOINT = "endpoint"
STAGES = (ST_QUEUING, ST_SWITCHING, ST_BUS, ST_PORT, ST_ENDPOINT,
          ST_CACHE, ST_REQUESTER)


class RoutingFault(Exception):
    """A switch saw a destination absent from its routing table."""


class Packet:
    __slots__ = ("kind", "address", "payload_bytes", "header_bytes", "src",
                 "dst", "hop_count", "req_hops", "ledger", "block_len",
                 "issued_at", "completed_at", "measured", "req_id", "dirty",
                 "snoop_hit", "inval_wait")

    def __init__(self, kind, address, src, dst, header_bytes=0,
                 payload_bytes=0, block_len=1, measured=False, req_id=-1):
        self.kind = kind
        self.address = address
        self.src = src
        self.dst = dst
        self.header_bytes = header_bytes
        self.payload_bytes = payload_bytes
        self.block_len = block_len
        self.hop_count = 0
        self.ledger = {}            # stage tag -> accumulated ns
        self.issued_at = -1
        self.completed_at = -1
        self.measured = measured
        self.req_id = req_id
        self.dirty = False
        self.snoop_hit = False
        self.req_hops = 0
        self.inval_wait = 0

    @property
    def size_bytes(self):
        return self.header_bytes + self.payload_bytes

    def charge(self, stage, ns):
        if ns:
            self.ledger[stage] = self.ledger.get(stage, 0) + ns

    def latency(self):
        return self.completed_at - self.issued_at


def make_packet(kind, address, src, dst, header_bytes, **kw):
    """Build a packet with the size conventions above."""
    payload = CACHELINE if kind in DATA_KINDS else 0
    hdr = 0 if payload else header_bytes
    return Packet(kind, address, src, dst, header_bytes=hdr,
                  payload_bytes=payload, **kw)


class Bus:
    """One physical link (or shared multi-drop bus) with per-direction
    bandwidth allocation.

    Full duplex: the two directions never block each other.  Half duplex:
    a single channel shared by both directions, with an optional
    turnaround penalty when the active direction flips.
    """

    def __init__(self, spec, port_delay=25, name=""):
        self.spec = spec
        self.port_delay = port_delay
        self.name = name
        self.busy_until = [0, 0]          # per direction; [0] reused for half
        self.last_dir = None
        self.recording = False
        self.busy_accum = [0, 0]
        self.payload_accum = [0, 0]

    def serialization(self, nbytes):
        return math.ceil(nbytes / self.spec.bandwidth) if nbytes else 0

    def backlog_bytes(self, direction, now):
        busy = self.busy_until[0] if self.spec.duplex == "half" \
            else self.busy_until[direction]
        return max(0, busy - now) * self.spec.bandwidth

    def transmit(self, packet, direction, now):
        """Claim the channel; returns (delivery_time, wait_ns).

        wait is queuing (channel busy + turnaround); serialization and
        propagation are charged to the bus stage, port delays to the port
        stage, on the packet's ledger.
        """
        ser = self.serialization(packet.size_bytes)
        if self.spec.duplex == "half":
            start = max(now, self.busy_until[0])
            if ser and self.last_dir is not None and self.last_dir != direction:
                start += self.spec.turnaround
            if ser:
                self.busy_until[0] = start + ser
                self.last_dir = direction
        else:
            start = max(now, self.busy_until[direction])
            if ser:
                self.busy_until[direction] = start + ser
        if self.recording and ser:
            self.busy_accum[direction] += ser
            self.payload_accum[direction] += self.serialization(packet.payload_bytes)
        wait = start - now
        packet.charge(ST_QUEUING, wait)
        packet.charge(ST_BUS, ser + self.spec.propagation)
        packet.charge(ST_PORT, 2 * self.port_delay)
        delivery = start + ser + self.spec.propagation + 2 * self.port_delay
        return delivery, wait

    def reset_accumulators(self):
        self.busy_accum = [0, 0]
        self.payload_accum = [0, 0]


@dataclass
class RoutingTable:
    """Per-switch map: destination edge port -> candidate next-hop nodes
    (all on minimum-hop paths), sorted by node id."""
    candidates: dict = field(default_factory=dict)

    def next_hops(self, dst_port):
        try:
            return self.candidates[dst_port]
        except KeyError:
            raise RoutingFault(f"no route for destination port {dst_port}")


class Switch:
    """Port-based-routing switch with oblivious or adaptive forwarding."""

    def __init__(self, sim, node, table, switching_time=20, strategy="oblivious"):
        self.sim = sim
        self.node = node
        self.table = table
        self.switching_time = switching_time
        self.strategy = strategy
        self._rr = {}                   # (src,dst) -> round robin cursor

    def forward(self, packet):
        """Pick the egress neighbor and relay after the switching delay."""
        cands = self.table.next_hops(packet.dst)
        if len(cands) == 1 or self.strategy == "oblivious":
            nxt = cands[0]
        else:
            now = self.sim.loop.now
            occ = []
            for nb in cands:
                bus, direction = self.sim.bus_for(self.node, nb)
                occ.append((bus.backlog_bytes(direction, now), nb))
            best = min(o for o, _ in occ)
            tied = [nb for o, nb in occ if o == best]
            if len(tied) == 1:
                nxt = tied[0]
            else:
                key = (packet.src, packet.dst)
                cur = self._rr.get(key, 0)
                nxt = tied[cur % len(tied)]
                self._rr[key] = cur + 1
        packet.hop_count += 1
        packet.charge(ST_SWITCHING, self.switching_time)
        self.sim.loop.schedule_in(
            self.switching_time,
            lambda p=packet, n=nxt: self.sim.hop(p, self.node, n),
            target=f"sw{self.node}")


@dataclass
class InterleavePolicy:
    granularity: int = CACHELINE      # bytes, power of two
    endpoint_ports: list = field(default_factory=list)

    def __post_init__(self):
        if self.granularity & (self.granularity - 1):
            raise ValueError("interleave granularity must be a power of two")

    def endpoint_for(self, address):
        return self.endpoint_ports[(address // self.granularity)
                                   % len(self.endpoint_ports)]


class Requester:
    """Computational component: request queue + interleaving + optional
    local cache.

    Issues at most one request per issue interval, with at most
    queue_capacity packets in flight; cache hits complete locally.  The
    warm-up boundary pauses the stream so the harness can drain the
    system and open the measurement window.
    """

    def __init__(self, sim, node, port, stream, interleave, queue_capacity=16,
                 issue_interval=0, issue_jitter=0, jitter_rng=None,
                 process_time=10, cache=None, header_bytes=0):
        self.sim = sim
        self.node = node
        self.port = port
        self.stream = stream
        self.interleave = interleave
        self.queue_capacity = queue_capacity
        self.issue_interval = max(1, issue_interval)
        self.issue_jitter = issue_jitter
        self.jitter_rng = jitter_rng
        self.process_time = process_time
        self.cache = cache
        self.header_bytes = header_bytes
        self.in_flight = 0
        self.next_allowed = 0
        self.paused = False
        self.completed = []            # measured request packets
        self.error_count = 0
        self._req_seq = 0
        self._tick_queued = False

    # -- issue side ----------------------------------------------------

    def start(self):
        self._queue_tick(0)

    def _queue_tick(self, at):
        if not self._tick_queued:
            self._tick_queued = True
            self.sim.loop.schedule(max(at, self.sim.loop.now), self.tick,
                                   target=f"req{self.node}")

    def tick(self):
        self._tick_queued = False
        if self.paused or not self.stream.has_next():
            return
        now = self.sim.loop.now
        if now < self.next_allowed:
            self._queue_tick(self.next_allowed)
            return
        if self.in_flight >= self.queue_capacity:
            return                      # woken by the next response
        if (not self.stream.is_warmup(self.stream._emitted)
                and not self.sim.measuring):
            self.paused = True
            self.sim.notify_warmup_done(self)
            return

        op, addr, measured = self.stream.next_request()
        kind = MEM_RD if op == "R" else MEM_WR
        pkt = make_packet(kind, addr, self.port,
                          self.interleave.endpoint_for(addr),
                          self.header_bytes, measured=measured,
                          req_id=self._req_seq)
        self._req_seq += 1
        pkt.issued_at = now
        pkt.charge(ST_REQUESTER, self.process_time)
        t = now + self.process_time
        gap = self.issue_interval
        if self.issue_jitter:
            gap += self.jitter_rng.randrange(self.issue_jitter + 1)
        self.next_allowed = now + gap

        if self.cache is not None:
            start = max(t, self.cache.busy_until)
            end = start + self.cache.access_time
            self.cache.busy_until = end
            pkt.charge(ST_CACHE, end - t)
            hit, _evicted = self.cache.access(addr, kind == MEM_WR)
            if hit:
                self.sim.loop.schedule(end, lambda p=pkt: self._complete(p),
                                       target=f"req{self.node}")
            else:
                self.in_flight += 1
                self.sim.loop.schedule(
                    end, lambda p=pkt: self.sim.inject(p, self.node),
                    target=f"req{self.node}")
        else:
            self.in_flight += 1
            self.sim.loop.schedule(t, lambda p=pkt: self.sim.inject(p, self.node),
                                   target=f"req{self.node}")
        if self.stream.has_next():
            self._queue_tick(self.next_allowed)

    def resume(self):
        self.paused = False
        self.next_allowed = max(self.next_allowed, self.sim.loop.now)
        self._queue_tick(self.next_allowed)

    # -- receive side --------------------------------------------------

    def on_packet(self, pkt):
        if pkt.kind in (RD_RESP, WR_RESP, ERR_RESP):
            if pkt.kind == ERR_RESP:
                self.error_count += 1
            self.in_flight -= 1
            self._complete(pkt)
            self._queue_tick(self.next_allowed)
        elif pkt.kind == BI_SNP:
            self._serve_bisnp(pkt)
        else:
            raise RoutingFault(f"requester {self.node} got a {pkt.kind} packet")

    def _complete(self, pkt):
        pkt.completed_at = self.sim.loop.now
        if pkt.measured:
            self.completed.append(pkt)
        self.sim.on_request_complete(pkt)

    def _serve_bisnp(self, snp):
        """Invalidate block_len contiguous lines; one response per line,
        each lookup serialized on the cache port."""
        now = self.sim.loop.now
        t = now
        for i in range(snp.block_len):
            addr = snp.address + i * CACHELINE
            if self.cache is not None:
                start = max(t, self.cache.busy_until)
                t = start + self.cache.access_time
                self.cache.busy_until = t
                present, dirty = self.cache.snoop_invalidate(addr)
            else:
                present, dirty = False, False
            rsp = make_packet(BI_RSP, addr, self.port, snp.src,
                              self.header_bytes)
            rsp.issued_at = now
            rsp.dirty = dirty
            rsp.snoop_hit = present
            if dirty:
                rsp.payload_bytes = CACHELINE
                rsp.header_bytes = 0
            self.sim.loop.schedule(
                t, lambda p=rsp: self.sim.inject(p, self.node),
                target=f"req{self.node}")


class MemoryEndpoint:
    """Memory device; with a snoop filter attached it is an HDM-DB device
    (device-managed coherence), without one an HDM-H device.

    The controller pipeline is fully concurrent: each request costs
    controller time + access latency independently.  Snoop-filter
    evictions serialize: while one back-invalidation is in flight, later
    coherent arrivals queue.
    """

    def __init__(self, sim, node, port, controller_time=40, access_latency=50,
                 dcoh=None, capacity_bytes=None, header_bytes=0,
                 writeback_latency=None):
        self.sim = sim
        self.node = node
        self.port = port
        self.controller_time = controller_time
        self.access_latency = access_latency
        self.dcoh = dcoh
        self.capacity_bytes = capacity_bytes
        self.header_bytes = header_bytes
        self.writeback_latency = (access_latency if writeback_latency is None
                                  else writeback_latency)
        self.fault_count = 0
        self.sf_stalled = False
        self._deferred = []
        self._pending = None           # active eviction transaction

    def on_packet(self, pkt):
        if pkt.kind in (MEM_RD, MEM_WR):
            self._admit(pkt)
        elif pkt.kind == BI_RSP:
            self._on_birsp(pkt)
        else:
            raise RoutingFault(f"endpoint {self.node} got a {pkt.kind} packet")

    def _admit(self, pkt):
        pkt.req_hops = pkt.hop_count
        if (self.capacity_bytes is not None
                and pkt.address + CACHELINE > self.capacity_bytes):
            self.fault_count += 1
            self._respond(pkt, error=True)
            return
        coherent = (self.dcoh is not None
                    and self.sim.requester_has_cache(pkt.src))
        if not coherent:
            self._serve(pkt)
            return
        if self.sf_stalled:
            self._deferred.append(pkt)
            return
        plan = self.dcoh.on_request(pkt.address, pkt.src,
                                    is_write=pkt.kind == MEM_WR)
        if plan.proceed:
            self._serve(pkt)
        else:
            self._start_eviction(pkt, plan)

    def _start_eviction(self, pkt, plan):
        self.sf_stalled = True
        remaining = {a for _, addrs in plan.bisnp for a in addrs}
        self._pending = {"pkt": pkt, "plan": plan, "remaining": remaining,
                         "dirty": 0, "t0": self.sim.loop.now}
        for owner, addrs in plan.bisnp:
            snp = make_packet(BI_SNP, addrs[0], self.port, owner,
                              self.header_bytes, block_len=len(addrs))
            snp.issued_at = self.sim.loop.now
            self.sim.inject(snp, self.node)

    def _on_birsp(self, rsp):
        tx = self._pending
        if tx is None:
            raise RoutingFault(f"endpoint {self.node}: stray BIRsp")
        cleared = self.dcoh.on_birsp(rsp.address, rsp.src,
                                     rsp.snoop_hit, rsp.dirty)
        if rsp.dirty:
            tx["dirty"] += 1
        if cleared:
            tx["remaining"].discard(rsp.address)
        if tx["remaining"]:
            return
        # dirty lines write back before the blocked request proceeds
        delay = tx["dirty"] * self.writeback_latency
        self.sim.loop.schedule_in(delay, self._finish_eviction,
                                  target=f"ep{self.node}")

    def _finish_eviction(self):
        tx = self._pending
        self._pending = None
        pkt = tx["pkt"]
        self.dcoh.allocate(pkt.address, pkt.src, pkt.kind == MEM_WR)
        wait = self.sim.loop.now - tx["t0"]
        pkt.inval_wait = wait
        pkt.charge(ST_ENDPOINT, wait)
        self._serve(pkt)
        self.sf_stalled = False
        while self._deferred and not self.sf_stalled:
            self._admit(self._deferred.pop(0))

    def _serve(self, pkt):
        service = self.controller_time + self.access_latency
        pkt.charge(ST_ENDPOINT, service)
        self.sim.loop.schedule_in(service, lambda p=pkt: self._respond(p),
                                  target=f"ep{self.node}")

    def _respond(self, pkt, error=False):
        """Turn the request packet around; the ledger keeps accumulating
        so the full round trip decomposes on one object."""
        if error:
            pkt.kind = ERR_RESP
        else:
            pkt.kind = RD_RESP if pkt.kind == MEM_RD else WR_RESP
        pkt.src, pkt.dst = self.port, pkt.src
        if pkt.kind == RD_RESP:
            pkt.payload_bytes = CACHELINE
            pkt.header_bytes = 0
        else:
            pkt.payload_bytes = 0
            pkt.header_bytes = self.header_bytes
        self.sim.inject(pkt, self.node)
