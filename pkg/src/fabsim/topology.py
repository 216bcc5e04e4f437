"""Interconnect layer: topology graph, routing, preset generators.

Nodes are requesters, switches, memory endpoints, or shared-bus hubs.
Terminals (requesters/endpoints) have degree exactly 1 and receive a
12-bit edge-port ID.  Links carry bandwidth (bytes/ns), a propagation
delay, and duplex settings; the device layer binds one bus per link (or
one shared bus per hub).  Routing is minimum-hop where a hop is a switch
traversal; all equal-cost routes are kept for adaptive forwarding and the
lexicographically smallest is the static (oblivious) default.
"""

from dataclasses import dataclass, field
from itertools import combinations

MAX_EDGE_PORTS = 4096

ROLE_REQUESTER = "requester"
ROLE_SWITCH = "switch"
ROLE_ENDPOINT = "endpoint"
ROLE_BUS_HUB = "bus_hub"

TERMINAL_ROLES = (ROLE_REQUESTER, ROLE_ENDPOINT)


class TopologyError(Exception):
    """Invalid topology configuration."""


@dataclass(frozen=True)
class LinkSpec:
    a: int
    b: int
    bandwidth: float = 64.0          # bytes per ns
    propagation: int = 1             # ns
    duplex: str = "full"             # "full" or "half"
    turnaround: int = 0              # ns, half-duplex direction flip
    header_overhead: float = 0.0     # header bytes / payload bytes

    def __post_init__(self):
        if self.a == self.b:
            raise TopologyError(f"link connects node {self.a} to itself")
        if self.bandwidth <= 0:
            raise TopologyError(f"link ({self.a},{self.b}): bandwidth must be > 0")
        if self.duplex not in ("full", "half"):
            raise TopologyError(f"link ({self.a},{self.b}): bad duplex {self.duplex!r}")

    def scaled(self, factor):
        return LinkSpec(self.a, self.b, self.bandwidth * factor, self.propagation,
                        self.duplex, self.turnaround, self.header_overhead)


@dataclass
class Route:
    """Node path from a source terminal to a destination terminal."""
    nodes: list
    hop_count: int = 0               # number of switch traversals

    def __post_init__(self):
        if len(set(self.nodes)) != len(self.nodes):
            raise TopologyError("route contains a loop")


@dataclass
class TopologyGraph:
    roles: dict                      # node id -> role
    links: list                      # list of LinkSpec
    adj: dict = field(default_factory=dict)        # node -> [(neighbor, LinkSpec)]
    edge_port_map: dict = field(default_factory=dict)   # terminal node -> port id
    port_node_map: dict = field(default_factory=dict)   # port id -> terminal node

    def terminals(self, role=None):
        return sorted(n for n, r in self.roles.items()
                      if (r in TERMINAL_ROLES if role is None else r == role))

    def requesters(self):
        return self.terminals(ROLE_REQUESTER)

    def endpoints(self):
        return self.terminals(ROLE_ENDPOINT)

    def link_between(self, a, b):
        for n, l in self.adj[a]:
            if n == b:
                return l
        raise TopologyError(f"no link between {a} and {b}")


def build_graph(roles, links, max_switch_ports=None):
    """Validate and index a topology.

    Node ids must be dense 0..n-1.  Terminals must have degree 1 and
    attach to a switch or bus hub (or, for a two-node system, directly to
    one other terminal).  Edge ports are assigned to terminals in
    ascending node-id order.
    """
    if not links:
        raise TopologyError("empty link list")
    n = len(roles)
    if sorted(roles) != list(range(n)):
        raise TopologyError("node ids must be dense 0..n-1")

    adj = {node: [] for node in roles}
    seen = set()
    for l in links:
        if l.a not in roles or l.b not in roles:
            missing = l.a if l.a not in roles else l.b
            raise TopologyError(f"link references unknown node {missing}")
        key = (min(l.a, l.b), max(l.a, l.b))
        if key in seen:
            raise TopologyError(f"duplicate link between {key[0]} and {key[1]}")
        seen.add(key)
        adj[l.a].append((l.b, l))
        adj[l.b].append((l.a, l))
    for node in adj:
        adj[node].sort(key=lambda t: t[0])

    # connectivity
    stack, visited = [next(iter(roles))], set()
    while stack:
        v = stack.pop()
        if v in visited:
            continue
        visited.add(v)
        stack.extend(nb for nb, _ in adj[v])
    if len(visited) != n:
        orphan = min(set(roles) - visited)
        raise TopologyError(f"graph is disconnected: node {orphan} unreachable")

    for node, role in sorted(roles.items()):
        deg = len(adj[node])
        if role in TERMINAL_ROLES:
            if deg != 1:
                raise TopologyError(f"terminal node {node} has degree {deg}, expected 1")
        elif role == ROLE_SWITCH:
            if max_switch_ports is not None and deg > max_switch_ports:
                raise TopologyError(
                    f"switch {node} uses {deg} ports, budget is {max_switch_ports}")
        elif role == ROLE_BUS_HUB:
            for nb, _ in adj[node]:
                if roles[nb] not in TERMINAL_ROLES:
                    raise TopologyError(
                        f"bus hub {node} may only attach terminals, not node {nb}")
        else:
            raise TopologyError(f"node {node}: unknown role {role!r}")

    terms = sorted(node for node, r in roles.items() if r in TERMINAL_ROLES)
    if len(terms) > MAX_EDGE_PORTS:
        raise TopologyError(f"{len(terms)} edge ports exceed the {MAX_EDGE_PORTS} limit")
    edge_port_map = {node: i for i, node in enumerate(terms)}
    port_node_map = {i: node for node, i in edge_port_map.items()}

    return TopologyGraph(dict(roles), list(links), adj, edge_port_map, port_node_map)


def shortest_routes(g):
    """All minimum-hop routes for every ordered edge-port pair.

    Returns {(src_port, dst_port): [Route, ...]} with routes sorted
    lexicographically by node sequence.  Terminals never appear as
    transit nodes; hop counts are switch traversals only.
    """
    table = {}
    terms = g.terminals()
    for src in terms:
        preds = _bfs_shortest_dag(g, src)
        for dst in terms:
            if dst == src:
                continue
            paths = sorted(_unwind(preds, src, dst))
            routes = [
                Route(p, hop_count=sum(1 for v in p if g.roles[v] == ROLE_SWITCH))
                for p in paths
            ]
            table[(g.edge_port_map[src], g.edge_port_map[dst])] = routes
    return table


def _bfs_shortest_dag(g, src):
    """BFS predecessor sets over transit (non-terminal) nodes."""
    dist = {src: 0}
    preds = {src: []}
    frontier = [src]
    while frontier:
        nxt = []
        for v in frontier:
            if v != src and g.roles[v] in TERMINAL_ROLES:
                continue      # terminals do not forward
            for nb, _ in g.adj[v]:
                d = dist[v] + 1
                if nb not in dist:
                    dist[nb] = d
                    preds[nb] = [v]
                    nxt.append(nb)
                elif dist[nb] == d:
                    preds[nb].append(v)
        frontier = nxt
    return preds


def _unwind(preds, src, dst):
    if dst not in preds:
        raise TopologyError(f"no route from {src} to {dst}")
    if dst == src:
        return [[src]]
    out = []
    for p in preds[dst]:
        for path in _unwind(preds, src, p):
            out.append(path + [dst])
    return out


def make_topology(kind, n_requesters, n_endpoints, link_bandwidth=64.0,
                  propagation=1, duplex="full", turnaround=0,
                  header_overhead=0.0, tree_fanout=2, spines=2,
                  leaf_size=4, terminal_bandwidth=0.0):
    """Generate (roles, links) for a preset topology.

    Terminals are grouped: requesters occupy the low-id attachment
    points, endpoints the high-id ones, so shared "bridge" routes carry
    all requester-to-endpoint traffic (the bottleneck the chain/tree
    presets are meant to exhibit).

    kinds: chain, tree, ring, spine_leaf, fully_connected, single_bus.
    """
    if n_requesters < 1 or n_endpoints < 1:
        raise TopologyError("need at least one requester and one endpoint")

    def lk(a, b, bw=None):
        return LinkSpec(a, b, link_bandwidth if bw is None else bw, propagation,
                        duplex, turnaround, header_overhead)

    roles = {}
    links = []
    n_term = n_requesters + n_endpoints
    stub_bw = terminal_bandwidth or link_bandwidth

    def add_terminals(attach_points):
        """attach_points[i] is the node hosting terminal i (R first, then E)."""
        if len(attach_points) != n_term:
            raise TopologyError("internal: attachment count mismatch")
        for i, sw in enumerate(attach_points):
            t = len(roles)
            roles[t] = ROLE_REQUESTER if i < n_requesters else ROLE_ENDPOINT
            links.append(lk(sw, t, stub_bw))

    if kind in ("chain", "ring"):
        # one switch per terminal, in a line; requesters on the left half
        for s in range(n_term):
            roles[s] = ROLE_SWITCH
        for s in range(n_term - 1):
            links.append(lk(s, s + 1))
        if kind == "ring":
            if n_term < 3:
                raise TopologyError("ring needs at least 3 switches")
            links.append(lk(n_term - 1, 0))
        add_terminals(list(range(n_term)))

    elif kind == "tree":
        if tree_fanout < 2:
            raise TopologyError("tree fanout must be >= 2")
        # two switch heaps bridged at their roots; terminal i sits on
        # switch i of its side, so hop counts vary with heap depth while
        # every requester-endpoint route crosses the single bridge link
        left = list(range(n_requesters))
        right = [n_requesters + i for i in range(n_endpoints)]
        for s in left + right:
            roles[s] = ROLE_SWITCH
        for side in (left, right):
            for i in range(1, len(side)):
                links.append(lk(side[(i - 1) // tree_fanout], side[i]))
        links.append(lk(left[0], right[0]))
        add_terminals(left + right)

    elif kind == "spine_leaf":
        if spines < 1:
            raise TopologyError("spine count must be >= 1")
        per_leaf = min(leaf_size, n_term)
        n_leaves = (n_term + per_leaf - 1) // per_leaf
        for s in range(n_leaves):
            roles[s] = ROLE_SWITCH
        spine_ids = []
        for _ in range(spines):
            p = len(roles)
            roles[p] = ROLE_SWITCH
            spine_ids.append(p)
        for leaf in range(n_leaves):
            for sp in spine_ids:
                links.append(lk(leaf, sp))
        attach = [i // per_leaf for i in range(n_term)]
        add_terminals(attach)

    elif kind == "fully_connected":
        # one terminal per switch, every switch pair linked
        for s in range(n_term):
            roles[s] = ROLE_SWITCH
        for a, b in combinations(range(n_term), 2):
            links.append(lk(a, b))
        add_terminals(list(range(n_term)))

    elif kind == "single_bus":
        roles[0] = ROLE_BUS_HUB
        add_terminals([0] * n_term)

    else:
        raise TopologyError(f"unknown topology kind {kind!r}")

    return roles, links


def bisection_bandwidth(g, exhaustive_limit=16):
    """Minimum aggregate link bandwidth crossing a balanced partition of
    the terminals.

    For <= `exhaustive_limit` terminals this enumerates all balanced
    terminal partitions and takes the min-cut (max-flow) separating the
    two groups, switches placed on whichever side minimizes the cut.
    """
    import networkx as nx

    terms = g.terminals()
    if len(terms) % 2:
        raise TopologyError("bisection bandwidth needs an even terminal count")
    if len(terms) > exhaustive_limit:
        raise TopologyError(
            f"{len(terms)} terminals exceed the exhaustive search limit "
            f"({exhaustive_limit}); use the preset closed form")

    nxg = nx.Graph()
    for l in g.links:
        nxg.add_edge(l.a, l.b, capacity=l.bandwidth)

    half = len(terms) // 2
    anchor, rest = terms[0], terms[1:]
    best = None
    for group in combinations(rest, half - 1):
        side_a = set(group) | {anchor}
        side_b = set(terms) - side_a
        h = nxg.copy()
        h.add_node("S")
        h.add_node("T")
        for t in side_a:
            h.add_edge("S", t, capacity=float("inf"))
        for t in side_b:
            h.add_edge(t, "T", capacity=float("inf"))
        cut, _ = nx.minimum_cut(h, "S", "T")
        if best is None or cut < best:
            best = cut
    return best


def preset_bisection(kind, n_requesters, n_endpoints, link_bandwidth=64.0,
                     spines=2, leaf_size=4, tree_fanout=2,
                     terminal_bandwidth=0.0):
    """Closed-form bisection bandwidth of the preset topologies with the
    grouped terminal placement used by make_topology.

    The spine_leaf form assumes terminals fill an even number of leaves
    evenly, so the balanced terminal partition aligns with a leaf
    partition; for uneven fills it is a lower bound."""
    n_term = n_requesters + n_endpoints
    # severing half the terminals at their stub links
    stub_cut = (n_term // 2) * (terminal_bandwidth or link_bandwidth)
    if kind == "chain" or kind == "tree":
        return link_bandwidth
    if kind == "ring":
        return min(2 * link_bandwidth, stub_cut)
    if kind == "spine_leaf":
        per_leaf = min(leaf_size, n_term)
        n_leaves = (n_term + per_leaf - 1) // per_leaf
        return min((n_leaves // 2) * spines * link_bandwidth, stub_cut)
    if kind == "fully_connected":
        cross = (n_term // 2) * (n_term - n_term // 2) * link_bandwidth
        return min(cross, stub_cut)
    if kind == "single_bus":
        # star cut: all stub links on one side of the partition
        return (n_term // 2) * link_bandwidth
    raise TopologyError(f"unknown topology kind {kind!r}")
