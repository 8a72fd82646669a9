"""Anonymous, connected, undirected graphs with local port numbering.

Nodes carry integer indices for simulation bookkeeping only; the protocol
layer never sees them.  Each node labels its incident edges with ports
1..d(v), and crossing an edge reports the entry port on the far side.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Sequence


class GraphError(ValueError):
    """Base class for graph construction and navigation errors."""


class SelfLoop(GraphError):
    def __init__(self, node: int):
        super().__init__(f"self-loop at node {node}")
        self.node = node


class DuplicateEdge(GraphError):
    def __init__(self, u: int, v: int):
        super().__init__(f"duplicate edge {{{u}, {v}}}")
        self.edge = (u, v)


class DuplicatePort(GraphError):
    def __init__(self, node: int, detail: str):
        super().__init__(f"bad port assignment at node {node}: {detail}")
        self.node = node


class DisconnectedGraph(GraphError):
    def __init__(self, node: int):
        super().__init__(f"node {node} is unreachable from node 0")
        self.node = node


class PortOutOfRange(GraphError):
    def __init__(self, node: int, port: int, degree: int):
        super().__init__(f"port {port} out of range at node {node} (degree {degree})")
        self.node = node
        self.port = port


class InvalidFamilyParameters(GraphError):
    pass


FAMILY_KINDS = ("ring", "complete", "path", "random-tree", "random-connected")


@dataclass(frozen=True)
class GraphFamily:
    """Benchmark scenario descriptor: a named generator plus its parameters."""

    kind: str
    node_count: int
    seed: int = 0


class PortGraph:
    """Immutable port-numbered graph.

    ``adj[v][p - 1] == (u, q)`` means port ``p`` at ``v`` crosses to ``u``,
    arriving through port ``q``.  Instances are safe to share between
    concurrently running scenarios.
    """

    __slots__ = ("node_count", "_adj")

    def __init__(self, node_count: int, adj: Sequence[Sequence[tuple[int, int]]]):
        self.node_count = node_count
        self._adj = tuple(tuple(row) for row in adj)

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def neighbor(self, v: int, p: int) -> tuple[int, int]:
        """Cross port ``p`` at node ``v``; returns (far node, entry port)."""
        row = self._adj[v]
        if not 1 <= p <= len(row):
            raise PortOutOfRange(v, p, len(row))
        return row[p - 1]

    def edges(self) -> list[tuple[int, int]]:
        out = []
        for v, row in enumerate(self._adj):
            for u, _ in row:
                if v < u:
                    out.append((v, u))
        return out

    def fingerprint(self) -> tuple:
        """Canonical identity of the labeled graph, usable as a cache key."""
        return (self.node_count, self._adj)

    def __eq__(self, other) -> bool:
        return isinstance(other, PortGraph) and self.fingerprint() == other.fingerprint()

    def __hash__(self) -> int:
        return hash(self.fingerprint())

    def __repr__(self) -> str:
        return f"PortGraph(n={self.node_count}, m={sum(map(len, self._adj)) // 2})"


def neighbor(g: PortGraph, v: int, p: int) -> tuple[int, int]:
    """Module-level alias for :meth:`PortGraph.neighbor`."""
    return g.neighbor(v, p)


def build(
    node_count: int,
    edge_list: Iterable[tuple[int, int]],
    port_assignment: dict[int, Sequence[int]] | None = None,
) -> PortGraph:
    """Build and validate a PortGraph from an edge list.

    ``port_assignment`` optionally gives, per node, the neighbor order that
    defines ports 1..d(v).  Nodes without an entry use ascending neighbor
    index order.
    """
    if node_count < 1:
        raise InvalidFamilyParameters(f"node_count must be >= 1, got {node_count}")
    seen: set[frozenset[int]] = set()
    nbrs: list[list[int]] = [[] for _ in range(node_count)]
    for u, v in edge_list:
        if not (0 <= u < node_count and 0 <= v < node_count):
            raise GraphError(f"edge ({u}, {v}) references an unknown node")
        if u == v:
            raise SelfLoop(u)
        key = frozenset((u, v))
        if key in seen:
            raise DuplicateEdge(u, v)
        seen.add(key)
        nbrs[u].append(v)
        nbrs[v].append(u)

    order: list[list[int]] = []
    for v in range(node_count):
        if port_assignment is not None and v in port_assignment:
            want = list(port_assignment[v])
            if len(set(want)) != len(want):
                raise DuplicatePort(v, "repeated neighbor in port order")
            if sorted(want) != sorted(nbrs[v]):
                raise DuplicatePort(v, "port order does not match the neighbor set")
            order.append(want)
        else:
            order.append(sorted(nbrs[v]))

    port_of = [{u: p + 1 for p, u in enumerate(order[v])} for v in range(node_count)]
    adj = [[(u, port_of[u][v]) for u in order[v]] for v in range(node_count)]
    g = PortGraph(node_count, adj)

    unreached = _unreached_node(g)
    if unreached is not None:
        raise DisconnectedGraph(unreached)
    return g


def _unreached_node(g: PortGraph) -> int | None:
    """Breadth-first reachability from node 0; returns an unreached node."""
    seen = {0}
    frontier = [0]
    while frontier:
        nxt = []
        for v in frontier:
            for p in range(1, g.degree(v) + 1):
                u, _ = g.neighbor(v, p)
                if u not in seen:
                    seen.add(u)
                    nxt.append(u)
        frontier = nxt
    for v in range(g.node_count):
        if v not in seen:
            return v
    return None


def generate(family: GraphFamily) -> PortGraph:
    """Deterministically generate a benchmark graph for ``family``.

    Port assignments are canonical for the deterministic families and
    seed-shuffled for the random ones.
    """
    kind, n, seed = family.kind, family.node_count, family.seed
    if kind not in FAMILY_KINDS:
        raise InvalidFamilyParameters(f"unknown family kind {kind!r}")
    if n < 1:
        raise InvalidFamilyParameters("node count must be >= 1")

    if kind == "ring":
        if n < 3:
            raise InvalidFamilyParameters("ring needs at least 3 nodes")
        edges = [(i, (i + 1) % n) for i in range(n)]
        return build(n, edges)
    if kind == "path":
        edges = [(i, i + 1) for i in range(n - 1)]
        return build(n, edges)
    if kind == "complete":
        if n < 2:
            raise InvalidFamilyParameters("complete graph needs at least 2 nodes")
        edges = [(u, v) for u in range(n) for v in range(u + 1, n)]
        return build(n, edges)

    rng = random.Random(seed)
    edges = _random_tree_edges(n, rng)
    if kind == "random-connected":
        present = {frozenset(e) for e in edges}
        for u in range(n):
            for v in range(u + 1, n):
                if frozenset((u, v)) not in present and rng.random() < 0.3:
                    edges.append((u, v))
                    present.add(frozenset((u, v)))
    ports = _shuffled_ports(n, edges, rng)
    return build(n, edges, ports)


def _random_tree_edges(n: int, rng: random.Random) -> list[tuple[int, int]]:
    """Random spanning tree by attaching each node to an earlier one."""
    order = list(range(n))
    rng.shuffle(order)
    edges = []
    for i in range(1, n):
        j = rng.randrange(i)
        edges.append((order[j], order[i]))
    return edges


def _shuffled_ports(n: int, edges: list[tuple[int, int]], rng: random.Random) -> dict[int, list[int]]:
    nbrs: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        nbrs[u].append(v)
        nbrs[v].append(u)
    ports = {}
    for v in range(n):
        order = sorted(nbrs[v])
        rng.shuffle(order)
        ports[v] = order
    return ports


def parse_graph_file(text: str) -> PortGraph:
    """Parse the plain-text graph format.

    Line 1 is the node count, then one "u v" pair per line.  An optional
    section starting with a single "ports" line lists per-node neighbor
    orders as "v: u1 u2 ...".  Blank lines and "#" comments are ignored.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise GraphError("empty graph file")
    try:
        n = int(lines[0])
    except ValueError as exc:
        raise GraphError(f"bad node count line: {lines[0]!r}") from exc
    edges: list[tuple[int, int]] = []
    ports: dict[int, list[int]] = {}
    in_ports = False
    for ln in lines[1:]:
        if ln == "ports":
            in_ports = True
            continue
        if in_ports:
            head, _, rest = ln.partition(":")
            ports[int(head)] = [int(tok) for tok in rest.split()]
        else:
            u, v = ln.split()
            edges.append((int(u), int(v)))
    return build(n, edges, ports or None)


def load_graph_file(path: str) -> PortGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_graph_file(fh.read())
