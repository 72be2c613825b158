"""Communication graph, neighbourhoods and combination (fusion) weights."""

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import networkx as nx
import numpy as np

ROW_SUM_TOL = 1e-12


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class Network:
    """Connected undirected graph. ``neighborhoods[l]`` is sorted and contains ``l``."""

    node_count: int
    edges: frozenset
    neighborhoods: tuple

    def degree(self, l):
        return len(self.neighborhoods[l]) - 1

    def degrees(self):
        return np.array([self.degree(l) for l in range(self.node_count)])

    def adjacency(self):
        Adj = np.zeros((self.node_count, self.node_count), dtype=int)
        for u, v in self.edges:
            Adj[u, v] = Adj[v, u] = 1
        return Adj

    def to_networkx(self):
        g = nx.Graph()
        g.add_nodes_from(range(self.node_count))
        g.add_edges_from(self.edges)
        return g


def build_network(node_count, edges):
    """Validate an undirected edge list and build the neighbourhood structure.

    Raises
    ------
    NetworkError
        On out-of-range indices, self-edges or a disconnected graph.
    """
    node_count = int(node_count)
    if node_count < 1:
        raise NetworkError("node_count must be positive")
    canon = set()
    for e in edges:
        u, v = (int(x) for x in e)
        for x in (u, v):
            if not 0 <= x < node_count:
                raise NetworkError(f"node index {x} out of range for {node_count} nodes")
        if u == v:
            raise NetworkError(f"self-edge ({u}, {v}) is not allowed; self-inclusion is implicit")
        canon.add((min(u, v), max(u, v)))

    nbrs = [{l} for l in range(node_count)]
    for u, v in canon:
        nbrs[u].add(v)
        nbrs[v].add(u)
    net = Network(node_count, frozenset(canon), tuple(tuple(sorted(s)) for s in nbrs))

    components = connected_components(net)
    if len(components) > 1:
        raise NetworkError(f"graph is disconnected; components: {components}")
    return net


def connected_components(net):
    seen, comps = set(), []
    for s in range(net.node_count):
        if s in seen:
            continue
        comp = k_hop_neighborhood(net, s, net.node_count)
        seen |= comp
        comps.append(sorted(comp))
    return comps


def k_hop_neighborhood(net, l, k):
    """All nodes within ``k`` hops of ``l`` (``k = 0`` gives ``{l}``)."""
    if not 0 <= l < net.node_count:
        raise NetworkError(f"node {l} out of range")
    dist = {l: 0}
    queue = deque([l])
    while queue:
        u = queue.popleft()
        if dist[u] == k:
            continue
        for v in net.neighborhoods[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return set(dist)


def diameter(net):
    return max(
        max(nx.single_source_shortest_path_length(net.to_networkx(), s).values())
        for s in range(net.node_count)
    )


def generate_topology(node_count, edge_count, seed, max_tries=1000):
    """Random connected graph with exactly one degree-1 node (the last index).

    A random spanning tree is drawn over the first ``node_count - 1`` nodes,
    random chords are added until ``edge_count - 1`` core edges exist, and the
    pendant node is attached to a random core node. Draws without a core
    leaf are retried.
    """
    node_count, edge_count = int(node_count), int(edge_count)
    rng = np.random.default_rng(seed)
    if node_count == 1:
        if edge_count != 0:
            raise NetworkError("a single node has no edges")
        return build_network(1, [])
    if node_count == 2:
        if edge_count != 1:
            raise NetworkError("two nodes admit exactly one edge")
        return build_network(2, [(0, 1)])

    core = node_count - 1
    core_edges = edge_count - 1
    if core_edges < core - 1 or core_edges > core * (core - 1) // 2:
        raise NetworkError(f"cannot place {edge_count} edges on {node_count} nodes")
    # a tree-shaped core keeps at least two leaves; the pendant link covers one
    if core_edges < core:
        raise NetworkError(
            f"{node_count} nodes with {edge_count} edges cannot have exactly one degree-1 node"
            f" (need at least {core + 1} edges and 4 nodes)"
        )
    for _ in range(max_tries):
        if core == 2:
            tree = [(0, 1)]
        else:
            prufer = rng.integers(0, core, size=core - 2).tolist()
            tree = list(nx.from_prufer_sequence(prufer).edges())
        es = {(min(u, v), max(u, v)) for u, v in tree}
        while len(es) < core_edges:
            u, v = sorted(rng.choice(core, size=2, replace=False).tolist())
            es.add((u, v))
        hub = int(rng.integers(core))
        es.add((hub, node_count - 1))
        net = build_network(node_count, es)
        if np.count_nonzero(net.degrees() == 1) == 1:
            return net
    raise NetworkError(f"no graph with a single pendant node found in {max_tries} tries")


def generate_paper_topology(seed):
    """20 nodes, 40 links, one pendant node (index 19)."""
    return generate_topology(20, 40, seed)


def pendant_nodes(net):
    return [l for l in range(net.node_count) if net.degree(l) == 1]


@dataclass(frozen=True)
class CombinationMatrix:
    """Nonnegative right-stochastic fusion weights supported on the neighbourhoods."""

    C: np.ndarray

    def __post_init__(self):
        C = np.array(self.C, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError(f"C must be square, got {C.shape}")
        if np.any(C < 0):
            raise ValueError("combination weights must be nonnegative")
        rows = C.sum(axis=1)
        bad = np.flatnonzero(np.abs(rows - 1.0) > ROW_SUM_TOL)
        if bad.size:
            raise ValueError(f"rows {bad.tolist()} do not sum to 1: {rows[bad]}")
        C.setflags(write=False)
        object.__setattr__(self, "C", C)

    @property
    def node_count(self):
        return self.C.shape[0]

    def neighborhood(self, l):
        return np.flatnonzero(self.C[l]).tolist()

    def check_support(self, net):
        """Raise unless ``C[l, i] == 0`` for every ``i`` outside ``N_l``."""
        mask = np.zeros_like(self.C, dtype=bool)
        for l, nb in enumerate(net.neighborhoods):
            mask[l, list(nb)] = True
        outside = np.argwhere((self.C != 0) & ~mask)
        if outside.size:
            raise ValueError(f"weights outside neighbourhoods at {outside.tolist()}")


def uniform_weights(net):
    C = np.zeros((net.node_count, net.node_count))
    for l, nb in enumerate(net.neighborhoods):
        C[l, list(nb)] = 1.0 / len(nb)
    return CombinationMatrix(C)


def metropolis_weights(net):
    """Metropolis-Hastings weights; symmetric, hence doubly stochastic."""
    deg = net.degrees()
    C = np.zeros((net.node_count, net.node_count))
    for u, v in net.edges:
        C[u, v] = C[v, u] = 1.0 / (1 + max(deg[u], deg[v]))
    C[np.diag_indices_from(C)] = 1.0 - C.sum(axis=1)
    return CombinationMatrix(C)


class Primitivity(NamedTuple):
    primitive: bool
    exponent: int | None

    def __bool__(self):
        return self.primitive


def is_primitive(C):
    """Test primitivity by Boolean powers, up to ``m = (n - 1) n + 1``.

    Returns the smallest ``m`` with ``C**m > 0`` entrywise as the certificate.
    """
    C = np.asarray(getattr(C, "C", C), dtype=float)
    if np.any(C < 0):
        raise ValueError("is_primitive needs a nonnegative matrix")
    n = C.shape[0]
    pattern = (C > 0).astype(np.int64)
    power = pattern.copy()
    for m in range(1, (n - 1) * n + 2):
        if power.all():
            return Primitivity(True, m)
        power = (power @ pattern > 0).astype(np.int64)
    return Primitivity(False, None)


def read_edge_list(path):
    """Parse ``nodes <n>`` followed by 0-indexed ``u v`` lines into a Network."""
    node_count, edges = None, []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "nodes":
                node_count = int(parts[1])
            elif len(parts) == 2:
                edges.append((int(parts[0]), int(parts[1])))
            else:
                raise NetworkError(f"{path}:{lineno}: cannot parse {raw.rstrip()!r}")
    if node_count is None:
        raise NetworkError(f"{path}: missing 'nodes <n>' header")
    return build_network(node_count, edges)


def write_edge_list(net, path):
    with open(path, "w") as fh:
        fh.write(f"nodes {net.node_count}\n")
        for u, v in sorted(net.edges):
            fh.write(f"{u} {v}\n")
