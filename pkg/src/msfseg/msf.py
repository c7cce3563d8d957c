"""Seeded watershed cuts by Prim's algorithm, with brute-force oracles.

The queue key is (altitude, insertion counter), so ties go to the entry
pushed first. Each frontier edge is evaluated exactly once, when its source
node is assigned, and the value is frozen from then on. Entries whose
target got assigned in the meantime are dropped when popped.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .grid import UNASSIGNED, ContractError, GridGraph, Image, SeedSet, Segmentation

NEG_INF = -math.inf


class StaticAltitudes:
    """Provider backed by a fixed per-edge altitude array (r = 0)."""

    hidden_size = 0

    def __init__(self, altitudes):
        alt = np.asarray(altitudes, dtype=np.float64).ravel()
        if not np.all(np.isfinite(alt)):
            raise ValueError("altitudes must be finite")
        self.altitudes = alt

    def bind(self, graph: GridGraph, image: Image | None):
        if self.altitudes.shape[0] != graph.num_edges:
            raise ValueError(f"{self.altitudes.shape[0]} altitudes for {graph.num_edges} edges")
        return self

    def edge_altitudes(self) -> np.ndarray:
        return self.altitudes

    def evaluate(self, edge, u, v, assignment, hidden):
        return self.altitudes[edge], None


@dataclass(eq=False)
class GrowthRecord:
    graph: GridGraph
    seeds: SeedSet
    assignment: np.ndarray
    parent_edge: np.ndarray  # -1 for seeds and unassigned nodes
    parent_node: np.ndarray
    path_max: np.ndarray  # -inf at seeds, +inf where unassigned
    bottleneck_edge: np.ndarray
    order: np.ndarray  # assignment rank, -1 if never assigned
    hidden: np.ndarray  # (|V|, r)
    evaluated_altitude: np.ndarray  # (|E|,), nan where never evaluated
    evaluated_source: np.ndarray  # (|E|,), node the edge was evaluated from, -1 if never
    forbidden: frozenset = frozenset()

    @property
    def num_seeds(self) -> int:
        return len(self.seeds)

    @property
    def unassigned(self) -> np.ndarray:
        return np.flatnonzero(self.assignment == UNASSIGNED)

    def is_evaluated(self, edge: int) -> bool:
        return self.evaluated_source[edge] >= 0

    def assigned_at(self, source: int) -> np.ndarray:
        """Boolean mask of nodes already assigned when ``source``'s frontier was evaluated."""
        horizon = max(int(self.order[source]), self.num_seeds - 1)
        return (self.order >= 0) & (self.order <= horizon)


def grow(graph: GridGraph, image: Image | None, seeds: SeedSet, provider, forbidden=None,
         debug: bool = False) -> GrowthRecord:
    """Run Prim's algorithm from ``seeds`` with altitudes drawn from ``provider``.

    Edges in ``forbidden`` are never added to the frontier; nodes reachable
    only through them stay unassigned.
    """
    if not isinstance(seeds, SeedSet):
        seeds = SeedSet(tuple(seeds))
    if len(seeds) == 0:
        raise ValueError("seed set is empty")
    forbidden = frozenset(int(e) for e in forbidden) if forbidden else frozenset()
    for e in forbidden:
        if not 0 <= e < graph.num_edges:
            raise ValueError(f"forbidden edge {e} out of range")
    session = provider.bind(graph, image)
    r = provider.hidden_size
    n, m = graph.num_nodes, graph.num_edges

    assignment = np.zeros(n, dtype=np.int64)
    parent_edge = np.full(n, -1, dtype=np.int64)
    parent_node = np.full(n, -1, dtype=np.int64)
    bottleneck = np.full(n, -1, dtype=np.int64)
    order = np.full(n, -1, dtype=np.int64)
    hidden = np.zeros((n, r))
    evaluated = np.full(m, np.nan)
    source = np.full(m, -1, dtype=np.int64)
    # python-side mirrors; numpy scalar access dominates otherwise
    labels = [0] * n
    pmax = [math.inf] * n
    edge_hidden = {}

    for rank, (node, label) in enumerate(seeds):
        if not 0 <= node < n:
            raise ValueError(f"seed node {node} out of range")
        labels[node] = label
        assignment[node] = label
        pmax[node] = NEG_INF
        order[node] = rank

    adjacency = graph.adjacency
    heap = []
    counter = 0
    evaluate = session.evaluate

    def expand(u):
        nonlocal counter
        h_u = hidden[u] if r else None
        for e, w, _ in adjacency[u]:
            if labels[w] or e in forbidden:
                continue
            alt, h_w = evaluate(e, u, w, assignment, h_u)
            alt = float(alt)
            if not math.isfinite(alt):
                raise ValueError(f"provider returned non-finite altitude {alt} for edge {e}")
            evaluated[e] = alt
            source[e] = u
            if r:
                edge_hidden[e] = h_w
            heapq.heappush(heap, (alt, counter, e, u, w))
            counter += 1

    for node, _ in seeds:
        expand(node)

    rank = len(seeds)
    while heap:
        key = heapq.heappop(heap)
        alt, _, e, u, v = key
        if labels[v]:
            continue
        if debug:
            live = [k for k in heap if not labels[k[4]]]
            if live and min(live)[:2] < key[:2]:
                raise AssertionError(f"popped {key[:2]} while {min(live)[:2]} was pending")
        labels[v] = labels[u]
        assignment[v] = labels[u]
        parent_edge[v] = e
        parent_node[v] = u
        if alt >= pmax[u]:
            pmax[v] = alt
            bottleneck[v] = e
        else:
            pmax[v] = pmax[u]
            bottleneck[v] = bottleneck[u]
        order[v] = rank
        rank += 1
        if r:
            hidden[v] = edge_hidden[e]
        expand(v)

    return GrowthRecord(
        graph=graph, seeds=seeds, assignment=assignment, parent_edge=parent_edge,
        parent_node=parent_node, path_max=np.array(pmax), bottleneck_edge=bottleneck,
        order=order, hidden=hidden, evaluated_altitude=evaluated, evaluated_source=source,
        forbidden=forbidden,
    )


def segmentation_of(record: GrowthRecord) -> Segmentation:
    return Segmentation(record.graph, record.assignment.copy())


def path_to_seed(record: GrowthRecord, node: int) -> list[int]:
    """Edges of the forest path from the node's seed to ``node``, seed first."""
    if record.assignment[node] == UNASSIGNED:
        raise ContractError(f"node {node} is unassigned")
    path = []
    while record.parent_edge[node] >= 0:
        path.append(int(record.parent_edge[node]))
        node = int(record.parent_node[node])
    path.reverse()
    return path


def depth(record: GrowthRecord) -> np.ndarray:
    """Number of forest edges between each node and its seed (-1 if unassigned)."""
    d = np.full(record.graph.num_nodes, -1, dtype=np.int64)
    for node in np.argsort(record.order):
        if record.order[node] < 0:
            continue
        p = record.parent_node[node]
        d[node] = 0 if p < 0 else d[p] + 1
    return d


ORACLE_PATH_LIMIT = 12
ORACLE_MSF_LIMIT = 256


def topographic_distance_oracle(graph: GridGraph, altitudes, m: int, w: int) -> float:
    """Min over all simple paths m -> w of the largest altitude on the path."""
    if graph.num_nodes > ORACLE_PATH_LIMIT:
        raise ValueError(f"path enumeration limited to {ORACLE_PATH_LIMIT} nodes")
    if m == w:
        return NEG_INF
    alt = np.asarray(altitudes, dtype=np.float64)
    best = math.inf
    visited = {m}

    def dfs(node, cur):
        nonlocal best
        for e, nb, _ in graph.adjacency[node]:
            if nb in visited:
                continue
            val = max(cur, alt[e])
            if nb == w:
                best = min(best, val)
                continue
            visited.add(nb)
            dfs(nb, val)
            visited.discard(nb)

    dfs(m, NEG_INF)
    return best


def msf_oracle(graph: GridGraph, altitudes, seeds) -> Segmentation:
    """Kruskal forest with seeds as fixed roots; never joins two seeded trees."""
    if graph.num_nodes > ORACLE_MSF_LIMIT:
        raise ValueError(f"MSF oracle limited to {ORACLE_MSF_LIMIT} nodes")
    alt = np.asarray(altitudes, dtype=np.float64)
    parent = list(range(graph.num_nodes))
    root_label = [0] * graph.num_nodes
    for node, label in seeds:
        root_label[node] = label

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in np.argsort(alt, kind="stable"):
        a, b = graph.endpoints[e]
        ra, rb = find(int(a)), find(int(b))
        if ra == rb or (root_label[ra] and root_label[rb]):
            continue
        parent[rb] = ra
        root_label[ra] = root_label[ra] or root_label[rb]
    labels = np.array([root_label[find(x)] for x in range(graph.num_nodes)], dtype=np.int64)
    return Segmentation(graph, labels)
