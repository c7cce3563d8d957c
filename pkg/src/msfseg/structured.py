"""Root error edges and the structured loss derived from them.

A free growth record is compared with one grown under the ground-truth
cut constraint. Nodes whose constrained topographic distance exceeds the
free one are incorrect; each is charged to the first missing cut on its
free path (altitude must rise) and to the bottleneck of its constrained
path (altitude must fall).
"""
from __future__ import annotations

import math

import logging
from dataclasses import dataclass, field

import numpy as np

from .grid import ContractError
from .msf import GrowthRecord, depth

log = logging.getLogger(__name__)


class ConsistencyError(RuntimeError):
    """Records contradict the structure the analysis relies on."""


@dataclass(frozen=True, eq=False)
class ErrorAnalysis:
    incorrect_nodes: frozenset
    rho: dict  # node -> missing-cut root edge on the free path
    rho_star: dict  # node -> false-cut root edge on the constrained path
    dist: dict  # node -> edges between node and rho(node)
    dist_star: dict  # node -> edges between node and rho_star(node)
    num_edges: int
    dropped: frozenset = field(default_factory=frozenset)
    weights: np.ndarray | None = None

    @property
    def e_up(self) -> set:
        return set(self.rho.values())

    @property
    def e_down(self) -> set:
        return set(self.rho_star.values())

    @property
    def tree_dist(self) -> dict:
        out = {(w, "rho"): d for w, d in self.dist.items()}
        out.update({(w, "rho_star"): d for w, d in self.dist_star.items()})
        return out

    def with_weights(self, weights) -> "ErrorAnalysis":
        return ErrorAnalysis(self.incorrect_nodes, self.rho, self.rho_star, self.dist,
                             self.dist_star, self.num_edges, self.dropped, np.asarray(weights))


def _check_comparable(free: GrowthRecord, constrained: GrowthRecord):
    if free.graph != constrained.graph:
        raise ValueError("records are over different graphs")
    if free.seeds != constrained.seeds:
        raise ValueError("records were grown from different seeds")


def find_incorrect_nodes(free: GrowthRecord, constrained: GrowthRecord) -> set[int]:
    _check_comparable(free, constrained)
    both = (free.order >= 0) & (constrained.order >= 0)
    bad = both & (constrained.path_max > free.path_max)
    return set(np.flatnonzero(bad).tolist())


def find_root_edges(free: GrowthRecord, constrained: GrowthRecord, incorrect,
                    strict: bool = True) -> ErrorAnalysis:
    """Locate rho / rho* for every incorrect node.

    ``strict=False`` is for providers whose altitudes depend on the growth
    state: there the two runs evaluate edges differently, so a node can look
    incorrect while its free path is admissible. Such nodes are dropped
    instead of raising.
    """
    _check_comparable(free, constrained)
    graph = free.graph
    gt_cut = np.zeros(graph.num_edges, dtype=bool)
    gt_cut[list(constrained.forbidden)] = True
    first_free, dist_free = _first_marked(free, gt_cut)
    # rho* is the constrained bottleneck (farthest on ties), so f(rho*) == T*
    con_depth = depth(constrained)
    ends = graph.endpoints

    rho, rho_star, dist, dist_star = {}, {}, {}, {}
    dropped = set()
    for w in sorted(incorrect):
        i, j = int(first_free[w]), int(constrained.bottleneck_edge[w])
        if i < 0 or j < 0:
            if strict:
                what = "free path crosses no ground-truth cut" if i < 0 else \
                    "node has no constrained path"
                raise ConsistencyError(f"incorrect node {w}: {what}")
            dropped.add(w)
            continue
        rho[w] = i
        dist[w] = int(dist_free[w])
        rho_star[w] = j
        dist_star[w] = int(con_depth[w] - con_depth[ends[j]].max())
    if dropped:
        log.debug("dropped %d nodes with admissible free paths", len(dropped))
    return ErrorAnalysis(frozenset(rho), rho, rho_star, dist, dist_star, graph.num_edges,
                         frozenset(dropped))


def _first_marked(record: GrowthRecord, marked: np.ndarray):
    """Per node: first marked edge on its seed path (seed side first), and the
    number of path edges after it. -1 where the path has no marked edge."""
    n = record.graph.num_nodes
    first = np.full(n, -1, dtype=np.int64)
    dist = np.full(n, -1, dtype=np.int64)
    parent_edge = record.parent_edge.tolist()
    parent_node = record.parent_node.tolist()
    marked = marked.tolist()
    first_l, dist_l = first.tolist(), dist.tolist()
    for v in np.argsort(record.order, kind="stable").tolist():
        e = parent_edge[v]
        if e < 0:
            continue
        p = parent_node[v]
        if first_l[p] >= 0:
            first_l[v] = first_l[p]
            dist_l[v] = dist_l[p] + 1
        elif marked[e]:
            first_l[v] = e
            dist_l[v] = 0
    return np.array(first_l, dtype=np.int64), np.array(dist_l, dtype=np.int64)


def weights_binary(analysis: ErrorAnalysis) -> np.ndarray:
    r = np.zeros(analysis.num_edges)
    for w, e in analysis.rho_star.items():
        r[e] += 1.0
    for w, e in analysis.rho.items():
        r[e] -= 1.0
    return r


def weights_discounted(analysis: ErrorAnalysis, gamma: float) -> np.ndarray:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    r = np.zeros(analysis.num_edges)
    # python's 0.0 ** 0 == 1.0, which is the convention wanted here
    for w, e in analysis.rho_star.items():
        r[e] += gamma ** analysis.dist_star[w]
    for w, e in analysis.rho.items():
        r[e] -= gamma ** analysis.dist[w]
    return r


def scored_altitudes(weights, free: GrowthRecord, constrained: GrowthRecord):
    """Yield (edge, weight, record) for every edge with nonzero weight.

    Negative weights (raise) are read from the free run, positive ones
    (lower) from the constrained run.
    """
    weights = np.asarray(weights)
    for e in np.flatnonzero(weights):
        rec = free if weights[e] < 0 else constrained
        if not rec.is_evaluated(e):
            raise ContractError(f"edge {e} carries weight but was never evaluated in its record")
        yield int(e), float(weights[e]), rec


def weighted_sum(pairs) -> float:
    """Correctly rounded sum of weight * value over (weight, value) pairs.

    Integer weights expand to repeated values, so the result is the exact
    real sum rounded once; the bound against the perceptron loss then
    holds in floating point too, ties included.
    """
    terms = []
    for w, value in pairs:
        value = float(value)
        if w == int(w):
            terms += [value if w > 0 else -value] * abs(int(w))
        else:
            terms.append(w * value)
    return math.fsum(terms)


def structured_loss(weights, free: GrowthRecord, constrained: GrowthRecord) -> float:
    return weighted_sum((w, rec.evaluated_altitude[e])
                        for e, w, rec in scored_altitudes(weights, free, constrained))


def perceptron_loss(free: GrowthRecord, constrained: GrowthRecord) -> float:
    _check_comparable(free, constrained)
    both = (free.order >= 0) & (constrained.order >= 0) & (free.parent_edge >= 0)
    return math.fsum(np.concatenate([constrained.path_max[both], -free.path_max[both]]).tolist())


def analyze(free: GrowthRecord, constrained: GrowthRecord, weight_mode: str = "binary",
            gamma: float = 1.0, strict: bool = True) -> ErrorAnalysis:
    incorrect = find_incorrect_nodes(free, constrained)
    analysis = find_root_edges(free, constrained, incorrect, strict=strict)
    if weight_mode == "binary":
        w = weights_binary(analysis)
    elif weight_mode == "discounted":
        w = weights_discounted(analysis, gamma)
    else:
        raise ValueError(f"unknown weight mode {weight_mode!r}")
    return analysis.with_weights(w)


def tight_rate(analysis: ErrorAnalysis, constrained: GrowthRecord) -> float:
    """Fraction of incorrect nodes whose constrained distance equals f(rho*)."""
    if not analysis.rho_star:
        return 1.0
    hits = sum(constrained.path_max[w] == constrained.evaluated_altitude[e]
               for w, e in analysis.rho_star.items())
    return hits / len(analysis.rho_star)
