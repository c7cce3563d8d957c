"""4-connected grid graphs, images, segmentations and seed sets.

Edge indexing: horizontal edges (r, c) -> (r, c + 1) come first in row-major
order, followed by vertical edges (r, c) -> (r + 1, c) in row-major order.
Label 0 marks an unassigned node.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

UNASSIGNED = 0

# neighbour slots, also used as the edge direction code u -> v
LEFT, RIGHT, UP, DOWN = 0, 1, 2, 3
OPPOSITE = np.array([RIGHT, LEFT, DOWN, UP])


class ContractError(ValueError):
    """An input violated the documented precondition of an operation."""


@dataclass(frozen=True)
class GridGraph:
    height: int
    width: int

    def __post_init__(self):
        if int(self.height) < 1 or int(self.width) < 1:
            raise ValueError(f"grid dimensions must be positive, got {self.height}x{self.width}")

    @property
    def num_nodes(self) -> int:
        return self.height * self.width

    @property
    def num_horizontal(self) -> int:
        return self.height * (self.width - 1)

    @property
    def num_edges(self) -> int:
        return self.num_horizontal + (self.height - 1) * self.width

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def node(self, row: int, col: int) -> int:
        return row * self.width + col

    @cached_property
    def endpoints(self) -> np.ndarray:
        """(|E|, 2) array of canonical (low, high) endpoints."""
        h, w = self.height, self.width
        ids = np.arange(h * w).reshape(h, w)
        horiz = np.stack([ids[:, :-1].ravel(), ids[:, 1:].ravel()], axis=1)
        vert = np.stack([ids[:-1, :].ravel(), ids[1:, :].ravel()], axis=1)
        out = np.concatenate([horiz, vert]).astype(np.int64)
        out.setflags(write=False)
        return out

    @cached_property
    def incidence(self) -> tuple[np.ndarray, np.ndarray]:
        """(|V|, 4) edge ids and neighbour ids in (left, right, up, down) order, -1 if absent."""
        h, w = self.height, self.width
        edges = np.full((h * w, 4), -1, dtype=np.int64)
        nbrs = np.full((h * w, 4), -1, dtype=np.int64)
        rows, cols = np.divmod(np.arange(h * w), w)
        nh = self.num_horizontal
        m = cols > 0
        edges[m, LEFT] = rows[m] * (w - 1) + cols[m] - 1
        nbrs[m, LEFT] = np.flatnonzero(m) - 1
        m = cols < w - 1
        edges[m, RIGHT] = rows[m] * (w - 1) + cols[m]
        nbrs[m, RIGHT] = np.flatnonzero(m) + 1
        m = rows > 0
        edges[m, UP] = nh + (rows[m] - 1) * w + cols[m]
        nbrs[m, UP] = np.flatnonzero(m) - w
        m = rows < h - 1
        edges[m, DOWN] = nh + rows[m] * w + cols[m]
        nbrs[m, DOWN] = np.flatnonzero(m) + w
        edges.setflags(write=False)
        nbrs.setflags(write=False)
        return edges, nbrs

    @cached_property
    def adjacency(self) -> list[list[tuple[int, int, int]]]:
        """Per node: (edge, neighbour, direction) triples, python ints, for hot loops."""
        edges, nbrs = self.incidence
        out = []
        for e_row, n_row in zip(edges.tolist(), nbrs.tolist()):
            out.append([(e, n, d) for d, (e, n) in enumerate(zip(e_row, n_row)) if e >= 0])
        return out

    def edge_id(self, u: int, v: int) -> int:
        """Inverse of :func:`edge_endpoints` for adjacent nodes."""
        a, b = min(u, v), max(u, v)
        ra, ca = divmod(a, self.width)
        rb, cb = divmod(b, self.width)
        if ra == rb and cb == ca + 1:
            return ra * (self.width - 1) + ca
        if ca == cb and rb == ra + 1:
            return self.num_horizontal + ra * self.width + ca
        raise IndexError(f"nodes {u} and {v} are not adjacent")


def edge_endpoints(graph: GridGraph, edge: int) -> tuple[int, int]:
    if not 0 <= edge < graph.num_edges:
        raise IndexError(f"edge {edge} out of range for {graph.num_edges} edges")
    u, v = graph.endpoints[edge]
    return int(u), int(v)


def incident_edges(graph: GridGraph, node: int) -> list[tuple[int, int]]:
    if not 0 <= node < graph.num_nodes:
        raise IndexError(f"node {node} out of range for {graph.num_nodes} nodes")
    return [(e, n) for e, n, _ in graph.adjacency[node]]


@dataclass(frozen=True, eq=False)
class Image:
    graph: GridGraph
    data: np.ndarray  # (|V|, channels) float64

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim == 1:
            data = data[:, None]
        if data.shape[0] != self.graph.num_nodes:
            raise ValueError(f"image has {data.shape[0]} nodes, graph has {self.graph.num_nodes}")
        if not np.all(np.isfinite(data)):
            raise ValueError("image data must be finite")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def channels(self) -> int:
        return self.data.shape[1]

    @classmethod
    def from_array(cls, arr) -> "Image":
        """Build from an (H, W) or (H, W, C) array."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        h, w, c = arr.shape
        return cls(GridGraph(h, w), arr.reshape(h * w, c))

    def to_array(self) -> np.ndarray:
        return self.data.reshape(self.graph.height, self.graph.width, self.channels)


@dataclass(frozen=True, eq=False)
class Segmentation:
    graph: GridGraph
    labels: np.ndarray  # (|V|,) int64, 0 = unassigned

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.shape != (self.graph.num_nodes,):
            raise ValueError(f"labels must have shape ({self.graph.num_nodes},), got {labels.shape}")
        if labels.size and labels.min() < 0:
            raise ValueError("labels must be non-negative")
        labels = labels.astype(np.int64, copy=True)
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_array(cls, arr) -> "Segmentation":
        arr = np.asarray(arr)
        return cls(GridGraph(*arr.shape), arr.ravel())

    def to_array(self) -> np.ndarray:
        return self.labels.reshape(self.graph.shape)

    @property
    def complete(self) -> bool:
        return bool(np.all(self.labels != UNASSIGNED))


@dataclass(frozen=True)
class SeedSet:
    seeds: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    def __post_init__(self):
        seeds = tuple((int(n), int(l)) for n, l in self.seeds)
        nodes = [n for n, _ in seeds]
        labels = sorted(l for _, l in seeds)
        if len(set(nodes)) != len(nodes):
            raise ValueError("seed nodes must be distinct")
        if labels != list(range(1, len(seeds) + 1)):
            raise ValueError("seed labels must be distinct and consecutive from 1")
        object.__setattr__(self, "seeds", seeds)

    def __len__(self):
        return len(self.seeds)

    def __iter__(self):
        return iter(self.seeds)


def _require_complete(seg: Segmentation):
    if not seg.complete:
        raise ContractError("segmentation contains unassigned nodes")


def cut_mask(seg: Segmentation) -> np.ndarray:
    """Boolean per-edge array, True where the endpoint labels differ."""
    _require_complete(seg)
    ends = seg.graph.endpoints
    return seg.labels[ends[:, 0]] != seg.labels[ends[:, 1]]


def cut_set(seg: Segmentation) -> set[int]:
    return set(np.flatnonzero(cut_mask(seg)).tolist())


def boundary_mask(seg: Segmentation) -> np.ndarray:
    cut = cut_mask(seg)
    ends = seg.graph.endpoints[cut]
    mask = np.zeros(seg.graph.num_nodes, dtype=bool)
    mask[ends[:, 0]] = True
    mask[ends[:, 1]] = True
    return mask
