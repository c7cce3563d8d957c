"""Synthetic boundary benchmark, distance transforms, seed oracle and baselines."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .grid import GridGraph, Image, SeedSet, Segmentation, boundary_mask

MAX_RETRIES = 8


@dataclass(frozen=True)
class SynthConfig:
    height: int = 252
    width: int = 252
    sigma_noise: float = 0.3
    sigma_process: float | None = None  # None: 8 px scaled to the image size
    sigma_blur: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.height < 8 or self.width < 8:
            raise ValueError("synthetic images must be at least 8x8")
        if self.sigma_noise < 0 or self.sigma_blur < 0:
            raise ValueError("noise and blur scales must be non-negative")
        if self.sigma_process is not None and self.sigma_process <= 0:
            raise ValueError("sigma_process must be positive")

    @property
    def process_scale(self) -> float:
        if self.sigma_process is not None:
            return float(self.sigma_process)
        return 8.0 * min(self.height, self.width) / 252.0


# ---------------------------------------------------------------- distance transform

def _edt_1d(f: np.ndarray) -> np.ndarray:
    """Lower envelope of parabolas (Felzenszwalb & Huttenlocher) on one line of squared costs."""
    n = f.shape[0]
    d = np.empty(n)
    v = np.zeros(n, dtype=np.int64)
    z = np.empty(n + 1)
    k = 0
    finite = np.isfinite(f)
    start = int(np.argmax(finite)) if finite.any() else -1
    if start < 0:
        d[:] = np.inf
        return d
    v[0] = start
    z[0], z[1] = -np.inf, np.inf
    for q in range(start + 1, n):
        if not finite[q]:
            continue
        while True:
            p = v[k]
            s = ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * (q - p))
            if s <= z[k]:
                k -= 1
                continue
            break
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d[q] = (q - v[k]) ** 2 + f[v[k]]
    return d


def distance_transform_grid(mask: np.ndarray) -> np.ndarray:
    """Exact Euclidean distance to the nearest True pixel of a 2D mask."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("distance transform needs at least one reference pixel")
    f = np.where(mask, 0.0, np.inf)
    cols = np.stack([_edt_1d(f[:, j]) for j in range(f.shape[1])], axis=1)
    rows = np.stack([_edt_1d(cols[i, :]) for i in range(f.shape[0])], axis=0)
    return np.sqrt(rows)


def distance_transform(mask, graph: GridGraph | None = None) -> np.ndarray:
    """Per-node distance to the nearest True node; ``mask`` is flat or 2D."""
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim == 1:
        if graph is None:
            raise ValueError("flat masks need the graph for their shape")
        return distance_transform_grid(mask.reshape(graph.shape)).ravel()
    return distance_transform_grid(mask)


# ---------------------------------------------------------------- generation

def _merge_small(labels: np.ndarray, min_size: int) -> np.ndarray:
    labels = labels.copy()
    while True:
        ids, counts = np.unique(labels, return_counts=True)
        small = ids[counts < min_size]
        if small.size == 0 or ids.size == 1:
            break
        lab = small[0]
        region = labels == lab
        ring = ndimage.binary_dilation(region) & ~region
        nbrs, ncount = np.unique(labels[ring], return_counts=True)
        sizes = {i: c for i, c in zip(ids, counts)}
        target = max(nbrs, key=lambda n: (sizes[n], -n))
        labels[region] = target
    _, inverse = np.unique(labels, return_inverse=True)
    return inverse.reshape(labels.shape) + 1


def generate(config: SynthConfig) -> tuple[Image, Segmentation]:
    """Image and ground truth from the zero crossings of a smoothed noise field."""
    h, w = config.height, config.width
    seq = np.random.SeedSequence(config.rng_seed)
    for stream in seq.spawn(MAX_RETRIES):
        rng = np.random.default_rng(stream)
        latent = ndimage.gaussian_filter(rng.standard_normal((h, w)), config.process_scale,
                                         mode="reflect")
        sign = latent > 0
        if sign.all() or not sign.any():
            continue
        pos, npos = ndimage.label(sign)
        neg, _ = ndimage.label(~sign)
        labels = np.where(sign, pos, neg + npos)
        labels = _merge_small(labels, 2)
        gt = Segmentation(GridGraph(h, w), labels.ravel())
        edges = boundary_mask(gt).reshape(h, w).astype(np.float64)
        clean = ndimage.gaussian_filter(edges, config.sigma_blur, mode="reflect") \
            if config.sigma_blur > 0 else edges
        noise = rng.standard_normal((h, w)) * config.sigma_noise if config.sigma_noise > 0 else 0.0
        return Image.from_array(clean + noise), gt
    raise RuntimeError(f"latent field had a single sign in {MAX_RETRIES} attempts")


# ---------------------------------------------------------------- seeds

def seed_oracle(gt: Segmentation) -> SeedSet:
    """One seed per region, at the node farthest from the region boundary."""
    graph = gt.graph
    bnd = boundary_mask(gt)
    if not bnd.any():
        ring = np.zeros(graph.shape, dtype=bool)
        ring[0, :] = ring[-1, :] = ring[:, 0] = ring[:, -1] = True
        bnd = ring.ravel()
    dist = distance_transform(bnd, graph)
    seeds = []
    for label in np.unique(gt.labels):
        nodes = np.flatnonzero(gt.labels == label)
        # argmax returns the first maximum, i.e. the lowest node id
        seeds.append((int(nodes[np.argmax(dist[nodes])]), int(label)))
    return SeedSet(tuple(seeds))


# ---------------------------------------------------------------- baselines

def smooth_image(image: Image, sigma: float) -> Image:
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return image
    arr = image.to_array()
    out = np.stack([ndimage.gaussian_filter(arr[:, :, c], sigma, mode="reflect")
                    for c in range(arr.shape[2])], axis=2)
    return Image.from_array(out)


def node_to_edge(graph: GridGraph, values) -> np.ndarray:
    """Edge altitude as the larger of its two endpoint values."""
    values = np.asarray(values, dtype=np.float64).ravel()
    ends = graph.endpoints
    return np.maximum(values[ends[:, 0]], values[ends[:, 1]])


def dtws_altitudes(graph: GridGraph, g_map, threshold: float) -> np.ndarray:
    """Distance-transform watershed altitudes from a boundary probability map."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    g_map = np.asarray(g_map, dtype=np.float64).ravel()
    background = g_map < threshold
    if not background.any():
        raise ValueError("no background pixels below the threshold")
    if background.all():
        raise ValueError("no boundary pixels above the threshold")
    d = distance_transform(~background, graph)
    return node_to_edge(graph, -d)
