"""Rand error and variation of information with boundary tolerance masking."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Segmentation, boundary_mask


@dataclass(frozen=True)
class ScoreReport:
    arand: float
    voi_split: float
    voi_merge: float
    scored_nodes: int


def contingency(pred: Segmentation, gt: Segmentation, mask=None) -> dict:
    """Counts of (pred label, gt label) over nodes where ``mask`` is True."""
    p, g = _masked(pred, gt, mask)
    pairs, counts = np.unique(np.stack([p, g], axis=1), axis=0, return_counts=True)
    return {(int(a), int(b)): int(c) for (a, b), c in zip(pairs, counts)}


def _masked(pred, gt, mask):
    if pred.graph != gt.graph:
        raise ValueError(f"graph mismatch: {pred.graph} vs {gt.graph}")
    if mask is None:
        return pred.labels, gt.labels
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != pred.labels.shape:
        raise ValueError("mask length must equal the node count")
    return pred.labels[mask], gt.labels[mask]


def tolerance_mask(gt: Segmentation, tolerance: float) -> np.ndarray:
    """Nodes farther than ``tolerance`` from the ground-truth boundary."""
    from .synth import distance_transform

    if tolerance < 0:
        raise ValueError("tolerance must be non-negative")
    bnd = boundary_mask(gt)
    if tolerance == 0 or not bnd.any():
        return np.ones(gt.graph.num_nodes, dtype=bool)
    return distance_transform(bnd, gt.graph) > tolerance


def _table(pred, gt, tolerance):
    mask = tolerance_mask(gt, tolerance)
    p, g = _masked(pred, gt, mask)
    if p.size < 2:
        raise ValueError(f"only {p.size} nodes left after tolerance masking")
    _, pi = np.unique(p, return_inverse=True)
    _, gi = np.unique(g, return_inverse=True)
    table = np.zeros((pi.max() + 1, gi.max() + 1))
    np.add.at(table, (pi.ravel(), gi.ravel()), 1.0)
    return table


def _comb2(x):
    return x * (x - 1) / 2.0


def arand(pred: Segmentation, gt: Segmentation, tolerance: float = 0.0,
          adapted: bool = False) -> float:
    """One minus the Rand index over scored node pairs.

    ``adapted=True`` gives the CREMI adapted Rand error instead,
    1 - 2 sum n_ij^2 / (sum a_i^2 + sum b_j^2).
    """
    t = _table(pred, gt, tolerance)
    a, b = t.sum(axis=1), t.sum(axis=0)
    if adapted:
        return float(1.0 - 2.0 * np.sum(t * t) / (np.sum(a * a) + np.sum(b * b)))
    n = t.sum()
    pairs = _comb2(n)
    both = _comb2(t).sum()
    agree = pairs + 2.0 * both - _comb2(a).sum() - _comb2(b).sum()
    return float(1.0 - agree / pairs)


def _entropy_terms(t):
    n = t.sum()
    pij = t[t > 0] / n
    pa = t.sum(axis=1) / n
    pb = t.sum(axis=0) / n
    h_joint = -np.sum(pij * np.log(pij))
    h_a = -np.sum(pa[pa > 0] * np.log(pa[pa > 0]))
    h_b = -np.sum(pb[pb > 0] * np.log(pb[pb > 0]))
    return h_joint, h_a, h_b


def voi(pred: Segmentation, gt: Segmentation, tolerance: float = 0.0) -> tuple[float, float]:
    """(split, merge) = (H(pred | gt), H(gt | pred)) in nats."""
    h_joint, h_pred, h_gt = _entropy_terms(_table(pred, gt, tolerance))
    split = max(0.0, h_joint - h_gt)
    merge = max(0.0, h_joint - h_pred)
    return float(split), float(merge)


def score(pred: Segmentation, gt: Segmentation, tolerance: float = 0.0,
          adapted: bool = False) -> ScoreReport:
    split, merge = voi(pred, gt, tolerance)
    scored = int(tolerance_mask(gt, tolerance).sum())
    return ScoreReport(arand(pred, gt, tolerance, adapted), split, merge, scored)
