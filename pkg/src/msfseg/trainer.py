"""Structured training loop and evaluation."""
from __future__ import annotations

import csv
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import metrics
from .grid import Image, SeedSet, Segmentation, cut_set
from .models import (DEFAULT_TRUNCATE, ModelParams, grad_structured, init_params, provider_for)
from .msf import GrowthRecord, grow, segmentation_of
from .structured import ErrorAnalysis, analyze, perceptron_loss, structured_loss

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-2
    momentum: float = 0.9
    gamma: float = 0.7
    epochs: int = 1
    workers: int = 1
    rng_seed: int = 0
    weight_mode: str = "discounted"
    model_kind: str = "static"
    truncate: int = DEFAULT_TRUNCATE
    max_grad_norm: float | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must lie in [0, 1]")
        if self.epochs < 1 or self.workers < 1:
            raise ValueError("epochs and workers must be positive")
        if self.weight_mode not in ("binary", "discounted"):
            raise ValueError(f"unknown weight_mode {self.weight_mode!r}")
        if self.model_kind not in ("static", "dynamic"):
            raise ValueError(f"unknown model_kind {self.model_kind!r}")


@dataclass
class EpochStats:
    loss: float
    perceptron_loss: float
    incorrect_count: int
    arand: float
    gradient_norm: float
    step: int = 0
    image: int = -1


@dataclass
class StepDetail:
    gradient: np.ndarray
    stats: EpochStats
    free: GrowthRecord
    constrained: GrowthRecord
    analysis: ErrorAnalysis


def check_seeds(gt: Segmentation, seeds: SeedSet):
    regions = np.unique(gt.labels)
    if len(seeds) != regions.size:
        raise ValueError(f"{len(seeds)} seeds for {regions.size} ground-truth regions")
    for node, label in seeds:
        if gt.labels[node] != label:
            raise ValueError(f"seed at node {node} has label {label}, ground truth says {gt.labels[node]}")


def step_detail(params: ModelParams, image: Image, gt: Segmentation, seeds: SeedSet,
                config: TrainConfig | None = None) -> StepDetail:
    config = config or TrainConfig(model_kind=params.architecture)
    check_seeds(gt, seeds)
    provider = provider_for(params)
    free = grow(image.graph, image, seeds, provider)
    constrained = grow(image.graph, image, seeds, provider, forbidden=cut_set(gt))
    analysis = analyze(free, constrained, config.weight_mode, config.gamma,
                       strict=params.architecture == "static")
    grad = grad_structured(params, analysis.weights, free, constrained, image, config.truncate)
    pred = segmentation_of(free)
    stats = EpochStats(
        loss=structured_loss(analysis.weights, free, constrained),
        perceptron_loss=perceptron_loss(free, constrained),
        incorrect_count=len(analysis.incorrect_nodes),
        arand=metrics.arand(pred, gt) if pred.complete else 1.0,
        gradient_norm=float(np.linalg.norm(grad)),
    )
    return StepDetail(grad, stats, free, constrained, analysis)


def epoch_step(params: ModelParams, image: Image, gt: Segmentation, seeds: SeedSet,
               config: TrainConfig | None = None) -> tuple[np.ndarray, EpochStats]:
    """Free and constrained growth, root-edge analysis and the loss gradient.

    Does not touch ``params``.
    """
    detail = step_detail(params, image, gt, seeds, config)
    return detail.gradient, detail.stats


class _Optimizer:
    """SGD with momentum; the gradient is scaled by 1 / |V| of its image."""

    def __init__(self, config: TrainConfig, size: int):
        self.config = config
        self.velocity = np.zeros(size)

    def apply(self, theta: np.ndarray, grad: np.ndarray, num_nodes: int):
        g = grad / num_nodes
        limit = self.config.max_grad_norm
        if limit is not None:
            norm = np.linalg.norm(g)
            if norm > limit:
                g = g * (limit / norm)
        self.velocity = self.config.momentum * self.velocity - self.config.learning_rate * g
        theta += self.velocity


def fit(corpus, config: TrainConfig, init: ModelParams | None = None, on_step=None):
    """Train on ``corpus``, a list of (augmented image, gt, seeds).

    With one worker the run is a deterministic function of corpus and
    config. ``on_step(step, params, stats)`` is called after every update.
    """
    if not corpus:
        raise ValueError("training corpus is empty")
    rng = np.random.default_rng(config.rng_seed)
    if init is None:
        params = init_params(config.model_kind, corpus[0][0].channels, rng)
    else:
        if init.architecture != config.model_kind:
            raise ValueError(f"init has architecture {init.architecture}, config wants {config.model_kind}")
        params = init.copy()
    if config.workers > 1:
        return _fit_async(corpus, config, params, on_step)

    opt = _Optimizer(config, params.size)
    history = []
    step = 0
    for epoch in range(config.epochs):
        epoch_losses = []
        for idx in rng.permutation(len(corpus)):
            image, gt, seeds = corpus[idx]
            grad, stats = epoch_step(params, image, gt, seeds, config)
            _check_finite(grad, step, idx)
            opt.apply(params.theta, grad, image.graph.num_nodes)
            stats.step, stats.image = step, int(idx)
            history.append(stats)
            epoch_losses.append(stats.loss)
            if on_step is not None:
                on_step(step, params, stats)
            step += 1
        if all(loss == 0 for loss in epoch_losses):
            log.info("epoch %d: zero loss on every image, stopping", epoch)
            break
    return params, history


def _check_finite(grad, step, idx):
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError(f"non-finite gradient at step {step} (image {idx})")


def _fit_async(corpus, config, params, on_step):
    """Workers snapshot theta, compute one gradient on a random image and submit it.

    Submissions are applied in arrival order under a lock; snapshots are
    taken under the same lock, so no worker ever reads a half-written vector.
    """
    lock = threading.Lock()
    opt = _Optimizer(config, params.size)
    total = config.epochs * len(corpus)
    history = []
    counter = {"next": 0}
    worker_rngs = [np.random.default_rng(s)
                   for s in np.random.SeedSequence(config.rng_seed).spawn(config.workers)]

    def work(wrng):
        while True:
            with lock:
                if counter["next"] >= total:
                    return
                counter["next"] += 1
                snapshot = params.copy()
            idx = int(wrng.integers(len(corpus)))
            image, gt, seeds = corpus[idx]
            grad, stats = epoch_step(snapshot, image, gt, seeds, config)
            with lock:
                _check_finite(grad, len(history), idx)
                opt.apply(params.theta, grad, image.graph.num_nodes)
                stats.step, stats.image = len(history), idx
                history.append(stats)
                if on_step is not None:
                    on_step(stats.step, params, stats)

    with ThreadPoolExecutor(config.workers) as pool:
        for f in [pool.submit(work, w) for w in worker_rngs]:
            f.result()
    return params, history


TRACE_FIELDS = ("step", "loss", "perceptron_loss", "incorrect_count", "gradient_norm", "arand")


def write_trace(history, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_FIELDS)
        for s in history:
            writer.writerow([s.step, repr(float(s.loss)), repr(float(s.perceptron_loss)),
                             s.incorrect_count, repr(float(s.gradient_norm)), repr(float(s.arand))])


# ---------------------------------------------------------------- evaluation

@dataclass
class EvalReport:
    per_image: list = field(default_factory=list)  # ScoreReport per image

    def column(self, name):
        return np.array([getattr(s, name) for s in self.per_image], dtype=np.float64)

    def mean(self, name) -> float:
        return float(self.column(name).mean())

    def std(self, name) -> float:
        col = self.column(name)
        return float(col.std(ddof=1)) if col.size > 1 else 0.0

    def summary(self, name, scale: float = 1.0, digits: int = 1) -> str:
        return format_mean_std(self.mean(name) * scale, self.std(name) * scale, digits)


def format_mean_std(mean: float, std: float, digits: int = 1) -> str:
    return f"{mean:.{digits}f} ± {std:.{digits}f}"


def segment(provider, image: Image, seeds: SeedSet) -> Segmentation:
    return segmentation_of(grow(image.graph, image, seeds, provider))


def evaluate(model, corpus, tolerance: float = 2.0, adapted: bool = False) -> EvalReport:
    """Grow every (image, gt, seeds) item with ``model`` and score it.

    ``model`` is either model parameters or a callable mapping an image to
    an altitude provider (for the baselines).
    """
    report = EvalReport()
    for image, gt, seeds in corpus:
        provider = provider_for(model) if isinstance(model, ModelParams) else model(image)
        pred = segment(provider, image, seeds)
        report.per_image.append(metrics.score(pred, gt, tolerance, adapted))
    return report
