import csv

import numpy as np
import pytest

from msfseg.grid import GridGraph, Image, SeedSet, Segmentation, boundary_mask, cut_mask
from msfseg.models import (_StaticFeatures, _static_grad, init_params, static_altitudes)
from msfseg.msf import StaticAltitudes
from msfseg.structured import structured_loss
from msfseg.synth import seed_oracle
from msfseg.trainer import (EvalReport, TrainConfig, epoch_step, evaluate, fit, format_mean_std,
                            step_detail, write_trace)
from msfseg.metrics import ScoreReport


def decoy_line(n, cut, decoy):
    """1 x n instance: raw marks the true cut, the g channel peaks at a decoy node."""
    labels = np.array([1] * (cut + 1) + [2] * (n - cut - 1))
    gt = Segmentation(GridGraph(1, n), labels)
    raw = boundary_mask(gt).astype(float)
    g = np.full(n, 0.1)
    g[decoy] = 0.9
    return Image(gt.graph, np.stack([raw, g], axis=1)), gt, seed_oracle(gt)


def toy_corpus(rng, count=6, n=14):
    out = []
    for _ in range(count):
        cut = int(rng.integers(3, n - 6))
        out.append(decoy_line(n, cut, cut + int(rng.integers(2, 4))))
    return out


def test_config_validation():
    for bad in (dict(learning_rate=0), dict(momentum=1.0), dict(gamma=1.5), dict(epochs=0),
                dict(workers=0), dict(weight_mode="x"), dict(model_kind="g")):
        with pytest.raises(ValueError):
            TrainConfig(**bad)


def test_one_by_three_gradient():
    g = GridGraph(1, 3)
    gt = Segmentation(g, np.array([1, 1, 2]))
    seeds = SeedSet(((0, 1), (2, 2)))
    # g is high on e01 and low on e12, so the free run cuts the wrong edge
    im = Image(g, np.array([[0.0, 0.9], [1.0, 0.1], [0.0, 0.1]]))
    rng = np.random.default_rng(0)
    params = init_params("static", 2, rng)
    params.theta[:] += rng.normal(0, 0.01, params.size)
    alt = static_altitudes(params, im)
    assert alt[0] > alt[1]
    detail = step_detail(params, im, gt, seeds, TrainConfig(weight_mode="binary"))
    assert detail.stats.incorrect_count == 1
    feats = _StaticFeatures(params, im)
    expect = params.zeros_like()
    _static_grad(params, feats, [0], [1.0], expect)
    _static_grad(params, feats, [1], [-1.0], expect)
    assert np.allclose(detail.gradient, expect, rtol=0, atol=1e-14)
    assert detail.stats.loss == structured_loss(detail.analysis.weights, detail.free,
                                                detail.constrained)
    assert detail.stats.loss == pytest.approx(alt[0] - alt[1], abs=1e-14)


def test_epoch_step_rejects_bad_seeds():
    im, gt, seeds = decoy_line(10, 4, 7)
    params = init_params("static", 2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        epoch_step(params, im, gt, SeedSet(((0, 1),)))
    with pytest.raises(ValueError):
        epoch_step(params, im, gt, SeedSet(((0, 2), (9, 1))))


def test_epoch_step_does_not_mutate(rng):
    im, gt, seeds = decoy_line(12, 4, 7)
    params = init_params("static", 2, rng)
    before = params.theta.copy()
    grad, stats = epoch_step(params, im, gt, seeds)
    assert np.array_equal(params.theta, before)
    assert stats.incorrect_count > 0 and np.any(grad)


def test_zero_loss_fixed_point():
    # g already marks the true cut: nothing to correct
    im, gt, seeds = decoy_line(12, 4, 5)
    params = init_params("static", 2, np.random.default_rng(0))
    grad, stats = epoch_step(params, im, gt, seeds)
    assert stats.incorrect_count == 0 and not grad.any()
    out, hist = fit([(im, gt, seeds)] * 3, TrainConfig(epochs=4), init=params)
    assert np.array_equal(out.theta, params.theta)
    assert len(hist) == 3


def test_toy_convergence():
    corpus = toy_corpus(np.random.default_rng(7))
    for mode in ("binary", "discounted"):
        params, hist = fit(corpus, TrainConfig(learning_rate=0.1, weight_mode=mode, epochs=80))
        assert len(hist) <= 500
        assert hist[0].loss > 0
        assert all(s.loss == 0 for s in hist[-len(corpus):])


def test_fit_is_deterministic(tmp_path):
    corpus = toy_corpus(np.random.default_rng(3))
    cfg = TrainConfig(learning_rate=0.05, epochs=3, rng_seed=11)
    p1, h1 = fit(corpus, cfg)
    p2, h2 = fit(corpus, cfg)
    assert np.array_equal(p1.theta, p2.theta)
    write_trace(h1, tmp_path / "a.csv")
    write_trace(h2, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    rows = list(csv.reader(open(tmp_path / "a.csv")))
    assert rows[0] == ["step", "loss", "perceptron_loss", "incorrect_count", "gradient_norm", "arand"]
    assert len(rows) == len(h1) + 1
    with pytest.raises(ValueError):
        fit([], cfg)
    with pytest.raises(ValueError):
        fit(corpus, cfg, init=init_params("g", 2, np.random.default_rng(0)))


def test_async_workers_smoke():
    corpus = toy_corpus(np.random.default_rng(5))
    params, hist = fit(corpus, TrainConfig(learning_rate=0.05, epochs=2, workers=3))
    assert len(hist) == 2 * len(corpus)
    assert sorted(s.step for s in hist) == list(range(len(hist)))
    assert np.all(np.isfinite(params.theta))


def test_dynamic_fit_runs():
    corpus = toy_corpus(np.random.default_rng(9), count=3)
    params, hist = fit(corpus, TrainConfig(learning_rate=0.05, epochs=2, model_kind="dynamic"))
    assert params.architecture == "dynamic" and len(hist) >= 3
    assert all(np.isfinite(s.loss) for s in hist)


def test_evaluate_and_format():
    corpus = [decoy_line(12, c, c + 1) for c in (3, 4, 5)]
    cuts = {id(im): cut_mask(gt).astype(float) for im, gt, _ in corpus}
    perfect = evaluate(lambda im: StaticAltitudes(cuts[id(im)]), corpus, tolerance=0)
    assert len(perfect.per_image) == 3
    assert perfect.mean("arand") == 0.0
    assert perfect.mean("voi_split") == perfect.mean("voi_merge") == 0.0
    decoyed = evaluate(init_params("static", 2, np.random.default_rng(0)), corpus, tolerance=0)
    assert decoyed.mean("arand") > 0
    assert format_mean_std(5.8, 0.8) == "5.8 ± 0.8"
    r = EvalReport([ScoreReport(0.05, 0, 0, 10), ScoreReport(0.07, 0, 0, 10)])
    assert r.summary("arand", scale=100) == "6.0 ± 1.4"
