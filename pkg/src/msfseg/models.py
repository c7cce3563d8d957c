"""Learnable altitude providers with hand-written gradients.

Three architectures share one patch-perceptron body (a (2R+1)^2 window of
every channel, one tanh hidden layer):

* ``g``: logistic boundary probability per node.
* ``static``: edge altitude from the window at the target node plus a
  direction code, symmetrised over both orientations of the edge, plus a
  skip term on the larger g-probability of the two endpoints.
* ``dynamic``: the static altitude plus a correction computed from the
  same window, the relative-assignment window around the target, and a
  gated recurrent state carried along the growth paths.
"""
from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from .grid import DOWN, LEFT, RIGHT, UP, ContractError, GridGraph, Image, UNASSIGNED, boundary_mask
from .msf import GrowthRecord, path_to_seed

ARCHITECTURES = ("g", "static", "dynamic")
DEFAULT_RADIUS = 3
DEFAULT_HIDDEN = 32
DEFAULT_STATE = 16
DEFAULT_TRUNCATE = 32

ME, NOBODY, THEM = 0, 1, 2


# ---------------------------------------------------------------- features

def _reflect(idx: np.ndarray, n: int) -> np.ndarray:
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - idx, idx)


_PATCH_CACHE: dict = {}


def patch_index(graph: GridGraph, radius: int) -> np.ndarray:
    """(|V|, (2R+1)^2) node ids of each node's window, row-major, reflect padded."""
    key = (graph.height, graph.width, radius)
    idx = _PATCH_CACHE.get(key)
    if idx is None:
        offs = np.arange(-radius, radius + 1)
        rows, cols = np.divmod(np.arange(graph.num_nodes), graph.width)
        rr = _reflect(rows[:, None, None] + offs[None, :, None], graph.height)
        cc = _reflect(cols[:, None, None] + offs[None, None, :], graph.width)
        idx = (rr * graph.width + cc).reshape(graph.num_nodes, -1)
        idx.setflags(write=False)
        if len(_PATCH_CACHE) > 64:
            _PATCH_CACHE.clear()
        _PATCH_CACHE[key] = idx
    return idx


def extract_patch(image: Image, center: int, radius: int) -> np.ndarray:
    if radius < 0:
        raise ValueError("radius must be non-negative")
    return image.data[patch_index(image.graph, radius)[center]].ravel()


def patch_matrix(image: Image, radius: int) -> np.ndarray:
    idx = patch_index(image.graph, radius)
    return image.data[idx].reshape(image.graph.num_nodes, -1)


def project_relative(assignment, reference_label: int) -> np.ndarray:
    """One-hot (me, nobody, them) coding of every node relative to ``reference_label``."""
    if reference_label < 1:
        raise ValueError("reference label must be positive")
    a = np.asarray(assignment)
    out = np.zeros((a.shape[0], 3))
    out[np.arange(a.shape[0]), _codes(a, reference_label)] = 1.0
    return out


def _codes(labels, ref):
    return np.where(labels == UNASSIGNED, NOBODY, np.where(labels == ref, ME, THEM))


def direction(graph: GridGraph, u: int, v: int) -> int:
    diff = v - u
    if diff == 1:
        return RIGHT
    if diff == -1:
        return LEFT
    if diff == graph.width:
        return DOWN
    if diff == -graph.width:
        return UP
    raise ValueError(f"nodes {u}, {v} are not adjacent")


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# ---------------------------------------------------------------- parameters

@dataclass
class ModelParams:
    architecture: str
    theta: np.ndarray
    layout: OrderedDict  # name -> (offset, shape)
    channels: int
    patch_radius: int = DEFAULT_RADIUS
    hidden_width: int = DEFAULT_HIDDEN
    r: int = 0
    _views: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        total = sum(int(np.prod(s)) for _, s in self.layout.values())
        if total != self.theta.size:
            raise ValueError(f"layout covers {total} values, theta has {self.theta.size}")

    def __getitem__(self, name):
        view = self._views.get(name)
        if view is None or view.base is not self.theta:
            off, shape = self.layout[name]
            view = self.theta[off:off + int(np.prod(shape))].reshape(shape)
            self._views[name] = view
        return view

    @property
    def size(self) -> int:
        return self.theta.size

    def with_theta(self, theta) -> "ModelParams":
        return ModelParams(self.architecture, np.array(theta, dtype=np.float64), self.layout,
                           self.channels, self.patch_radius, self.hidden_width, self.r)

    def copy(self) -> "ModelParams":
        return self.with_theta(self.theta)

    def zeros_like(self) -> np.ndarray:
        return np.zeros_like(self.theta)

    def grad_view(self, grad: np.ndarray, name: str) -> np.ndarray:
        off, shape = self.layout[name]
        return grad[off:off + int(np.prod(shape))].reshape(shape)

    def header(self) -> dict:
        return {
            "architecture": self.architecture,
            "patch_radius": self.patch_radius,
            "r": self.r,
            "channels": self.channels,
            "hidden_width": self.hidden_width,
            "layout": ";".join(f"{k}:{'x'.join(map(str, s))}" for k, (_, s) in self.layout.items()),
        }

    def require(self, architecture: str, channels: int | None = None):
        if self.architecture != architecture:
            raise ValueError(f"expected {architecture!r} parameters, got {self.architecture!r}")
        if channels is not None and channels != self.channels:
            raise ValueError(f"model expects {self.channels} channels, image has {channels}")


def _layout_blocks(architecture, channels, radius, hidden, r):
    p = (2 * radius + 1) ** 2
    if architecture == "g":
        return [("g.w", (p * channels, hidden)), ("g.b", (hidden,)), ("g.out", (hidden,)),
                ("g.bias", (1,))]
    static = [("s.w", (p * channels, hidden)), ("s.dir", (4, hidden)), ("s.b", (hidden,)),
              ("s.out", (hidden,)), ("s.bias", (1,)), ("s.skip", (1,))]
    if architecture == "static":
        return static
    if architecture == "dynamic":
        return static + [
            ("d.w", (p * channels, hidden)), ("d.dir", (4, hidden)), ("d.proj", (p, 3, hidden)),
            ("d.b", (hidden,)),
            ("gru.wz", (r, hidden)), ("gru.wr", (r, hidden)), ("gru.wc", (r, hidden)),
            ("gru.uz", (r, r)), ("gru.ur", (r, r)), ("gru.uc", (r, r)),
            ("gru.bz", (r,)), ("gru.br", (r,)), ("gru.bc", (r,)),
            ("d.out_a", (hidden,)), ("d.out_h", (r,)), ("d.bias", (1,)),
        ]
    raise ValueError(f"unknown architecture {architecture!r}")


def make_layout(architecture, channels, radius=DEFAULT_RADIUS, hidden=DEFAULT_HIDDEN, r=0):
    layout = OrderedDict()
    off = 0
    for name, shape in _layout_blocks(architecture, channels, radius, hidden, r):
        layout[name] = (off, tuple(int(s) for s in shape))
        off += int(np.prod(shape))
    return layout


# blocks left at zero by init_params; readouts start silent so a fresh
# static model is plain watershed on g and a fresh dynamic one equals its static part
_ZERO_INIT = {"s.out", "s.bias", "d.out_a", "d.out_h", "d.bias"}


def init_params(architecture: str, channels: int, rng: np.random.Generator,
                radius: int = DEFAULT_RADIUS, hidden: int = DEFAULT_HIDDEN,
                r: int | None = None) -> ModelParams:
    """Glorot-uniform weights per block, zero biases."""
    if r is None:
        r = DEFAULT_STATE if architecture == "dynamic" else 0
    if architecture != "dynamic":
        r = 0
    layout = make_layout(architecture, channels, radius, hidden, r)
    params = ModelParams(architecture, np.zeros(sum(int(np.prod(s)) for _, s in layout.values())),
                         layout, channels, radius, hidden, r)
    p = (2 * radius + 1) ** 2
    for name, (_, shape) in layout.items():
        if name in _ZERO_INIT or name.endswith((".b", ".bias", ".bz", ".br", ".bc")):
            continue
        if name == "s.skip":
            params[name][...] = 1.0
            continue
        if name == "g.out":
            fan_in, fan_out = shape[0], 1
        elif name == "d.proj":
            fan_in, fan_out = 3 * p, shape[2]
        elif name in ("s.dir", "d.dir"):
            fan_in, fan_out = p * channels + 4, shape[1]
        elif name.startswith("gru."):
            fan_in, fan_out = shape[1], shape[0]
        else:
            fan_in, fan_out = shape
        lim = math.sqrt(6.0 / (fan_in + fan_out))
        params[name][...] = rng.uniform(-lim, lim, size=shape)
    return params


def dynamic_from_static(static: ModelParams, rng: np.random.Generator,
                        r: int = DEFAULT_STATE) -> ModelParams:
    """Dynamic parameters whose static blocks are copied from ``static``.

    The correction readouts start at zero, so the result predicts exactly
    the static altitudes until training moves them.
    """
    static.require("static")
    dyn = init_params("dynamic", static.channels, rng, static.patch_radius, static.hidden_width, r)
    for name in static.layout:
        dyn[name][...] = static[name]
    return dyn


def params_from_file(header: dict, theta: np.ndarray) -> ModelParams:
    arch = header["architecture"]
    channels = int(header["channels"])
    radius = int(header["patch_radius"])
    hidden = int(header["hidden_width"])
    r = int(header["r"])
    layout = make_layout(arch, channels, radius, hidden, r)
    params = ModelParams(arch, theta, layout, channels, radius, hidden, r)
    if params.header()["layout"] != header.get("layout"):
        raise ValueError("model file layout does not match its architecture")
    return params


# ---------------------------------------------------------------- unstructured g

def _g_forward(params: ModelParams, x: np.ndarray):
    a = np.tanh(x @ params["g.w"] + params["g.b"])
    z = a @ params["g.out"] + params["g.bias"][0]
    return a, z


def g_map(params: ModelParams, image: Image) -> np.ndarray:
    params.require("g", image.channels)
    _, z = _g_forward(params, patch_matrix(image, params.patch_radius))
    return _sigmoid(z)


def predict_g(params: ModelParams, image: Image, node: int) -> float:
    params.require("g", image.channels)
    x = extract_patch(image, node, params.patch_radius)[None, :]
    _, z = _g_forward(params, x)
    return float(_sigmoid(z)[0])


def augment(image: Image, g_params: ModelParams) -> Image:
    """Append the g boundary probability as an extra channel."""
    if g_params.channels != image.channels:
        raise ValueError(f"g expects {g_params.channels} channels, image has {image.channels}")
    prob = g_map(g_params, image)
    return Image(image.graph, np.concatenate([image.data, prob[:, None]], axis=1))


@dataclass
class GConfig:
    steps: int = 3000
    batch_size: int = 256
    learning_rate: float = 0.05
    momentum: float = 0.9
    rng_seed: int = 0
    patch_radius: int = DEFAULT_RADIUS
    hidden_width: int = DEFAULT_HIDDEN


def cross_entropy(prob_logit: np.ndarray, target: np.ndarray) -> float:
    z = prob_logit
    # log(1 + exp(-|z|)) + max(z, 0) - z * t
    return float(np.mean(np.logaddexp(0.0, z) - z * target))


def train_g(corpus, config: GConfig | None = None):
    """Fit g to the boundary masks of ``corpus`` by minibatch SGD with momentum.

    Returns the parameters and the per-step minibatch cross-entropy.
    """
    config = config or GConfig()
    if not corpus:
        raise ValueError("training corpus is empty")
    rng = np.random.default_rng(config.rng_seed)
    channels = corpus[0][0].channels
    params = init_params("g", channels, rng, config.patch_radius, config.hidden_width)
    by_shape = {}
    for image, gt in corpus:
        if image.channels != channels:
            raise ValueError("all corpus images must have the same channel count")
        by_shape.setdefault(image.graph.shape, []).append((image, gt))
    groups = []
    for shape, items in sorted(by_shape.items()):
        data = np.stack([im.data for im, _ in items])
        target = np.stack([boundary_mask(gt).astype(np.float64) for _, gt in items])
        groups.append((data, target, patch_index(items[0][0].graph, config.patch_radius)))
    sizes = np.array([g[0].shape[0] * g[0].shape[1] for g in groups], dtype=np.float64)

    velocity = np.zeros_like(params.theta)
    trace = []
    for _ in range(config.steps):
        gi = int(rng.choice(len(groups), p=sizes / sizes.sum())) if len(groups) > 1 else 0
        data, target, pidx = groups[gi]
        img = rng.integers(0, data.shape[0], size=config.batch_size)
        node = rng.integers(0, data.shape[1], size=config.batch_size)
        x = data[img[:, None], pidx[node]].reshape(config.batch_size, -1)
        t = target[img, node]
        a, z = _g_forward(params, x)
        loss = cross_entropy(z, t)
        dz = (_sigmoid(z) - t) / config.batch_size
        grad = params.zeros_like()
        params.grad_view(grad, "g.out")[...] = a.T @ dz
        params.grad_view(grad, "g.bias")[...] = dz.sum()
        dpre = np.outer(dz, params["g.out"]) * (1.0 - a * a)
        params.grad_view(grad, "g.w")[...] = x.T @ dpre
        params.grad_view(grad, "g.b")[...] = dpre.sum(axis=0)
        velocity = config.momentum * velocity - config.learning_rate * grad
        params.theta += velocity
        trace.append(loss)
        if not math.isfinite(loss):
            raise FloatingPointError("g training diverged")
    return params, trace


# ---------------------------------------------------------------- static altitude

class _StaticFeatures:
    """Per-image precomputation shared by the static and dynamic models."""

    def __init__(self, params: ModelParams, image: Image):
        graph = image.graph
        self.graph = graph
        self.x = patch_matrix(image, params.patch_radius)
        ends = graph.endpoints
        self.a, self.b = ends[:, 0], ends[:, 1]
        horiz = np.arange(graph.num_edges) < graph.num_horizontal
        self.dir_ab = np.where(horiz, RIGHT, DOWN)
        self.dir_ba = np.where(horiz, LEFT, UP)
        g = image.data[:, -1]
        self.base = np.maximum(g[self.a], g[self.b])
        xw = self.x @ params["s.w"] + params["s.b"]
        self.act_ab = np.tanh(xw[self.b] + params["s.dir"][self.dir_ab])
        self.act_ba = np.tanh(xw[self.a] + params["s.dir"][self.dir_ba])
        self.altitude = (params["s.skip"][0] * self.base + params["s.bias"][0]
                         + 0.5 * (self.act_ab @ params["s.out"] + self.act_ba @ params["s.out"]))


def static_altitudes(params: ModelParams, image: Image) -> np.ndarray:
    if params.architecture not in ("static", "dynamic"):
        raise ValueError(f"{params.architecture!r} parameters have no static part")
    if params.channels != image.channels:
        raise ValueError(f"model expects {params.channels} channels, image has {image.channels}")
    return _StaticFeatures(params, image).altitude


def predict_static(params, image, edge, u=None, v=None, assignment=None, hidden=None):
    """Altitude of ``edge``; the endpoints, assignment and hidden state are ignored."""
    params.require("static", image.channels)
    return float(static_altitudes(params, image)[edge]), np.zeros(0)


def _static_grad(params, feats: _StaticFeatures, edges, weights, grad):
    """Accumulate sum_k weights[k] * d f_static(edges[k]) / d theta into ``grad``."""
    if len(edges) == 0:
        return
    edges = np.asarray(edges)
    w = np.asarray(weights, dtype=np.float64)
    a1, a2 = feats.act_ab[edges], feats.act_ba[edges]
    out = params["s.out"]
    params.grad_view(grad, "s.out")[...] += 0.5 * (w @ a1 + w @ a2)
    params.grad_view(grad, "s.bias")[...] += w.sum()
    params.grad_view(grad, "s.skip")[...] += w @ feats.base[edges]
    d1 = 0.5 * w[:, None] * out * (1.0 - a1 * a1)
    d2 = 0.5 * w[:, None] * out * (1.0 - a2 * a2)
    params.grad_view(grad, "s.w")[...] += feats.x[feats.b[edges]].T @ d1 + feats.x[feats.a[edges]].T @ d2
    gdir = params.grad_view(grad, "s.dir")
    np.add.at(gdir, feats.dir_ab[edges], d1)
    np.add.at(gdir, feats.dir_ba[edges], d2)
    params.grad_view(grad, "s.b")[...] += d1.sum(axis=0) + d2.sum(axis=0)


class StaticModel:
    """Altitude provider evaluating a static model on one image per bind."""

    hidden_size = 0

    def __init__(self, params: ModelParams):
        if params.architecture != "static":
            raise ValueError("StaticModel needs static parameters")
        self.params = params

    def bind(self, graph, image):
        if image is None or image.graph != graph:
            raise ValueError("static model needs the image of the grown graph")
        self.params.require("static", image.channels)
        return _StaticSession(static_altitudes(self.params, image))


class _StaticSession:
    def __init__(self, altitudes):
        self.altitudes = altitudes
        self._list = altitudes.tolist()

    def edge_altitudes(self):
        return self.altitudes

    def evaluate(self, edge, u, v, assignment, hidden):
        return self._list[edge], None


# ---------------------------------------------------------------- dynamic altitude

class _DynamicFeatures(_StaticFeatures):
    def __init__(self, params: ModelParams, image: Image):
        super().__init__(params, image)
        p = self.params = params
        self.pidx = patch_index(image.graph, params.patch_radius)
        self.dw = self.x @ p["d.w"] + p["d.b"]
        self.prows = np.arange(self.pidx.shape[1])
        self.proj_rows = self.prows * 3
        self.proj = p["d.proj"].reshape(-1, p.hidden_width)
        self.ddir = p["d.dir"]
        self.static_list = self.altitude.tolist()
        self.r = p.r
        self.wg = np.concatenate([p["gru.wz"], p["gru.wr"]])
        self.ug = np.concatenate([p["gru.uz"], p["gru.ur"]])
        self.bg = np.concatenate([p["gru.bz"], p["gru.br"]])
        self.wc, self.uc, self.bc = p["gru.wc"], p["gru.uc"], p["gru.bc"]
        self.out_a, self.out_h, self.bias = p["d.out_a"], p["d.out_h"], float(p["d.bias"][0])

    def step(self, edge, u, v, labels_window, ref, h):
        """One dynamic evaluation; returns altitude, new state and the cache for backprop."""
        # me -> 0, nobody -> 1, them -> 2 (ref is never 0)
        codes = 2 - 2 * (labels_window == ref) - (labels_window == UNASSIGNED)
        d = direction(self.graph, u, v)
        pre = self.dw[v] + self.ddir[d] + self.proj[self.proj_rows + codes].sum(axis=0)
        a = np.tanh(pre)
        r = self.r
        gates = _sigmoid(self.wg @ a + self.ug @ h + self.bg)
        z, rg = gates[:r], gates[r:]
        c = np.tanh(self.wc @ a + self.uc @ (rg * h) + self.bc)
        h_new = (1.0 - z) * h + z * c
        alt = self.static_list[edge] + a @ self.out_a + h_new @ self.out_h + self.bias
        return float(alt), h_new, (edge, v, d, codes, a, z, rg, c, h)


def _check_dynamic_inputs(params, assignment, u, hidden_u):
    if assignment[u] == UNASSIGNED:
        raise ContractError(f"source node {u} is unassigned")
    if hidden_u is None or len(hidden_u) != params.r:
        got = None if hidden_u is None else len(hidden_u)
        raise ValueError(f"hidden state must have length {params.r}, got {got}")


def predict_dynamic(params, image, edge, u, v, assignment, hidden_u):
    params.require("dynamic", image.channels)
    assignment = np.asarray(assignment)
    _check_dynamic_inputs(params, assignment, u, hidden_u)
    feats = _DynamicFeatures(params, image)
    alt, h, _ = feats.step(edge, u, v, assignment[feats.pidx[v]], assignment[u],
                           np.asarray(hidden_u, dtype=np.float64))
    return alt, h


class DynamicModel:
    """Altitude provider for the dynamic model; evaluation is on demand."""

    def __init__(self, params: ModelParams):
        if params.architecture != "dynamic":
            raise ValueError("DynamicModel needs dynamic parameters")
        self.params = params
        self.hidden_size = params.r

    def bind(self, graph, image):
        if image is None or image.graph != graph:
            raise ValueError("dynamic model needs the image of the grown graph")
        self.params.require("dynamic", image.channels)
        return _DynamicSession(_DynamicFeatures(self.params, image))


class _DynamicSession:
    def __init__(self, feats):
        self.feats = feats
        self.pidx = feats.pidx

    def evaluate(self, edge, u, v, assignment, hidden):
        alt, h, _ = self.feats.step(edge, u, v, assignment[self.pidx[v]], assignment[u], hidden)
        return alt, h


def provider_for(params: ModelParams):
    if params.architecture == "static":
        return StaticModel(params)
    if params.architecture == "dynamic":
        return DynamicModel(params)
    raise ValueError(f"{params.architecture!r} parameters are not an altitude model")


# ---------------------------------------------------------------- replay and gradients

def _replay_chain(feats: _DynamicFeatures, record: GrowthRecord, edge: int, truncate):
    """Recompute the recurrent chain that produced ``edge``'s altitude in ``record``."""
    src = int(record.evaluated_source[edge])
    if src < 0:
        raise ContractError(f"edge {edge} was never evaluated in this record")
    chain = path_to_seed(record, src)
    if truncate is not None:
        chain = chain[max(0, len(chain) - truncate):]
    steps = [(e, int(record.evaluated_source[e])) for e in chain] + [(edge, src)]
    # zero at seeds; a constant cut point when the chain is truncated
    h = record.hidden[steps[0][1]].copy()
    ends = feats.graph.endpoints
    caches = []
    alt = None
    for e, s in steps:
        a, b = ends[e]
        t = int(b) if s == a else int(a)
        window = feats.pidx[t]
        horizon = max(int(record.order[s]), record.num_seeds - 1)
        ordw = record.order[window]
        labels = np.where((ordw >= 0) & (ordw <= horizon), record.assignment[window], UNASSIGNED)
        alt, h, cache = feats.step(e, s, t, labels, int(record.assignment[s]), h)
        caches.append(cache)
    return alt, caches


def _dynamic_chain_grad(params, feats, caches, weight, grad):
    p = params
    g = {name: params.grad_view(grad, name) for name in params.layout
         if name.startswith(("d.", "gru."))}
    g_proj = g["d.proj"].reshape(-1, params.hidden_width)
    dh = np.zeros(params.r)
    for k in range(len(caches) - 1, -1, -1):
        edge, v, d, codes, a, z, rg, c, h = caches[k]
        da = np.zeros_like(a)
        if k == len(caches) - 1:
            h_new = (1.0 - z) * h + z * c
            g["d.out_a"] += weight * a
            g["d.out_h"] += weight * h_new
            g["d.bias"] += weight
            da += weight * p["d.out_a"]
            dh = dh + weight * p["d.out_h"]
        dz = dh * (c - h)
        dc = dh * z
        dh_prev = dh * (1.0 - z)
        dqc = dc * (1.0 - c * c)
        g["gru.wc"] += np.outer(dqc, a)
        g["gru.uc"] += np.outer(dqc, rg * h)
        g["gru.bc"] += dqc
        da += p["gru.wc"].T @ dqc
        drh = p["gru.uc"].T @ dqc
        drg = drh * h
        dh_prev += drh * rg
        dqz = dz * z * (1.0 - z)
        dqr = drg * rg * (1.0 - rg)
        g["gru.wz"] += np.outer(dqz, a)
        g["gru.wr"] += np.outer(dqr, a)
        g["gru.uz"] += np.outer(dqz, h)
        g["gru.ur"] += np.outer(dqr, h)
        g["gru.bz"] += dqz
        g["gru.br"] += dqr
        da += p["gru.wz"].T @ dqz + p["gru.wr"].T @ dqr
        dh_prev += p["gru.uz"].T @ dqz + p["gru.ur"].T @ dqr
        dpre = da * (1.0 - a * a)
        g["d.w"] += np.outer(feats.x[v], dpre)
        g["d.dir"][d] += dpre
        g["d.b"] += dpre
        g_proj[feats.proj_rows + codes] += dpre
        dh = dh_prev


def grad_structured(params: ModelParams, weights, free: GrowthRecord, constrained: GrowthRecord,
                    image: Image, truncate: int | None = DEFAULT_TRUNCATE) -> np.ndarray:
    """Gradient of sum_e weights[e] * f(e) with respect to theta.

    Negative-weight edges are replayed in the free record and positive ones
    in the constrained record. For the dynamic model the recurrent chain of
    each scored edge is backpropagated along its growth path, over at most
    ``truncate`` preceding edges.
    """
    from .structured import scored_altitudes

    scored = list(scored_altitudes(weights, free, constrained))
    grad = params.zeros_like()
    if not scored:
        return grad
    if params.architecture == "static":
        feats = _StaticFeatures(params, image)
    elif params.architecture == "dynamic":
        feats = _DynamicFeatures(params, image)
    else:
        raise ValueError(f"{params.architecture!r} parameters are not an altitude model")
    edges = [e for e, _, _ in scored]
    ws = [w for _, w, _ in scored]
    _static_grad(params, feats, edges, ws, grad)
    if params.architecture == "dynamic":
        for e, w, rec in scored:
            _, caches = _replay_chain(feats, rec, e, truncate)
            _dynamic_chain_grad(params, feats, caches, w, grad)
    return grad


def replayed_loss(params: ModelParams, weights, free: GrowthRecord, constrained: GrowthRecord,
                  image: Image, truncate: int | None = DEFAULT_TRUNCATE) -> float:
    """sum_e weights[e] * f(e) with every scored altitude recomputed from ``params``.

    The growth records stay frozen; only the altitudes move with theta.
    """
    from .structured import scored_altitudes, weighted_sum

    scored = list(scored_altitudes(weights, free, constrained))
    if not scored:
        return 0.0
    if params.architecture == "static":
        alt = _StaticFeatures(params, image).altitude
        return weighted_sum((w, alt[e]) for e, w, _ in scored)
    feats = _DynamicFeatures(params, image)
    return weighted_sum((w, _replay_chain(feats, rec, e, truncate)[0]) for e, w, rec in scored)


def finite_diff_check(params: ModelParams, loss_fn, grad: np.ndarray, epsilon: float = 1e-5,
                      n_coords: int = 50, rng: np.random.Generator | None = None,
                      coords=None) -> float:
    """Max relative error between ``grad`` and central differences of ``loss_fn``.

    ``loss_fn`` maps a theta vector to a float. Coordinates are a random
    subsample unless given explicitly. The default step sits near the
    cube root of machine epsilon, where truncation and rounding balance.
    """
    theta = np.array(params.theta, dtype=np.float64)
    if coords is None:
        rng = rng or np.random.default_rng(0)
        coords = rng.choice(theta.size, size=min(n_coords, theta.size), replace=False)
    worst = 0.0
    for i in coords:
        old = theta[i]
        theta[i] = old + epsilon
        up = loss_fn(theta)
        theta[i] = old - epsilon
        down = loss_fn(theta)
        theta[i] = old
        numeric = (up - down) / (2.0 * epsilon)
        err = abs(grad[i] - numeric) / max(1e-8, abs(grad[i]) + abs(numeric))
        worst = max(worst, err)
    return worst
