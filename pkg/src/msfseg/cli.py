"""``msf-seg`` command-line entry point.

    msf-seg <generate|pretrain-g|train|segment|evaluate|report> --config FILE [--out DIR]

The config file is line based ``key = value`` with ``#`` comments. Every key
is typed and optional; unknown keys are rejected. Relative paths resolve
against the directory holding the config file. Each command writes the
fully resolved config to ``OUT/<command>.config``.

Exit codes: 0 success, 2 bad config / missing input / unwritable output /
conflicting report inputs, 3 numeric blow-up during training.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import lwa
from .corpus import generate_split, load_split
from .grid import Image, Segmentation
from .metrics import score
from .models import (DEFAULT_HIDDEN, DEFAULT_RADIUS, DEFAULT_STATE, DEFAULT_TRUNCATE, GConfig,
                     ModelParams, augment, dynamic_from_static, g_map, init_params,
                     params_from_file, provider_for, train_g)
from .msf import StaticAltitudes
from .synth import SynthConfig, dtws_altitudes, node_to_edge, smooth_image
from .trainer import EvalReport, TrainConfig, evaluate, fit, format_mean_std, segment, write_trace

log = logging.getLogger("msfseg")

COMMANDS = ("generate", "pretrain-g", "train", "segment", "evaluate", "report")
METHOD_LABELS = {"raw": "raw+WS", "g": "g+WS", "dtws": "g+DTWS"}
REPORT_ORDER = ("learned-dynamic", "learned-static", "g+WS", "g+DTWS", "raw+WS")
SCORE_FIELDS = ("id", "arand", "voi_split", "voi_merge", "scored_nodes", "tolerance",
                "method", "sigma_noise", "height", "width")


class CliError(Exception):
    def __init__(self, message, code=2):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------- config

def _bool(text):
    low = text.lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    return tuple(float(t) for t in text.replace(",", " ").split())


def _words(text):
    return tuple(text.replace(",", " ").split())


def _optional(kind):
    def parse(text):
        return None if text.lower() == "none" else kind(text)
    return parse


PATH_KEYS = {"corpus", "g_model", "model", "init_model", "predictions", "scores"}

# key -> (parser, default)
SCHEMA = {
    "seed": (int, 0),
    # corpus
    "height": (int, 64),
    "width": (int, 64),
    "train_count": (int, 200),
    "test_count": (int, 50),
    "sigma_noise": (float, 0.3),
    "sigma_process": (_optional(float), None),
    "sigma_blur": (float, 1.0),
    # inputs
    "corpus": (_optional(str), None),
    "split": (str, "test"),
    "g_model": (_optional(str), None),
    "model": (_optional(str), None),
    "init_model": (_optional(str), None),
    "predictions": (_optional(str), None),
    # g pretraining
    "g_steps": (int, 3000),
    "g_batch_size": (int, 256),
    "g_learning_rate": (float, 0.05),
    "g_momentum": (float, 0.9),
    # structured training
    "learning_rate": (float, 1e-2),
    "momentum": (float, 0.9),
    "gamma": (float, 0.7),
    "epochs": (int, 1),
    "max_steps": (int, 0),
    "workers": (int, 1),
    "weight_mode": (str, "discounted"),
    "model_kind": (str, "static"),
    "truncate": (int, DEFAULT_TRUNCATE),
    "max_grad_norm": (_optional(float), None),
    "patch_radius": (int, DEFAULT_RADIUS),
    "hidden_width": (int, DEFAULT_HIDDEN),
    "state_size": (int, DEFAULT_STATE),
    "checkpoint_every": (int, 50),
    "validation_count": (int, 0),
    "select_every": (int, 0),
    # segmentation and evaluation
    "method": (str, "model"),
    "label": (_optional(str), None),
    "tolerance": (float, 2.0),
    "adapted": (_bool, False),
    "smoothing": (_optional(float), None),
    "threshold": (_optional(float), None),
    "smoothing_grid": (_floats, (0.0, 0.5, 1.0, 1.5, 2.0, 3.0)),
    "threshold_grid": (_floats, (0.3, 0.4, 0.5, 0.6, 0.7)),
    "search_count": (int, 50),
    # report
    "scores": (_words, ()),
}


def parse_config(text: str, base: Path | None = None) -> dict:
    """Parse config text onto the schema defaults; raises CliError on any problem."""
    values = {k: default for k, (_, default) in SCHEMA.items()}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not eq or not key:
            raise CliError(f"config line {lineno}: expected 'key = value', got {raw.strip()!r}")
        if key not in SCHEMA:
            raise CliError(f"config line {lineno}: unknown key {key!r}")
        if key in seen:
            raise CliError(f"config line {lineno}: duplicate key {key!r}")
        seen.add(key)
        parser = SCHEMA[key][0]
        try:
            values[key] = parser(value)
        except ValueError as exc:
            raise CliError(f"config line {lineno}: bad value for {key}: {exc}") from None
    if base is not None:
        for key in PATH_KEYS:
            v = values[key]
            if isinstance(v, tuple):
                values[key] = tuple(str((base / p).resolve()) for p in v)
            elif v is not None:
                values[key] = str((base / v).resolve())
    return values


def format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return " ".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_config(values: dict, path: Path):
    lines = [f"{k} = {format_value(values[k])}" for k in SCHEMA]
    _write_text(path, "\n".join(lines) + "\n")


# ---------------------------------------------------------------- io helpers

def _write_text(path: Path, text: str):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    return repr(float(x))


def _prepare_out(out: Path):
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise CliError(f"output directory {out} is not writable: {exc}") from None


def _require(values, key, what):
    path = values[key]
    if path is None:
        raise CliError(f"{key} must be set ({what})")
    if not Path(path).exists():
        raise CliError(f"{key}: {path} does not exist")
    return Path(path)


def _load_model(path: Path) -> ModelParams:
    try:
        header, theta = lwa.load_model(path)
        return params_from_file(header, theta)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot read model {path}: {exc}") from None


def _save_model(path: Path, params: ModelParams):
    lwa.save_model(path, params.header(), params.theta)


def _load_items(values, split):
    directory = _require(values, "corpus", "corpus directory from generate") / split
    try:
        return load_split(directory)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot read corpus split {directory}: {exc}") from None


def _validate_outputs(paths):
    """Header check on every LWA1 container written by the command."""
    for p in paths:
        p = Path(p)
        if p.suffix == ".lwa1":
            ok = lwa.validate(p)
        elif p.suffix == ".model":
            try:
                lwa.load_model(p)
                ok = True
            except (OSError, ValueError):
                ok = False
        else:
            ok = p.exists()
        if not ok:
            raise CliError(f"output {p} failed validation")


# ---------------------------------------------------------------- commands

def cmd_generate(values, out: Path) -> list:
    try:
        cfg = SynthConfig(values["height"], values["width"], values["sigma_noise"],
                          values["sigma_process"], values["sigma_blur"], values["seed"])
    except ValueError as exc:
        raise CliError(str(exc)) from None
    written = []
    for split, count in (("train", values["train_count"]), ("test", values["test_count"])):
        if count < 0:
            raise CliError(f"{split}_count must be non-negative")
        written += generate_split(out / split, count, cfg, values["seed"], split)
        log.info("wrote %d %s images", count, split)
    return written


def cmd_pretrain_g(values, out: Path) -> list:
    items = _load_items(values, "train")
    if not items:
        raise CliError("training split is empty")
    cfg = GConfig(values["g_steps"], values["g_batch_size"], values["g_learning_rate"],
                  values["g_momentum"], values["seed"], values["patch_radius"],
                  values["hidden_width"])
    params, trace = train_g([(it.image, it.gt) for it in items], cfg)
    if not np.all(np.isfinite(params.theta)) or not np.all(np.isfinite(trace)):
        raise CliError("g pretraining diverged", code=3)
    written = [out / "g.model", out / "g_loss.csv"]
    _save_model(written[0], params)
    _write_csv(written[1], ("step", "loss"), [(i, _fmt(v)) for i, v in enumerate(trace)])
    log.info("g: final minibatch loss %.4f", trace[-1])
    return written


class _Stop(Exception):
    pass


def _augmented(items, g_params):
    return [(augment(it.image, g_params), it.gt, it.seeds) for it in items]


def _initial_params(values, channels, rng) -> ModelParams:
    kind = values["model_kind"]
    if values["init_model"] is not None:
        init = _load_model(_require(values, "init_model", "warm start"))
        if init.channels != channels:
            raise CliError(f"init_model expects {init.channels} channels, corpus gives {channels}")
        if init.architecture == kind:
            return init
        if init.architecture == "static" and kind == "dynamic":
            return dynamic_from_static(init, rng, values["state_size"])
        raise CliError(f"cannot start a {kind} model from a {init.architecture} one")
    return init_params(kind, channels, rng, values["patch_radius"], values["hidden_width"],
                       values["state_size"])


def cmd_train(values, out: Path) -> list:
    g_params = _load_model(_require(values, "g_model", "train needs a pretrained g"))
    items = _load_items(values, "train")
    n_val = values["validation_count"]
    if not 0 <= n_val < len(items):
        raise CliError(f"validation_count must lie in [0, {len(items)})")
    data = _augmented(items, g_params)
    train, held = data[:len(data) - n_val], data[len(data) - n_val:]
    try:
        config = TrainConfig(values["learning_rate"], values["momentum"], values["gamma"],
                             values["epochs"], values["workers"], values["seed"],
                             values["weight_mode"], values["model_kind"], values["truncate"],
                             values["max_grad_norm"])
    except ValueError as exc:
        raise CliError(str(exc)) from None
    init = _initial_params(values, data[0][0].channels, np.random.default_rng(values["seed"]))

    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    written = []
    every, select_every = values["checkpoint_every"], values["select_every"]
    tol = values["tolerance"]
    selection = []
    best = {"score": math.inf, "params": init.copy(), "step": -1}
    last_good = {"params": init.copy(), "step": -1}
    history = []

    def validate(step, params):
        # score exactly what would be written: the model file stores float32
        rounded = params.with_theta(params.theta.astype(np.float32).astype(np.float64))
        s = evaluate(rounded, held, tol).mean("arand")
        selection.append((step, s))
        if s < best["score"]:
            best.update(score=s, params=params.copy(), step=step)

    def on_step(step, params, stats):
        # the model file stores float32, so that is the range that must hold
        if not np.all(np.isfinite(params.theta.astype(np.float32))):
            raise FloatingPointError(f"parameters overflow float32 after step {step}")
        history.append(stats)
        last_good.update(params=params.copy(), step=step)
        done = step + 1
        if every > 0 and done % every == 0:
            path = ckpt_dir / f"step_{done:06d}.model"
            _save_model(path, params)
            written.append(path)
        if held and select_every > 0 and done % select_every == 0:
            validate(done, params)
        if values["max_steps"] > 0 and done >= values["max_steps"]:
            raise _Stop

    if held:
        validate(0, init)
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            final, _ = fit(train, config, init=init, on_step=on_step)
    except _Stop:
        final = last_good["params"]
    except (FloatingPointError, ValueError) as exc:
        # growth rejects non-finite altitudes with ValueError; anything else is a real bug
        if isinstance(exc, ValueError) and "non-finite" not in str(exc):
            raise
        path = ckpt_dir / f"step_{last_good['step'] + 1:06d}.model"
        _save_model(path, last_good["params"])
        write_trace(history, out / "trace.csv")
        raise CliError(f"training diverged: {exc}; last finite parameters kept in {path}",
                       code=3) from None
    done = len(history)
    path = ckpt_dir / f"step_{done:06d}.model"
    if path not in written:
        _save_model(path, final)
        written.append(path)
    if held:
        if not selection or selection[-1][0] != done:
            validate(done, final)
        chosen = best["params"]
        log.info("selected step %d (validation ARAND %.4f)", best["step"], best["score"])
        written.append(out / "selection.csv")
        _write_csv(written[-1], ("step", "validation_arand"), [(s, _fmt(a)) for s, a in selection])
    else:
        chosen = final
    model_path = out / f"{chosen.architecture}.model"
    _save_model(model_path, chosen)
    write_trace(history, out / "trace.csv")
    return written + [model_path, out / "trace.csv"]


# segmentation providers --------------------------------------------------

def _baseline_alt(method, image, gmap, sigma, threshold):
    graph = image.graph
    if method == "raw":
        node = smooth_image(image, sigma).data[:, 0]
        return node_to_edge(graph, node)
    node = _smooth_nodes(graph, gmap, sigma)
    if method == "g":
        return node_to_edge(graph, node)
    try:
        return dtws_altitudes(graph, np.clip(node, 1e-12, 1 - 1e-12), threshold)
    except ValueError:
        # threshold leaves no boundary or no background: plain watershed on g
        return node_to_edge(graph, node)


def _smooth_nodes(graph, values, sigma):
    return smooth_image(Image(graph, values[:, None]), sigma).data[:, 0]


class _Method:
    """Maps a corpus item to an altitude provider for one method."""

    def __init__(self, values, g_params):
        self.kind = values["method"]
        self.g_params = g_params
        self.sigma = values["smoothing"]
        self.threshold = values["threshold"]
        self.params = None
        if self.kind == "model":
            self.params = _load_model(_require(values, "model", "method = model"))
            self.label = f"learned-{self.params.architecture}"
        elif self.kind in METHOD_LABELS:
            self.label = METHOD_LABELS[self.kind]
        else:
            raise CliError(f"unknown method {self.kind!r}")
        if values["label"] is not None:
            self.label = values["label"]
        needs_g = self.kind in ("g", "dtws") or (self.params is not None
                                                  and self.params.channels > 1)
        if needs_g and g_params is None:
            raise CliError(f"method {self.kind} needs g_model")

    def corpus(self, items):
        """(image, gt, seeds) triples in the form the provider expects."""
        if self.params is not None and self.params.channels > 1:
            return _augmented(items, self.g_params)
        if self.kind in ("g", "dtws"):
            return [(it.image, it.gt, it.seeds, g_map(self.g_params, it.image)) for it in items]
        return [it.triple() for it in items]

    def run(self, data, sigma=None, threshold=None, tolerance=2.0, adapted=False) -> EvalReport:
        if self.params is not None:
            return evaluate(self.params, data, tolerance, adapted)
        sigma = self.sigma if sigma is None else sigma
        threshold = self.threshold if threshold is None else threshold
        report = EvalReport()
        for item in data:
            image, gt, seeds = item[:3]
            gmap = item[3] if len(item) > 3 else None
            alt = _baseline_alt(self.kind, image, gmap, sigma, threshold)
            pred = segment(StaticAltitudes(alt), image, seeds)
            report.per_image.append(score(pred, gt, tolerance, adapted))
        return report

    def predict(self, data):
        for item in data:
            if self.params is not None:
                provider = provider_for(self.params)
            else:
                gmap = item[3] if len(item) > 3 else None
                provider = StaticAltitudes(_baseline_alt(self.kind, item[0], gmap,
                                                         self.sigma, self.threshold))
            yield segment(provider, item[0], item[2])

    def tune(self, values, out: Path, command: str) -> list:
        """Grid search of unset baseline parameters on training images."""
        if self.params is not None:
            return []
        need_sigma = self.sigma is None
        need_thr = self.kind == "dtws" and self.threshold is None
        if not (need_sigma or need_thr):
            return []
        items = _load_items(values, "train")[:values["search_count"]]
        if not items:
            raise CliError("grid search needs training images")
        data = self.corpus(items)
        sigmas = values["smoothing_grid"] if need_sigma else (self.sigma,)
        thresholds = values["threshold_grid"] if need_thr else (self.threshold,)
        rows, best = [], None
        for s in sigmas:
            for t in thresholds:
                a = self.run(data, s, t, values["tolerance"], values["adapted"]).mean("arand")
                rows.append((format_value(s), format_value(t), _fmt(a)))
                if best is None or a < best[0]:
                    best = (a, s, t)
        self.sigma, self.threshold = best[1], best[2]
        values["smoothing"], values["threshold"] = self.sigma, self.threshold
        path = out / f"{command}_search_{self.label}.csv"
        _write_csv(path, ("smoothing", "threshold", "train_arand"), rows)
        log.info("%s: smoothing %s threshold %s (train ARAND %.4f)", self.label, self.sigma,
                 self.threshold, best[0])
        return [path]


def _g_for(values):
    if values["g_model"] is None:
        return None
    return _load_model(_require(values, "g_model", "g boundary model"))


def cmd_segment(values, out: Path) -> list:
    method = _Method(values, _g_for(values))
    values["resolved_label"] = method.label
    written = method.tune(values, out, "segment")
    items = _load_items(values, values["split"])
    for it, pred in zip(items, method.predict(method.corpus(items))):
        path = out / f"{it.id}_pred.lwa1"
        lwa.save(path, pred.labels.reshape(pred.graph.shape), lwa.UINT32)
        written.append(path)
    return written


def _read_predictions(directory: Path, items):
    preds = []
    for it in items:
        path = directory / f"{it.id}_pred.lwa1"
        if not lwa.validate(path):
            raise CliError(f"missing or invalid prediction {path}")
        labels = lwa.load(path)[:, :, 0].astype(np.int64)
        if labels.shape != it.gt.graph.shape:
            raise CliError(f"{path}: shape {labels.shape} does not match ground truth")
        preds.append(Segmentation.from_array(labels))
    return preds


def cmd_evaluate(values, out: Path) -> list:
    items = _load_items(values, values["split"])
    if not items:
        raise CliError("evaluation split is empty")
    written = []
    tol, adapted = values["tolerance"], values["adapted"]
    if values["predictions"] is not None:
        preds = _read_predictions(_require(values, "predictions", "label maps"), items)
        report = EvalReport()
        for it, pred in zip(items, preds):
            report.per_image.append(score(pred, it.gt, tol, adapted))
        label = values["label"] or "predictions"
        values["resolved_label"] = label
    else:
        method = _Method(values, _g_for(values))
        written += method.tune(values, out, "evaluate")
        values["resolved_label"] = method.label
        report = method.run(method.corpus(items), tolerance=tol, adapted=adapted)
        label = method.label
    h, w = items[0].gt.graph.shape
    sigma = format_value(items[0].sigma_noise)
    tail = (format_value(tol), label, sigma, h, w)
    rows = [(it.id, _fmt(s.arand), _fmt(s.voi_split), _fmt(s.voi_merge), s.scored_nodes) + tail
            for it, s in zip(items, report.per_image)]
    rows.append(("mean", _fmt(report.mean("arand")), _fmt(report.mean("voi_split")),
                 _fmt(report.mean("voi_merge")), _fmt(report.mean("scored_nodes"))) + tail)
    rows.append(("std", _fmt(report.std("arand")), _fmt(report.std("voi_split")),
                 _fmt(report.std("voi_merge")), _fmt(report.std("scored_nodes"))) + tail)
    # ARAND in percent, VOI in nats
    rows.append(("summary", report.summary("arand", 100), report.summary("voi_split", 1, 3),
                 report.summary("voi_merge", 1, 3), report.summary("scored_nodes", 1, 0)) + tail)
    path = out / f"scores_{label}.csv"
    _write_csv(path, SCORE_FIELDS, rows)
    print(f"{label}: ARAND {report.summary('arand', 100)} (x100, {len(items)} images)")
    return written + [path]


def read_scores(path):
    """Per-image ARAND values plus (method, sigma, shape) of one score CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    per_image = [r for r in rows if r["id"] not in ("mean", "std", "summary")]
    if not per_image:
        raise CliError(f"{path}: no per-image rows")
    keys = {(r["method"], r["sigma_noise"], int(r["height"]), int(r["width"])) for r in per_image}
    if len(keys) != 1:
        raise CliError(f"{path}: mixed methods, noise levels or shapes")
    method, sigma, h, w = keys.pop()
    return method, float(sigma), (h, w), np.array([float(r["arand"]) for r in per_image])


def build_report(paths):
    """Table rows (method, cells per sigma); raises CliError on conflicting inputs."""
    if not paths:
        raise CliError("report needs at least one score CSV (key: scores)")
    cells, shapes = {}, {}
    for p in paths:
        if not Path(p).exists():
            raise CliError(f"score file {p} does not exist")
        method, sigma, shape, arand = read_scores(p)
        shapes.setdefault(shape, p)
        if len(shapes) > 1:
            raise CliError(f"conflicting graph shapes: {sorted(shapes)}")
        if (method, sigma) in cells:
            raise CliError(f"duplicate scores for {method} at sigma {sigma}")
        std = float(arand.std(ddof=1)) if arand.size > 1 else 0.0
        cells[(method, sigma)] = format_mean_std(100 * arand.mean(), 100 * std)
    sigmas = sorted({s for _, s in cells})
    known = [m for m in REPORT_ORDER if any(k[0] == m for k in cells)]
    other = sorted({m for m, _ in cells} - set(REPORT_ORDER))
    rows = [(m, [cells.get((m, s), "") for s in sigmas]) for m in known + other]
    return sigmas, rows


def cmd_report(values, out: Path) -> list:
    sigmas, rows = build_report(values["scores"])
    header = ["method"] + [f"sigma_noise={format_value(s)}" for s in sigmas]
    csv_path, txt_path = out / "report.csv", out / "report.txt"
    _write_csv(csv_path, header, [[m] + c for m, c in rows])
    table = [header] + [[m] + c for m, c in rows]
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(wd) for cell, wd in zip(r, widths)).rstrip() for r in table]
    text = "ARAND x100, mean ± std over test images\n" + "\n".join(lines) + "\n"
    _write_text(txt_path, text)
    print(text, end="")
    return [csv_path, txt_path]


HANDLERS = {"generate": cmd_generate, "pretrain-g": cmd_pretrain_g, "train": cmd_train,
            "segment": cmd_segment, "evaluate": cmd_evaluate, "report": cmd_report}


def run(command: str, config_path, out=None) -> int:
    config_path = Path(config_path)
    try:
        text = config_path.read_text()
    except OSError as exc:
        raise CliError(f"cannot read config {config_path}: {exc}") from None
    values = parse_config(text, config_path.resolve().parent)
    values["resolved_label"] = None
    out = Path(out) if out is not None else Path.cwd()
    _prepare_out(out)
    written = HANDLERS[command](values, out)
    _validate_outputs(written)
    # resolved config last, so grid-searched values are recorded
    stem = command
    if command in ("segment", "evaluate") and values["resolved_label"]:
        stem = f"{command}_{values['resolved_label']}"
    write_config(values, out / f"{stem}.config")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="msf-seg", description="Seeded watershed experiments.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="key = value config file")
    ap.add_argument("--out", default=None, help="output directory (default: current directory)")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return run(args.command, args.config, args.out)
    except CliError as exc:
        print(f"msf-seg {args.command}: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
