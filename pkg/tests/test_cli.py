import csv
import shutil

import numpy as np
import pytest

from msfseg import lwa
from msfseg.cli import CliError, build_report, main, parse_config
from msfseg.corpus import load_split

SMALL = """\
# 10-image smoke corpus
height = 32
width = 32
train_count = 10
test_count = 3
seed = 4
corpus = corpus
g_model = g/g.model
g_steps = 150
epochs = 2          # inline comment
checkpoint_every = 4
validation_count = 2
select_every = 4
smoothing_grid = 0 1
threshold_grid = 0.4 0.6
search_count = 4
"""


def write(path, text):
    path.write_text(text)
    return path


def run_pipeline(root, extra=""):
    cfg = write(root / "run.config", SMALL + extra)
    for cmd, out in (("generate", "corpus"), ("pretrain-g", "g"), ("train", "train")):
        assert main([cmd, "--config", str(cfg), "--out", str(root / out)]) == 0
    return cfg


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipe")
    return root, run_pipeline(root)


# ---------------------------------------------------------------- config

def test_parse_config_types_and_comments(tmp_path):
    v = parse_config(SMALL, tmp_path)
    assert v["height"] == 32 and v["epochs"] == 2 and v["smoothing_grid"] == (0.0, 1.0)
    assert v["corpus"] == str(tmp_path / "corpus")
    assert v["learning_rate"] == 1e-2 and v["max_grad_norm"] is None
    assert parse_config("adapted = true\nmax_grad_norm = 0.5")["adapted"] is True


@pytest.mark.parametrize("text", ["bogus = 1", "height 32", "height = x", "height = 1\nheight = 2",
                                  "adapted = maybe", "= 3"])
def test_parse_config_rejects(text):
    with pytest.raises(CliError) as err:
        parse_config(text)
    assert err.value.code == 2


def test_exit_code_two_paths(tmp_path, capsys):
    bad = write(tmp_path / "bad.config", "nonsense_key = 1\n")
    assert main(["generate", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert main(["generate", "--config", str(tmp_path / "missing.config")]) == 2
    ok = write(tmp_path / "ok.config", "height = 8\nwidth = 8\ntrain_count = 1\ntest_count = 1\n")
    blocker = write(tmp_path / "file", "")
    assert main(["generate", "--config", str(ok), "--out", str(blocker / "sub")]) == 2
    # train needs a g model; corpus missing entirely
    assert main(["train", "--config", str(ok), "--out", str(tmp_path / "t")]) == 2
    no_g = write(tmp_path / "nog.config", f"corpus = {tmp_path}\ng_model = nowhere.model\n")
    assert main(["train", "--config", str(no_g), "--out", str(tmp_path / "t")]) == 2
    assert "does not exist" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["frobnicate", "--config", str(ok)])


def test_generate_layout(tmp_path):
    cfg = write(tmp_path / "c.config",
                "height = 32\nwidth = 32\ntrain_count = 4\ntest_count = 0\nseed = 1\n")
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    train = sorted(p.name for p in (tmp_path / "a" / "train").iterdir())
    assert len(train) == 4 * 3 + 1 and "manifest.csv" in train
    assert (tmp_path / "a" / "generate.config").exists()
    assert main(["generate", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    for name in train:
        assert (tmp_path / "a/train" / name).read_bytes() == (tmp_path / "b/train" / name).read_bytes()
    rows = list(csv.DictReader(open(tmp_path / "a/train/manifest.csv")))
    assert [r["id"] for r in rows] == ["0000", "0001", "0002", "0003"]
    assert len({r["rng_seed"] for r in rows}) == 4
    resolved = parse_config((tmp_path / "a/generate.config").read_text())
    assert resolved["seed"] == 1 and resolved["train_count"] == 4


# ---------------------------------------------------------------- pipeline

def test_pipeline_outputs(pipeline):
    root, _ = pipeline
    assert lwa.load_model(root / "g/g.model")[0]["architecture"] == "g"
    loss = list(csv.reader(open(root / "g/g_loss.csv")))
    assert loss[0] == ["step", "loss"] and len(loss) == 151
    trace = list(csv.reader(open(root / "train/trace.csv")))
    assert trace[0] == ["step", "loss", "perceptron_loss", "incorrect_count", "gradient_norm", "arand"]
    assert len(trace) == 1 + 2 * 8
    ckpts = sorted(p.name for p in (root / "train/checkpoints").iterdir())
    assert ckpts == ["step_000004.model", "step_000008.model", "step_000012.model",
                     "step_000016.model"]
    sel = list(csv.reader(open(root / "train/selection.csv")))
    assert [r[0] for r in sel[1:]] == ["0", "4", "8", "12", "16"]
    assert (root / "train/static.model").exists() and (root / "train/train.config").exists()


def test_segment_and_evaluate(pipeline, tmp_path):
    root, cfg = pipeline
    seg_cfg = write(root / "seg.config", cfg.read_text() + "model = train/static.model\n")
    assert main(["segment", "--config", str(seg_cfg), "--out", str(tmp_path / "seg")]) == 0
    preds = sorted((tmp_path / "seg").glob("*_pred.lwa1"))
    assert [p.name for p in preds] == ["0000_pred.lwa1", "0001_pred.lwa1", "0002_pred.lwa1"]
    labels = lwa.load(preds[0])
    assert labels.shape == (32, 32, 1) and labels.dtype == np.uint32 and labels.min() >= 1

    assert main(["evaluate", "--config", str(seg_cfg), "--out", str(tmp_path / "ev")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "ev/scores_learned-static.csv")))
    assert [r["id"] for r in rows] == ["0000", "0001", "0002", "mean", "std", "summary"]
    assert rows[0]["method"] == "learned-static" and rows[0]["tolerance"] == "2.0"
    arand = [float(r["arand"]) for r in rows[:3]]
    assert float(rows[3]["arand"]) == pytest.approx(np.mean(arand), abs=1e-15)
    assert " ± " in rows[5]["arand"]

    # evaluating the segment output gives the same numbers
    from_preds = write(root / "fp.config",
                       cfg.read_text() + f"predictions = {tmp_path / 'seg'}\nlabel = stored\n")
    assert main(["evaluate", "--config", str(from_preds), "--out", str(tmp_path / "ev")]) == 0
    again = list(csv.DictReader(open(tmp_path / "ev/scores_stored.csv")))
    assert [r["arand"] for r in again[:3]] == [r["arand"] for r in rows[:3]]


def test_evaluate_ground_truth_predictions_score_zero(pipeline, tmp_path):
    root, cfg = pipeline
    pred_dir = tmp_path / "pred"
    pred_dir.mkdir()
    for p in (root / "corpus/test").glob("*_gt.lwa1"):
        shutil.copy(p, pred_dir / p.name.replace("_gt", "_pred"))
    c = write(root / "e.config", cfg.read_text() + f"predictions = {pred_dir}\n")
    assert main(["evaluate", "--config", str(c), "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "scores_predictions.csv")))
    for r in rows[:3]:
        assert float(r["arand"]) == float(r["voi_split"]) == float(r["voi_merge"]) == 0.0
    assert rows[-1]["arand"] == "0.0 ± 0.0"
    (pred_dir / "0001_pred.lwa1").write_bytes(b"LWA1junk")
    assert main(["evaluate", "--config", str(c), "--out", str(tmp_path)]) == 2


def test_baselines_grid_search(pipeline, tmp_path):
    root, cfg = pipeline
    for method, label in (("raw", "raw+WS"), ("g", "g+WS"), ("dtws", "g+DTWS")):
        c = write(root / f"{method}.config", cfg.read_text() + f"method = {method}\n")
        assert main(["evaluate", "--config", str(c), "--out", str(tmp_path)]) == 0
        search = list(csv.reader(open(tmp_path / f"evaluate_search_{label}.csv")))
        assert len(search) == 1 + (4 if method == "dtws" else 2)
        resolved = parse_config((tmp_path / f"evaluate_{label}.config").read_text())
        assert resolved["smoothing"] in (0.0, 1.0)
        if method == "dtws":
            assert resolved["threshold"] in (0.4, 0.6)


def test_resume_dynamic_from_static(pipeline, tmp_path):
    root, cfg = pipeline
    c = write(root / "d.config", cfg.read_text().replace("epochs = 2", "epochs = 1")
              + "model_kind = dynamic\ninit_model = train/static.model\nmax_steps = 3\n"
              + "state_size = 4\n")
    assert main(["train", "--config", str(c), "--out", str(tmp_path)]) == 0
    header, _ = lwa.load_model(tmp_path / "dynamic.model")
    assert header["architecture"] == "dynamic" and header["r"] == "4"
    assert len(list(csv.reader(open(tmp_path / "trace.csv")))) == 4


def test_blow_up_exit_three(pipeline, tmp_path):
    root, cfg = pipeline
    text = cfg.read_text().replace("validation_count = 2", "validation_count = 0")
    c = write(root / "b.config", text + "learning_rate = 1e308\nmomentum = 0.5\nweight_mode = binary\n")
    assert main(["train", "--config", str(c), "--out", str(tmp_path)]) == 3
    kept = sorted((tmp_path / "checkpoints").glob("*.model"))
    assert kept
    _, theta = lwa.load_model(kept[-1])
    assert np.all(np.isfinite(theta))


def test_train_is_deterministic(pipeline, tmp_path):
    root, _ = pipeline
    again = tmp_path / "again"
    again.mkdir()
    run_pipeline(again)
    for rel in ("g/g.model", "g/g_loss.csv", "train/static.model", "train/trace.csv",
                "train/selection.csv", "train/checkpoints/step_000016.model"):
        assert (root / rel).read_bytes() == (again / rel).read_bytes(), rel
    assert len(load_split(again / "corpus/train")) == 10


# ---------------------------------------------------------------- report

def score_csv(path, method, sigma, arands, shape=(32, 32)):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "arand", "voi_split", "voi_merge", "scored_nodes", "tolerance",
                    "method", "sigma_noise", "height", "width"])
        for i, a in enumerate(arands):
            w.writerow([f"{i:04d}", a, 0.0, 0.0, 100, 2.0, method, sigma, *shape])
    return path


def test_report_single_cell(tmp_path):
    p = score_csv(tmp_path / "s.csv", "g+WS", 0.3, [0.05, 0.07])
    sigmas, rows = build_report([str(p)])
    assert sigmas == [0.3] and rows == [("g+WS", ["6.0 ± 1.4"])]


def test_report_table_shape_and_order(tmp_path):
    methods = ["raw+WS", "g+DTWS", "learned-static", "g+WS", "learned-dynamic"]
    paths = [str(score_csv(tmp_path / f"{m}_{s}.csv", m, s, [0.1, 0.2]))
             for m in methods for s in (0.9, 0.3, 0.6)]
    cfg = write(tmp_path / "r.config", "scores = " + " ".join(paths) + "\n")
    assert main(["report", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    rows = list(csv.reader(open(tmp_path / "a/report.csv")))
    assert rows[0] == ["method", "sigma_noise=0.3", "sigma_noise=0.6", "sigma_noise=0.9"]
    assert [r[0] for r in rows[1:]] == ["learned-dynamic", "learned-static", "g+WS", "g+DTWS",
                                        "raw+WS"]
    assert all(len(r) == 4 for r in rows)
    assert main(["report", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    for name in ("report.csv", "report.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_report_conflicts(tmp_path):
    a = score_csv(tmp_path / "a.csv", "g+WS", 0.3, [0.1])
    b = score_csv(tmp_path / "b.csv", "raw+WS", 0.3, [0.1], shape=(64, 64))
    cfg = write(tmp_path / "r.config", f"scores = {a} {b}\n")
    assert main(["report", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    dup = write(tmp_path / "d.config", f"scores = {a} {a}\n")
    assert main(["report", "--config", str(dup), "--out", str(tmp_path)]) == 2
    empty = write(tmp_path / "e.config", "seed = 1\n")
    assert main(["report", "--config", str(empty), "--out", str(tmp_path)]) == 2
