import csv
import json

import numpy as np
import pytest

from slavgae.checkpoint import load_checkpoint
from slavgae.cli import main
from slavgae.data import load_dataset, load_splits

FAST = ["--set", "hidden_dim=16", "--set", "latent_dim=8", "--set", "max_epochs=15",
        "--set", "lr=0.01"]


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "sbm.json").write_text(json.dumps({"blocks": 3, "nodes_per_block": 20, "p_intra": 0.2,
                                            "p_inter": 0.02, "feature_dim": 5, "seed": 3}))
    assert main(["synth", "--sbm-config", str(d / "sbm.json"), "--out", str(d / "data"),
                 "--labeling-rate", "0.2"]) == 0
    return d


@pytest.fixture(scope="module")
def trained(fixture_dir):
    d = fixture_dir
    (d / "cfg.json").write_text(json.dumps({"k": 3, "ablation": {"no_pseudo": False}}))
    code = main(["train", "--data", str(d / "data"), "--splits", str(d / "data" / "splits.csv"),
                 "--config", str(d / "cfg.json"), "--out", str(d / "run"),
                 "--set", "ablation.no_pseudo=true", *FAST])
    assert code == 0
    return d / "run"


def test_synth_writes_loadable_dataset(fixture_dir):
    ds = load_dataset(fixture_dir / "data")
    assert ds.n == 60 and ds.num_features == 5
    assert load_splits(fixture_dir / "data" / "splits.csv", ds.n).n == 60


def test_synth_bad_config_is_usage_error(tmp_path, capsys):
    (tmp_path / "bad.json").write_text('{"blocks": 2, "colour": 1}')
    assert main(["synth", "--sbm-config", str(tmp_path / "bad.json"), "--out", str(tmp_path / "o")]) == 2
    assert "colour" in capsys.readouterr().err


def test_train_artifacts(trained):
    names = {p.name for p in trained.iterdir()}
    assert {"model.ckpt", "history.csv", "metrics.json", "resolved-config.json"} <= names
    metrics = json.loads((trained / "metrics.json").read_text())
    assert 0 <= metrics["test"]["accuracy"] <= 1
    resolved = json.loads((trained / "resolved-config.json").read_text())
    assert resolved["ablation"]["no_pseudo"] is True
    assert resolved["k"] == 3 and resolved["hidden_dim"] == 16


def test_resolved_config_reproduces_run(trained, fixture_dir, tmp_path):
    data = fixture_dir / "data"
    assert main(["train", "--data", str(data), "--splits", str(data / "splits.csv"),
                 "--config", str(trained / "resolved-config.json"), "--out", str(tmp_path / "r")]) == 0
    for name in ("model.ckpt", "history.csv", "metrics.json", "resolved-config.json"):
        assert (tmp_path / "r" / name).read_bytes() == (trained / name).read_bytes()


def test_train_missing_data_is_usage_error(capsys):
    assert main(["train", "--splits", "s.csv", "--out", "o"]) == 2


def test_train_bad_override(fixture_dir, tmp_path):
    data = fixture_dir / "data"
    code = main(["train", "--data", str(data), "--splits", str(data / "splits.csv"),
                 "--out", str(tmp_path), "--set", "nonsense=1"])
    assert code == 2


def test_train_missing_data_dir_is_runtime_error(fixture_dir, tmp_path):
    code = main(["train", "--data", str(tmp_path / "nope"), "--splits",
                 str(fixture_dir / "data" / "splits.csv"), "--out", str(tmp_path / "o")])
    assert code == 1


def test_eval_reproduces_metrics(trained, fixture_dir, capsys):
    data = fixture_dir / "data"
    capsys.readouterr()
    assert main(["eval", "--checkpoint", str(trained / "model.ckpt"), "--data", str(data),
                 "--splits", str(data / "splits.csv"), "--role", "test"]) == 0
    out = json.loads(capsys.readouterr().out)
    metrics = json.loads((trained / "metrics.json").read_text())
    assert out["accuracy"] == metrics["test"]["accuracy"]
    assert out["mcc"] == metrics["test"]["mcc"]


def test_eval_usage_error():
    assert main(["eval", "--data", "x", "--splits", "y"]) == 2


def test_predict_consistent_with_eval(trained, fixture_dir, tmp_path):
    data = fixture_dir / "data"
    out = tmp_path / "pred.csv"
    assert main(["predict", "--checkpoint", str(trained / "model.ckpt"), "--data", str(data),
                 "--splits", str(data / "splits.csv"), "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["node_id", "predicted_class", "max_probability"]
    ds = load_dataset(data)
    splits = load_splits(data / "splits.csv", ds.n)
    pred = np.array([int(r["predicted_class"]) for r in rows])
    test = splits.nodes("test")
    acc = float(np.mean(pred[test] == ds.labels[test]))
    assert acc == json.loads((trained / "metrics.json").read_text())["test"]["accuracy"]
    assert all(0 < float(r["max_probability"]) <= 1 for r in rows)


def test_predict_without_splits(trained, fixture_dir, tmp_path):
    out = tmp_path / "p.csv"
    assert main(["predict", "--checkpoint", str(trained / "model.ckpt"),
                 "--data", str(fixture_dir / "data"), "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 61


def test_checkpoint_carries_config(trained):
    _, dims, seed, config = load_checkpoint(trained / "model.ckpt")
    assert dims.hidden == 16 and seed == 0 and config["ablation"]["no_pseudo"] is True


def test_gradcheck_default_config(capsys):
    assert main(["gradcheck"]) == 0
    assert json.loads(capsys.readouterr().out)["max_relative_error"] < 1e-4


def test_gradcheck_no_label_config():
    assert main(["gradcheck", "--set", "ablation.no_label=true", "--seed", "4"]) == 0


def test_gradcheck_bad_config_file(tmp_path):
    (tmp_path / "c.json").write_text("{not json")
    assert main(["gradcheck", "--config", str(tmp_path / "c.json")]) == 2


def test_split_command(fixture_dir, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["split", "--data", str(fixture_dir / "data"), "--out", str(out),
                 "--labeling-rate", "0.5", "--seed", "2"]) == 0
    assert load_splits(out, 60).counts()["val"] == 6


def test_sweep(fixture_dir, tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--param", "theta", "--values", "0.5,0.9", "--data",
                 str(fixture_dir / "data"), "--seeds", "2", "--out", str(out),
                 "--set", "max_epochs=3", "--set", "hidden_dim=8", "--set", "latent_dim=4"]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [r["value"] for r in rows] == ["0.5", "0.9"]
    assert all(0 <= float(r["test_accuracy_mean"]) <= 1 for r in rows)


def test_sweep_bad_values(fixture_dir):
    assert main(["sweep", "--param", "K", "--values", "a,b", "--data",
                 str(fixture_dir / "data")]) == 2
    assert main(["sweep", "--param", "depth", "--values", "1", "--data", "x"]) == 2
