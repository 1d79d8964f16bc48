import numpy as np
import pytest

from slavgae.data import Dataset, SbmConfig, SplitAssignment, generate_sbm, make_splits
from slavgae.errors import DimensionError, InvalidConfigError, InvalidQueryError
from slavgae.graph import SparseGraph
from slavgae.model import ModelDims, param_shapes
from slavgae.trainer import (
    HISTORY_COLUMNS,
    EpochRecord,
    OptimizerState,
    TrainConfig,
    TrainHistory,
    evaluate,
    optimizer_step,
    predict,
    train,
    training_view,
)

SMALL = {"hidden_dim": 16, "latent_dim": 8}


@pytest.fixture(scope="module")
def toy():
    ds = generate_sbm(SbmConfig(blocks=3, nodes_per_block=20, p_intra=0.25, p_inter=0.02,
                                feature_dim=6, separation=2.0, seed=1))
    return ds, make_splits(ds, (0.2, 0.2), 0.2, seed=1)


def cfg(**kw):
    return TrainConfig.from_dict({**SMALL, "lr": 0.01, "max_epochs": 20, **kw})


def test_config_defaults():
    c = TrainConfig()
    assert (c.hidden_dim, c.latent_dim, c.k, c.p, c.theta, c.lr) == (512, 512, 2, 0.7, 0.9, 0.001)
    assert (c.warm_up_epochs, c.max_epochs, c.patience, c.optimizer) == (1, 500, 30, "adam")
    assert c.lambda_feat == 0.1 and not c.ablation.no_pseudo


def test_config_validation_and_round_trip():
    with pytest.raises(InvalidConfigError):
        TrainConfig(p=1.2)
    with pytest.raises(InvalidConfigError):
        TrainConfig(hidden_dim=0)
    with pytest.raises(InvalidConfigError):
        TrainConfig(optimizer="rmsprop")
    with pytest.raises(InvalidConfigError):
        TrainConfig.from_dict({"bogus": 1})
    c = TrainConfig(k=3).with_overrides({"ablation.no_mask": True, "theta": 0.5})
    assert TrainConfig.from_dict(c.to_dict()) == c
    assert c.ablation.no_mask and c.theta == 0.5 and c.k == 3


def test_no_feature_zeroes_lambda():
    assert TrainConfig().with_overrides({"ablation.no_feature": True}).effective_lambda_feat == 0


def test_sgd_step_example():
    c = TrainConfig(optimizer="sgd", lr=0.1)
    out = optimizer_step({"w": np.array([1.0])}, {"w": np.array([0.5])}, OptimizerState(), c)
    assert out["w"].tolist() == [0.95]


def test_adam_first_step_moves_by_lr_sign():
    c = TrainConfig(lr=0.01)
    g = np.array([3.0, -0.2, 1e-3])
    out = optimizer_step({"w": np.zeros(3)}, {"w": g}, OptimizerState(), c)
    np.testing.assert_allclose(out["w"], -0.01 * np.sign(g), rtol=1e-4)


@pytest.mark.parametrize("opt", ["adam", "sgd"])
def test_zero_gradient_leaves_params(opt):
    w = np.array([[1.0, -2.0]])
    out = optimizer_step({"w": w}, {"w": np.zeros_like(w)}, OptimizerState(), TrainConfig(optimizer=opt))
    assert np.array_equal(out["w"], w)


def test_optimizer_shape_mismatch():
    with pytest.raises(DimensionError):
        optimizer_step({"w": np.zeros(2)}, {"w": np.zeros(3)}, OptimizerState(), TrainConfig())


def test_history_monotone_epochs():
    h = TrainHistory()
    h.append(EpochRecord(1, 1.0, 1.0, 0.0, 0.0, 0, 0.5, 0.0))
    with pytest.raises(ValueError):
        h.append(EpochRecord(1, 1.0, 1.0, 0.0, 0.0, 0, 0.5, 0.0))


def test_warm_up_uses_true_labels(toy):
    ds, sp = toy
    view = training_view(ds, sp)
    seen = {}
    train(ds, sp, cfg(warm_up_epochs=3, max_epochs=5, theta=0.0),
          on_epoch=lambda e, y: seen.__setitem__(e, y.copy()))
    for e in (1, 2, 3):
        assert np.array_equal(seen[e], view.y_true)
    assert not np.array_equal(seen[4], view.y_true)


def test_no_pseudo_uses_true_labels_throughout(toy):
    ds, sp = toy
    view = training_view(ds, sp)
    seen = []
    _, hist = train(ds, sp, cfg(theta=0.0).with_overrides({"ablation.no_pseudo": True}),
                    on_epoch=lambda e, y: seen.append(y))
    assert all(np.array_equal(y, view.y_true) for y in seen)
    assert all(r.pseudo_count == 0 for r in hist.records)


def test_loss_decreases_and_run_is_deterministic(toy, tmp_path):
    ds, sp = toy
    c = cfg(max_epochs=40, patience=100)
    p1, h1 = train(ds, sp, c)
    p2, h2 = train(ds, sp, c)
    assert h1.records[-1].loss < h1.records[0].loss
    assert h1 == h2
    for k in p1:
        assert p1[k].tobytes() == p2[k].tobytes()
    h1.write_csv(tmp_path / "a.csv")
    h2.write_csv(tmp_path / "b.csv")
    text = (tmp_path / "a.csv").read_text()
    assert text == (tmp_path / "b.csv").read_text()
    assert text.splitlines()[0] == ",".join(HISTORY_COLUMNS)
    assert len(text.splitlines()) == len(h1.records) + 1


def test_early_stopping_returns_best_validation_params(toy):
    ds, sp = toy
    params, hist = train(ds, sp, cfg(max_epochs=200, patience=5))
    accs = [r.val_accuracy for r in hist.records]
    assert len(accs) < 200
    assert hist.best_epoch == int(np.argmax(accs)) + 1
    assert len(accs) - hist.best_epoch == 5
    assert evaluate(params, ds, sp, "val").accuracy == max(accs)


def test_no_label_ablation_trains(toy):
    ds, sp = toy
    params, hist = train(ds, sp, cfg().with_overrides({"ablation.no_label": True}))
    assert params["gcn1.weight"].shape[0] == ds.num_features
    assert all(np.isfinite(r.loss) for r in hist.records)
    assert 0 <= evaluate(params, ds, sp, "test").accuracy <= 1


def test_sgd_training_runs(toy):
    ds, sp = toy
    _, hist = train(ds, sp, cfg(optimizer="sgd", lr=0.05))
    assert all(np.isfinite(r.loss) for r in hist.records)


def test_train_requires_labeled_nodes(toy):
    ds, sp = toy
    roles = sp.roles.copy()
    bad = Dataset(ds.graph, ds.features, np.where(roles == 0, -1, ds.labels), ds.num_classes)
    with pytest.raises(InvalidConfigError):
        train(bad, sp, cfg())


def test_train_without_validation_returns_last(toy):
    ds, sp = toy
    roles = sp.roles.copy()
    roles[roles == 2] = 1
    _, hist = train(ds, SplitAssignment(roles), cfg(max_epochs=4))
    assert hist.best_epoch == 4 and np.isnan(hist.records[0].val_accuracy)


def test_training_epochs_ignore_held_out_data(toy):
    ds, sp = toy
    held = np.flatnonzero(~sp.training_mask())
    rng = np.random.default_rng(0)
    feats = ds.features.copy()
    feats[held] = rng.normal(scale=10, size=(held.size, ds.num_features))
    labels = ds.labels.copy()
    labels[held] = rng.integers(0, ds.num_classes, size=held.size)
    edges = ds.graph.edges()
    kept = edges[~np.isin(edges, held).any(axis=1)]
    extra = np.array([(h, int(j)) for h in held for j in rng.choice(ds.n, size=2) if h != j])
    mutated = Dataset(SparseGraph.from_edges(ds.n, np.concatenate([kept, extra])), feats, labels,
                      ds.num_classes)
    c = cfg(max_epochs=5, warm_up_epochs=1, theta=0.3)
    _, h1 = train(ds, sp, c)
    _, h2 = train(mutated, sp, c)
    assert [r.loss for r in h1.records] == [r.loss for r in h2.records]
    assert [r.pseudo_count for r in h1.records] == [r.pseudo_count for r in h2.records]


def perfect_params(c):
    dims = ModelDims(features=c, classes=c, hidden=c, latent=c, use_labels=False)
    eye = np.eye(c)
    params = {name: np.zeros(shape) for name, shape in param_shapes(dims)}
    params["gcn1.weight"] = eye.copy()
    params["gcn_mu.weight"] = eye.copy()
    params["ffn_y.0.weight"] = eye.copy()
    params["ffn_y.1.weight"] = eye.copy()
    params["ffn_y.2.weight"] = 20 * eye
    return params


def test_evaluate_perfect_model():
    labels = np.array([0, 1, 2, 1])
    ds = Dataset(SparseGraph.empty(4), np.eye(3)[labels], labels, 3)
    sp = SplitAssignment(np.array([0, 1, 3, 3]))
    rep = evaluate(perfect_params(3), ds, sp, "test")
    assert rep.accuracy == 1.0 and rep.mcc == 1.0 and rep.count == 2
    ids, probs = predict(perfect_params(3), ds.graph, ds.features, np.zeros((4, 3)))
    assert ids.tolist() == labels.tolist()
    assert np.array_equal(ids, probs.argmax(axis=1))


def test_evaluate_missing_role():
    labels = np.array([0, 1])
    ds = Dataset(SparseGraph.empty(2), np.eye(2)[labels], labels, 2)
    with pytest.raises(InvalidQueryError):
        evaluate(perfect_params(2), ds, SplitAssignment(np.array([0, 3])), "val")


def test_predict_ties_go_to_lowest_class():
    dims = ModelDims(features=2, classes=3, hidden=2, latent=2, use_labels=False)
    params = {name: np.zeros(shape) for name, shape in param_shapes(dims)}
    ids, probs = predict(params, SparseGraph.empty(3), np.ones((3, 2)), np.zeros((3, 3)))
    assert ids.tolist() == [0, 0, 0]


def test_evaluate_matches_recomputation(toy):
    ds, sp = toy
    params, _ = train(ds, sp, cfg(max_epochs=10))
    y_in = np.zeros((ds.n, ds.num_classes))
    lab = sp.nodes("train_labeled")
    y_in[lab, ds.labels[lab]] = 1
    ids, _ = predict(params, ds.graph, ds.features, y_in)
    te = sp.nodes("test")
    assert evaluate(params, ds, sp, "test").accuracy == np.mean(ids[te] == ds.labels[te])
