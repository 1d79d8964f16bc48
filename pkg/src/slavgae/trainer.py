"""Training loop with warm-up staging, self-label augmentation and early stopping.

Training only ever sees the training nodes: validation and test nodes are
dropped from the graph, the feature matrix and the label matrix before the
first epoch (the model is run on the induced training subgraph, relabelled
to a compact index range). Evaluation runs on the full graph with every
node visible and ground-truth labels of ``train_labeled`` nodes as the only
label input.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .autodiff import Tape
from .data import TRAIN_LABELED, Dataset, SplitAssignment, role_code
from .errors import DimensionError, InvalidConfigError, InvalidQueryError, NumericError
from .graph import normalize_adjacency
from .metrics import MetricsReport, score
from .model import ModelDims, build_input, init_params, label_matrix, objective, predict_proba
from .slam import accepted_nodes, augment

log = logging.getLogger(__name__)


# -- configuration ----------------------------------------------------------------------


@dataclass
class Ablation:
    no_feature: bool = False
    no_mask: bool = False
    no_pseudo: bool = False
    no_label: bool = False


@dataclass
class TrainConfig:
    hidden_dim: int = 512
    latent_dim: int = 512
    gcn_layers: int = 2
    ffn_layers: int = 3
    lambda_feat: float = 0.1
    k: int = 2
    p: float = 0.7
    theta: float = 0.9
    lr: float = 0.001
    warm_up_epochs: int = 1
    max_epochs: int = 500
    patience: int = 30
    seed: int = 0
    optimizer: str = "adam"
    hard_pseudo: bool = False
    slam_interval: int = 1
    ablation: Ablation = field(default_factory=Ablation)

    def __post_init__(self):
        if isinstance(self.ablation, dict):
            self.ablation = _build(Ablation, self.ablation, "ablation")
        self.validate()

    def validate(self):
        if self.hidden_dim < 1 or self.latent_dim < 1 or self.ffn_layers < 1:
            raise InvalidConfigError("hidden_dim, latent_dim and ffn_layers must be >= 1")
        if self.gcn_layers != 2:
            raise InvalidConfigError("only the two-layer GCN encoder is supported")
        for name in ("p", "theta"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise InvalidConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.k < 1:
            raise InvalidConfigError("k must be >= 1")
        if self.lr <= 0 or self.lambda_feat < 0:
            raise InvalidConfigError("lr must be positive and lambda_feat non-negative")
        if self.warm_up_epochs < 0 or self.max_epochs < 1 or self.patience < 1 or self.slam_interval < 1:
            raise InvalidConfigError("epoch counts out of range")
        if self.optimizer not in ("adam", "sgd"):
            raise InvalidConfigError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")

    @property
    def effective_lambda_feat(self) -> float:
        return 0.0 if self.ablation.no_feature else self.lambda_feat

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "TrainConfig":
        return _build(cls, d, "config")

    def with_overrides(self, overrides) -> "TrainConfig":
        """Apply ``{"dotted.key": value}`` overrides, e.g. ``{"ablation.no_pseudo": True}``."""
        d = self.to_dict()
        for key, value in overrides.items():
            node = d
            parts = key.split(".")
            for part in parts[:-1]:
                if not isinstance(node.get(part), dict):
                    raise InvalidConfigError(f"unknown config key {key!r}")
                node = node[part]
            if parts[-1] not in node:
                raise InvalidConfigError(f"unknown config key {key!r}")
            node[parts[-1]] = value
        return TrainConfig.from_dict(d)


def _build(cls, d, where):
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise InvalidConfigError(f"unknown {where} keys: {sorted(unknown)}")
    kwargs = {}
    for f in fields(cls):
        if f.name not in d:
            continue
        v = d[f.name]
        if f.type == "int" and not isinstance(v, bool):
            if isinstance(v, float) and not v.is_integer():
                raise InvalidConfigError(f"{where}.{f.name} must be an integer, got {v!r}")
            v = int(v)
        elif f.type == "float":
            v = float(v)
        elif f.type == "bool" and not isinstance(v, bool):
            raise InvalidConfigError(f"{where}.{f.name} must be true/false, got {v!r}")
        kwargs[f.name] = v
    return cls(**kwargs)


def model_dims(config: TrainConfig, dataset: Dataset) -> ModelDims:
    return ModelDims(dataset.num_features, dataset.num_classes, config.hidden_dim,
                     config.latent_dim, config.ffn_layers, not config.ablation.no_label)


# -- optimizers ---------------------------------------------------------------------------

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class OptimizerState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def optimizer_step(params, grads, state: OptimizerState, config: TrainConfig):
    """One update; returns new parameter arrays and advances ``state`` in place."""
    lr = config.lr
    for name, w in params.items():
        if grads[name].shape != w.shape:
            raise DimensionError(f"{name}: gradient {grads[name].shape} vs parameter {w.shape}")
    if config.optimizer == "sgd":
        return {name: w - lr * grads[name] for name, w in params.items()}
    state.step += 1
    bc1 = 1.0 - ADAM_BETA1 ** state.step
    bc2 = 1.0 - ADAM_BETA2 ** state.step
    new = {}
    for name, w in params.items():
        g = grads[name]
        m = ADAM_BETA1 * state.m.get(name, 0.0) + (1.0 - ADAM_BETA1) * g
        v = ADAM_BETA2 * state.v.get(name, 0.0) + (1.0 - ADAM_BETA2) * (g * g)
        state.m[name], state.v[name] = m, v
        new[name] = w - lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
    return new


# -- history --------------------------------------------------------------------------------

HISTORY_COLUMNS = ("epoch", "loss", "label_loss", "feature_loss", "kl",
                   "pseudo_count", "val_accuracy", "val_mcc")


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    label_loss: float
    feature_loss: float
    kl: float
    pseudo_count: int
    val_accuracy: float
    val_mcc: float
    wall_time: float = field(default=0.0, compare=False)

    def row(self):
        return [self.epoch, repr(self.loss), repr(self.label_loss), repr(self.feature_loss),
                repr(self.kl), self.pseudo_count, repr(self.val_accuracy), repr(self.val_mcc)]


@dataclass
class TrainHistory:
    records: list = field(default_factory=list)
    best_epoch: int = 0

    def append(self, rec: EpochRecord):
        if self.records and rec.epoch <= self.records[-1].epoch:
            raise ValueError("epoch indices must increase")
        self.records.append(rec)

    @property
    def losses(self):
        return [r.loss for r in self.records]

    def write_csv(self, path) -> None:
        """Header: epoch,loss,label_loss,feature_loss,kl,pseudo_count,val_accuracy,val_mcc."""
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HISTORY_COLUMNS)
            for r in self.records:
                w.writerow(r.row())


# -- inference ------------------------------------------------------------------------------


def _uses_labels(params, num_features):
    return params["gcn1.weight"].shape[0] != num_features


def inference_labels(dataset: Dataset, splits: SplitAssignment) -> np.ndarray:
    """Label input at inference: one-hot ground truth on train_labeled nodes only."""
    return label_matrix(dataset.labels, dataset.num_classes, splits.nodes(TRAIN_LABELED))


def predict(params, graph, x, y_input):
    """Deterministic (z = mu) class ids and probability matrix.

    ``y_input`` is the label block of the encoder input; it is ignored by
    models trained without label input. Ties resolve to the lowest class id.
    """
    x = np.asarray(x, dtype=np.float64)
    h0 = build_input(x, y_input) if _uses_labels(params, x.shape[1]) else x
    probs = predict_proba(params, normalize_adjacency(graph), h0)
    return probs.argmax(axis=1), probs


def evaluate(params, dataset: Dataset, splits: SplitAssignment, role, _adj=None) -> MetricsReport:
    code = role_code(role)
    nodes = splits.nodes(code)
    nodes = nodes[dataset.labels[nodes] >= 0]
    if nodes.size == 0:
        raise InvalidQueryError(f"no labelled nodes with role {role!r}")
    pred, _ = _predict_full(params, dataset, splits, _adj)
    return score(dataset.labels[nodes], pred[nodes], dataset.num_classes, str(role))


def _predict_full(params, dataset, splits, adj=None):
    x = dataset.features
    y_in = inference_labels(dataset, splits)
    h0 = build_input(x, y_in) if _uses_labels(params, x.shape[1]) else x
    adj = adj if adj is not None else normalize_adjacency(dataset.graph)
    probs = predict_proba(params, adj, h0)
    return probs.argmax(axis=1), probs


# -- training -------------------------------------------------------------------------------


@dataclass
class TrainingView:
    """Training nodes only, compactly re-indexed."""

    nodes: np.ndarray
    graph: object
    adj: object
    features: np.ndarray
    y_true: np.ndarray
    splits: SplitAssignment


def training_view(dataset: Dataset, splits: SplitAssignment) -> TrainingView:
    nodes = np.flatnonzero(splits.training_mask())
    sub = dataset.graph.subgraph(nodes)
    local = SplitAssignment(splits.roles[nodes])
    y_true = label_matrix(dataset.labels[nodes], dataset.num_classes, local.nodes(TRAIN_LABELED))
    return TrainingView(nodes, sub, normalize_adjacency(sub), dataset.features[nodes], y_true, local)


def train(dataset: Dataset, splits: SplitAssignment, config: TrainConfig, on_epoch=None):
    """Fit the model; returns ``(params, history)`` with the best-validation parameters.

    ``on_epoch(epoch, y_aug)`` is called with the label matrix used by each
    epoch (training-view indexing), mainly for inspection in tests.
    """
    if splits.n != dataset.n:
        raise DimensionError(f"splits cover {splits.n} nodes, dataset has {dataset.n}")
    labeled = splits.nodes(TRAIN_LABELED)
    if labeled.size == 0 or np.any(dataset.labels[labeled] < 0):
        raise InvalidConfigError("training needs train_labeled nodes with known labels")

    view = training_view(dataset, splits)
    dims = model_dims(config, dataset)
    init_seq, slam_seq, noise_seq = np.random.SeedSequence(config.seed).spawn(3)
    params = init_params(dims, np.random.default_rng(init_seq))
    slam_rng = np.random.default_rng(slam_seq)
    noise_rng = np.random.default_rng(noise_seq)
    state = OptimizerState()

    has_val = splits.nodes("val").size > 0 and np.any(dataset.labels[splits.nodes("val")] >= 0)
    full_adj = normalize_adjacency(dataset.graph)
    lam = config.effective_lambda_feat
    pseudo_allowed = not (config.ablation.no_pseudo or config.ablation.no_label)

    history = TrainHistory()
    best_params, best_acc, stale = params, -np.inf, 0
    y_aug = None
    start = time.perf_counter()
    for epoch in range(1, config.max_epochs + 1):
        if pseudo_allowed and epoch > config.warm_up_epochs:
            if y_aug is None or (epoch - config.warm_up_epochs - 1) % config.slam_interval == 0:
                y_aug = augment(params, view.graph, view.features, view.y_true,
                                view.splits, config, slam_rng)
        else:
            y_aug = view.y_true
        if on_epoch is not None:
            on_epoch(epoch, y_aug)

        h0 = build_input(view.features, y_aug) if dims.use_labels else view.features
        counted = np.flatnonzero(np.any(y_aug != 0, axis=1))
        noise = noise_rng.standard_normal((view.nodes.size, dims.latent))
        tape = Tape()
        pvars = {name: tape.param(name, w) for name, w in params.items()}
        try:
            loss, parts = objective(tape, pvars, view.adj, h0, view.features, y_aug,
                                    counted, noise, lam)
            grads = tape.backward(loss)
            params = optimizer_step(params, grads, state, config)
            if has_val:
                val = evaluate(params, dataset, splits, "val", _adj=full_adj)
        except NumericError as exc:
            raise NumericError(f"epoch {epoch}: {exc}") from exc
        if not all(np.all(np.isfinite(w)) for w in params.values()):
            raise NumericError(f"epoch {epoch}: parameters diverged")

        val_acc, val_mcc = (val.accuracy, val.mcc) if has_val else (float("nan"), float("nan"))
        rec = EpochRecord(epoch, parts["total"], parts["label"], parts["feature"], parts["kl"],
                          int(accepted_nodes(y_aug, view.splits).size), val_acc, val_mcc,
                          time.perf_counter() - start)
        history.append(rec)
        log.info("epoch %d loss %.5f val_acc %.4f pseudo %d (%.2fs)", epoch, rec.loss,
                 val_acc, rec.pseudo_count, rec.wall_time)

        if not has_val:
            best_params, history.best_epoch = params, epoch
            continue
        if val_acc > best_acc:
            best_acc, best_params, history.best_epoch, stale = val_acc, params, epoch, 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return best_params, history


def save_run_config(config: TrainConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
