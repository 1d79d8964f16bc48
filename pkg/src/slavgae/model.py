"""Variational GCN encoder, FFN label/feature decoders and the training objective.

Parameters live in a plain ``dict`` mapping names to float64 arrays, in the
order given by :func:`param_shapes`. The same dict is what the optimizer
updates and what the checkpoint writer serializes.

Forward computations are written once against a :class:`~slavgae.autodiff.Tape`
(the ``*_taped`` helpers and :func:`objective`); the numpy-level functions
below are thin wrappers that run them on a throwaway tape.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tape, Var
from .errors import DimensionError, InvalidStateError

LOG_SIGMA_BOUND = 10.0
PROB_FLOOR = 1e-12

ModelParams = dict


@dataclass(frozen=True)
class ModelDims:
    features: int
    classes: int
    hidden: int
    latent: int
    ffn_layers: int = 3
    use_labels: bool = True

    @property
    def input_dim(self) -> int:
        return self.features + self.classes if self.use_labels else self.features

    def __post_init__(self):
        if self.classes < 1 or self.hidden < 1 or self.latent < 1 or self.ffn_layers < 1:
            raise DimensionError(f"invalid model dimensions {self}")
        if self.input_dim < 1:
            raise DimensionError("encoder input is empty (no features and labels disabled)")


def _ffn_shapes(prefix, dims, out):
    widths = [dims.latent] + [dims.hidden] * (dims.ffn_layers - 1) + [out]
    shapes = []
    for k in range(dims.ffn_layers):
        shapes.append((f"{prefix}.{k}.weight", (widths[k], widths[k + 1])))
        shapes.append((f"{prefix}.{k}.bias", (widths[k + 1],)))
    return shapes


def param_shapes(dims: ModelDims) -> list:
    """Declared (name, shape) order of every parameter tensor."""
    h, z = dims.hidden, dims.latent
    return [
        ("gcn1.weight", (dims.input_dim, h)),
        ("gcn1.bias", (h,)),
        ("gcn_mu.weight", (h, z)),
        ("gcn_mu.bias", (z,)),
        ("gcn_sigma.weight", (h, z)),
        ("gcn_sigma.bias", (z,)),
        *_ffn_shapes("ffn_y", dims, dims.classes),
        *_ffn_shapes("ffn_x", dims, dims.features),
    ]


def init_params(dims: ModelDims, rng: np.random.Generator) -> ModelParams:
    """Glorot-uniform weights, zero biases."""
    params = {}
    for name, shape in param_shapes(dims):
        if name.endswith(".bias"):
            params[name] = np.zeros(shape)
        else:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-limit, limit, size=shape)
    return params


def zero_params(dims: ModelDims) -> ModelParams:
    return {name: np.zeros(shape) for name, shape in param_shapes(dims)}


def check_params(params, dims: ModelDims) -> None:
    expected = param_shapes(dims)
    if list(params) != [name for name, _ in expected]:
        raise DimensionError("parameter names/order do not match the model dimensions")
    for name, shape in expected:
        if params[name].shape != shape:
            raise DimensionError(f"{name}: shape {params[name].shape}, expected {shape}")


def build_input(x, y_aug) -> np.ndarray:
    """Encoder input: node features with the (augmented) label block appended."""
    x = np.asarray(x, dtype=np.float64)
    y_aug = np.asarray(y_aug, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 0) if x.size == 0 else x.reshape(-1, 1)
    if x.shape[0] != y_aug.shape[0]:
        raise DimensionError(f"feature rows {x.shape[0]} != label rows {y_aug.shape[0]}")
    return np.concatenate([x, y_aug], axis=1)


def label_matrix(labels, num_classes, rows=None) -> np.ndarray:
    """One-hot rows for ``rows`` (default: every node with label >= 0), zeros elsewhere."""
    labels = np.asarray(labels)
    y = np.zeros((labels.size, num_classes))
    if rows is None:
        rows = np.flatnonzero(labels >= 0)
    rows = np.asarray(rows, dtype=np.int64)
    y[rows, labels[rows]] = 1.0
    return y


# -- taped pieces ---------------------------------------------------------------


def _dense(tape, x, w, b):
    return tape.add_row_bias(tape.matmul(x, w), b)


def encoder_taped(tape: Tape, adj, h0: Var, p) -> tuple:
    """Returns (mu, log_sigma) Vars. Both heads share the first GCN layer."""
    ah0 = tape.spmm(adj, h0)
    h1 = tape.relu(_dense(tape, ah0, p["gcn1.weight"], p["gcn1.bias"]))
    ah1 = tape.spmm(adj, h1)
    mu = _dense(tape, ah1, p["gcn_mu.weight"], p["gcn_mu.bias"])
    log_sigma = _dense(tape, ah1, p["gcn_sigma.weight"], p["gcn_sigma.bias"])
    return mu, log_sigma


def reparameterize_taped(tape: Tape, mu: Var, log_sigma: Var, noise) -> Var:
    if noise is None:
        return mu
    sigma = tape.exp(tape.clip(log_sigma, -LOG_SIGMA_BOUND, LOG_SIGMA_BOUND))
    return tape.add(mu, tape.mul(sigma, tape.constant(noise)))


def ffn_taped(tape: Tape, z: Var, p, prefix: str) -> Var:
    k = 0
    h = z
    while f"{prefix}.{k}.weight" in p:
        if k:
            h = tape.relu(h)
        h = _dense(tape, h, p[f"{prefix}.{k}.weight"], p[f"{prefix}.{k}.bias"])
        k += 1
    return h


def label_loss_taped(tape: Tape, y_aug, y_hat: Var, counted_rows) -> Var:
    counted_rows = np.asarray(counted_rows, dtype=np.int64)
    if counted_rows.size == 0:
        raise InvalidStateError("label loss needs at least one labelled row")
    target = tape.constant(np.asarray(y_aug, dtype=np.float64)[counted_rows])
    probs = tape.clip(tape.masked_row_select(y_hat, counted_rows), PROB_FLOOR, 1.0)
    ce = tape.reduce_sum(tape.mul(target, tape.log(probs)))
    return tape.scale(ce, -1.0 / counted_rows.size)


def feature_loss_taped(tape: Tape, x, x_hat: Var) -> Var:
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return Var(np.array(0.0))
    diff = tape.sub(x_hat, tape.constant(x))
    return tape.reduce_mean(tape.mul(diff, diff))


def kl_taped(tape: Tape, mu: Var, log_sigma: Var) -> Var:
    ls = tape.clip(log_sigma, -LOG_SIGMA_BOUND, LOG_SIGMA_BOUND)
    var = tape.exp(tape.scale(ls, 2.0))
    inner = tape.sub(tape.add(tape.mul(mu, mu), var), tape.scale(ls, 2.0))
    total = tape.reduce_sum(tape.add_scalar(inner, -1.0))
    return tape.scale(total, 0.5 / mu.shape[0])


@dataclass
class Forward:
    mu: Var
    log_sigma: Var
    z: Var
    y_hat: Var
    x_hat: Var


def forward_taped(tape: Tape, adj, h0, pvars, noise=None) -> Forward:
    """Full pass. ``noise`` of shape (n, latent) draws z; ``None`` uses z = mu."""
    h0v = h0 if isinstance(h0, Var) else tape.constant(h0)
    mu, log_sigma = encoder_taped(tape, adj, h0v, pvars)
    z = reparameterize_taped(tape, mu, log_sigma, noise)
    y_hat = tape.softmax_rows(ffn_taped(tape, z, pvars, "ffn_y"))
    x_hat = ffn_taped(tape, z, pvars, "ffn_x")
    return Forward(mu, log_sigma, z, y_hat, x_hat)


def objective(tape: Tape, pvars, adj, h0, x, y_aug, counted_rows, noise, lambda_feat):
    """Total loss Var and a dict of its float components (label, feature, kl, total)."""
    fw = forward_taped(tape, adj, h0, pvars, noise)
    l_lab = label_loss_taped(tape, y_aug, fw.y_hat, counted_rows)
    l_feat = feature_loss_taped(tape, x, fw.x_hat)
    kl = kl_taped(tape, fw.mu, fw.log_sigma)
    total = tape.add(tape.add(l_lab, tape.scale(l_feat, lambda_feat)), kl)
    parts = {
        "label": float(l_lab.value),
        "feature": float(l_feat.value),
        "kl": float(kl.value),
        "total": float(total.value),
    }
    return total, parts


def _const_params(tape, params):
    return {k: Var(np.asarray(v, dtype=np.float64)) for k, v in params.items()}


# -- numpy-level API --------------------------------------------------------------


@dataclass
class LatentState:
    mu: np.ndarray
    log_sigma: np.ndarray
    z_sample: np.ndarray


def sample_noise(rng: np.random.Generator, n, latent) -> np.ndarray:
    return rng.standard_normal((n, latent))


def encode(adj_norm, h0, params, rng) -> LatentState:
    """One Monte Carlo draw of the node representations."""
    tape = Tape()
    p = _const_params(tape, params)
    mu, log_sigma = encoder_taped(tape, adj_norm, tape.constant(h0), p)
    z = reparameterize(mu.value, log_sigma.value, rng)
    return LatentState(mu.value, log_sigma.value, z)


def reparameterize(mu, log_sigma, rng) -> np.ndarray:
    mu = np.asarray(mu, dtype=np.float64)
    log_sigma = np.asarray(log_sigma, dtype=np.float64)
    if mu.shape != log_sigma.shape:
        raise DimensionError(f"mu {mu.shape} vs log_sigma {log_sigma.shape}")
    eps = rng.standard_normal(mu.shape)
    return mu + np.exp(np.clip(log_sigma, -LOG_SIGMA_BOUND, LOG_SIGMA_BOUND)) * eps


def decode_labels(z, params) -> np.ndarray:
    tape = Tape()
    logits = ffn_taped(tape, tape.constant(z), _const_params(tape, params), "ffn_y")
    return tape.softmax_rows(logits).value


def decode_features(z, params) -> np.ndarray:
    tape = Tape()
    return ffn_taped(tape, tape.constant(z), _const_params(tape, params), "ffn_x").value


def label_loss(y_aug, y_hat, counted_rows) -> float:
    tape = Tape()
    return float(label_loss_taped(tape, y_aug, tape.constant(y_hat), counted_rows).value)


def feature_loss(x, x_hat) -> float:
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise DimensionError(f"x {x.shape} vs x_hat {x_hat.shape}")
    if x.size == 0:
        return 0.0
    return float(np.mean((x - x_hat) ** 2))


def kl_divergence(mu, log_sigma) -> float:
    tape = Tape()
    return float(kl_taped(tape, tape.constant(mu), tape.constant(log_sigma)).value)


def total_loss(components, lambda_feat) -> float:
    l_lab, l_feat, kl = components
    return l_lab + lambda_feat * l_feat + kl


def predict_proba(params, adj_norm, h0, noise=None) -> np.ndarray:
    """Class probabilities; deterministic (z = mu) unless ``noise`` is given."""
    tape = Tape()
    return forward_taped(tape, adj_norm, h0, _const_params(tape, params), noise).y_hat.value
