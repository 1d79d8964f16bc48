"""Self-label augmentation: pseudo labels from masked stochastic forward passes.

Each round hides a random subset of nodes (they become isolated, their
feature rows are kept), runs the frozen model with a fresh latent sample and
records predictions for the visible nodes. Per-node predictions are
averaged over the rounds in which that node was visible, then filtered by
confidence and merged with the ground truth.
"""

from __future__ import annotations

import numpy as np

from .data import TRAIN_LABELED, TRAIN_UNLABELED
from .errors import DimensionError, InvalidConfigError
from .graph import apply_node_mask, normalize_adjacency, sample_node_mask
from .model import build_input, predict_proba

_SEED_BOUND = 2**63


def _encoder_input(params, x, y):
    x = np.asarray(x, dtype=np.float64)
    if params["gcn1.weight"].shape[0] == x.shape[1]:
        return x
    return build_input(x, y)


def _round_rngs(source, k):
    return [np.random.default_rng(s) for s in source.integers(_SEED_BOUND, size=k)]


def generate_pseudo_labels(params, g, x, y, k, p, rng=None, *, mask_rng=None, noise_rng=None,
                           return_rounds=False):
    """Average of ``k`` masked stochastic predictions.

    ``y`` is the ground-truth label matrix fed as label input. Masks and
    latent noise come from independent streams; either may be passed
    explicitly, otherwise both are derived from ``rng``. Per-round seeds
    are drawn up front so rounds do not depend on each other.

    With ``return_rounds=True`` also returns the list of per-round
    probability matrices and the list of masks.
    """
    if k < 1:
        raise InvalidConfigError(f"number of rounds must be >= 1, got {k}")
    if mask_rng is None or noise_rng is None:
        if rng is None:
            raise InvalidConfigError("need rng or both mask_rng and noise_rng")
        seeds = rng.integers(_SEED_BOUND, size=2)
        if mask_rng is None:
            mask_rng = np.random.default_rng(seeds[0])
        if noise_rng is None:
            noise_rng = np.random.default_rng(seeds[1])
    n = g.n
    if np.shape(x)[0] != n or np.shape(y)[0] != n:
        raise DimensionError("features/labels do not match the graph size")
    h0 = _encoder_input(params, x, y)
    latent = params["gcn_mu.weight"].shape[1]
    mask_rngs = _round_rngs(mask_rng, k)
    noise_rngs = _round_rngs(noise_rng, k)

    total = np.zeros((n, np.shape(y)[1]))
    seen = np.zeros(n, dtype=np.int64)
    rounds, masks = [], []
    for r in range(k):
        m = sample_node_mask(n, p, mask_rngs[r])
        adj = normalize_adjacency(apply_node_mask(g, m))
        noise = noise_rngs[r].standard_normal((n, latent))
        probs = predict_proba(params, adj, h0, noise)
        visible = m.astype(bool)
        total[visible] += probs[visible]
        seen += visible
        if return_rounds:
            rounds.append(probs)
            masks.append(m)
    out = np.zeros_like(total)
    has = seen > 0
    out[has] = total[has] / seen[has, None]
    if return_rounds:
        return out, rounds, masks
    return out


def confidence_filter(y_pseudo, y_true, splits, theta, hard=False) -> np.ndarray:
    """Ground truth on labelled nodes, confident pseudo rows on unlabelled training nodes.

    A pseudo row is accepted when its largest entry exceeds ``theta``.
    Accepted rows stay soft unless ``hard`` is set, in which case they are
    replaced by the one-hot argmax. Validation and test nodes always get
    zero rows.
    """
    if not 0 <= theta <= 1:
        raise InvalidConfigError(f"confidence threshold must lie in [0, 1], got {theta}")
    y_pseudo = np.asarray(y_pseudo, dtype=np.float64)
    y_true = np.asarray(y_true, dtype=np.float64)
    if y_pseudo.shape != y_true.shape:
        raise DimensionError(f"pseudo labels {y_pseudo.shape} vs true labels {y_true.shape}")
    roles = splits.roles
    out = np.zeros_like(y_true)
    labeled = roles == TRAIN_LABELED
    out[labeled] = y_true[labeled]
    accept = (roles == TRAIN_UNLABELED) & (y_pseudo.max(axis=1, initial=0.0) > theta)
    if hard:
        idx = np.flatnonzero(accept)
        out[idx, y_pseudo[idx].argmax(axis=1)] = 1.0
    else:
        out[accept] = y_pseudo[accept]
    return out


def accepted_nodes(y_aug, splits) -> np.ndarray:
    """Indices of unlabelled training nodes that carry a pseudo label."""
    return np.flatnonzero((splits.roles == TRAIN_UNLABELED) & np.any(y_aug != 0, axis=1))


def augment(params, g, x, y, splits, config, rng) -> np.ndarray:
    """Pseudo-label generation followed by confidence filtering.

    ``config`` supplies ``k``, ``p``, ``theta`` and ``hard_pseudo``; the
    ``no_mask`` ablation forces ``p = 1``.
    """
    p = 1.0 if config.ablation.no_mask else config.p
    pseudo = generate_pseudo_labels(params, g, x, y, config.k, p, rng)
    return confidence_filter(pseudo, y, splits, config.theta, hard=config.hard_pseudo)
