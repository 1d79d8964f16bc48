"""Datasets on disk, train/val/test splits and a stochastic block model generator.

Directory layout read by :func:`load_dataset` and written by :func:`save_dataset`::

    meta.txt      one line: "n d C"
    edges.txt     undirected edge list (see slavgae.graph.read_edge_list)
    features.csv  n rows of d comma-separated reals, no header
    labels.csv    "node_id,class_id" rows; optional header; omitted nodes are unknown (-1)

Split files (``splits.csv``) hold "node_id,role" rows with roles
train_labeled | train_unlabeled | val | test, with an optional header.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateLabelError,
    IdOutOfRangeError,
    InvalidConfigError,
    MissingFileError,
    ParseError,
    RaggedRowError,
)
from .graph import SparseGraph, read_edge_list, write_edge_list

TRAIN_LABELED, TRAIN_UNLABELED, VAL, TEST = 0, 1, 2, 3
ROLE_NAMES = ("train_labeled", "train_unlabeled", "val", "test")
_ROLE_ALIASES = {"validation": VAL}


def role_code(role) -> int:
    if isinstance(role, (int, np.integer)):
        return int(role)
    if role in _ROLE_ALIASES:
        return _ROLE_ALIASES[role]
    try:
        return ROLE_NAMES.index(role)
    except ValueError:
        raise InvalidConfigError(f"unknown role {role!r}; expected one of {ROLE_NAMES}") from None


@dataclass(frozen=True, eq=False)
class Dataset:
    graph: SparseGraph
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        n = self.graph.n
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise InvalidConfigError(f"features must be an {n}-row matrix, got {self.features.shape}")
        if self.labels.shape != (n,):
            raise InvalidConfigError(f"labels must have length {n}")
        if np.any((self.labels < -1) | (self.labels >= self.num_classes)):
            raise InvalidConfigError(f"labels must lie in [0, {self.num_classes}) or be -1")

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def num_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True, eq=False)
class SplitAssignment:
    """Role code per node (see ``ROLE_NAMES``)."""

    roles: np.ndarray

    def __post_init__(self):
        roles = np.asarray(self.roles, dtype=np.int8)
        if roles.ndim != 1 or np.any((roles < 0) | (roles > 3)):
            raise InvalidConfigError("roles must be a vector of codes 0..3")
        if not np.any(roles == TRAIN_LABELED):
            raise InvalidConfigError("split has no train_labeled node")
        object.__setattr__(self, "roles", roles)

    @property
    def n(self) -> int:
        return self.roles.size

    def nodes(self, role) -> np.ndarray:
        return np.flatnonzero(self.roles == role_code(role))

    def training_mask(self) -> np.ndarray:
        return self.roles <= TRAIN_UNLABELED

    def labeled_mask(self) -> np.ndarray:
        return self.roles == TRAIN_LABELED

    def counts(self) -> dict:
        return {name: int(np.sum(self.roles == i)) for i, name in enumerate(ROLE_NAMES)}

    def __eq__(self, other):
        return isinstance(other, SplitAssignment) and np.array_equal(self.roles, other.roles)

    __hash__ = None


# -- files ----------------------------------------------------------------------------


def _require(path: Path):
    if not path.is_file():
        raise MissingFileError(path, None, "file not found")


def _read_meta(path: Path):
    _require(path)
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.replace(",", " ").split()
        try:
            n, d, c = (int(v) for v in parts)
        except ValueError:
            raise ParseError(path, lineno, "expected three integers 'n d C'") from None
        if n < 0 or d < 0 or c < 1:
            raise ParseError(path, lineno, "need n >= 0, d >= 0, C >= 1")
        return n, d, c
    raise ParseError(path, None, "meta line 'n d C' missing")


def _read_features(path: Path, n, d) -> np.ndarray:
    _require(path)
    rows = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if d == 0 and not s:
                rows.append([])
                continue
            parts = s.split(",") if s else []
            if len(parts) != d:
                raise RaggedRowError(path, lineno, f"expected {d} values, got {len(parts)}")
            try:
                rows.append([float(v) for v in parts])
            except ValueError:
                raise ParseError(path, lineno, "non-numeric feature value") from None
    if d == 0 and not rows:
        rows = [[] for _ in range(n)]
    if len(rows) != n:
        raise RaggedRowError(path, None, f"expected {n} rows, got {len(rows)}")
    return np.array(rows, dtype=np.float64).reshape(n, d)


def _read_labels(path: Path, n, c) -> np.ndarray:
    _require(path)
    labels = np.full(n, -1, dtype=np.int64)
    seen = np.zeros(n, dtype=bool)
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = [v.strip() for v in s.split(",")]
            if len(parts) != 2:
                raise RaggedRowError(path, lineno, "expected 'node_id,class_id'")
            try:
                node, cls = int(parts[0]), int(parts[1])
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise ParseError(path, lineno, "non-integer id") from None
            if not 0 <= node < n:
                raise IdOutOfRangeError(path, lineno, f"node id {node} outside [0, {n})")
            if not -1 <= cls < c:
                raise IdOutOfRangeError(path, lineno, f"class id {cls} outside [0, {c})")
            if seen[node]:
                raise DuplicateLabelError(path, lineno, f"node {node} labelled twice")
            seen[node] = True
            labels[node] = cls
    return labels


def load_dataset(directory) -> Dataset:
    directory = Path(directory)
    n, d, c = _read_meta(directory / "meta.txt")
    edges_path = directory / "edges.txt"
    _require(edges_path)
    graph = read_edge_list(edges_path, n)
    features = _read_features(directory / "features.csv", n, d)
    labels = _read_labels(directory / "labels.csv", n, c)
    return Dataset(graph, features, labels, c)


def save_dataset(ds: Dataset, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "meta.txt").write_text(f"{ds.n} {ds.num_features} {ds.num_classes}\n")
    write_edge_list(ds.graph, directory / "edges.txt")
    with (directory / "features.csv").open("w") as fh:
        for row in ds.features:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    with (directory / "labels.csv").open("w") as fh:
        fh.write("node_id,class_id\n")
        for i in np.flatnonzero(ds.labels >= 0):
            fh.write(f"{i},{ds.labels[i]}\n")


def load_splits(path, n=None) -> SplitAssignment:
    path = Path(path)
    _require(path)
    entries = {}
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = [v.strip() for v in s.split(",")]
            if len(parts) != 2:
                raise RaggedRowError(path, lineno, "expected 'node_id,role'")
            if lineno == 1 and parts[0] == "node_id":
                continue
            try:
                node = int(parts[0])
                code = role_code(parts[1])
            except (ValueError, InvalidConfigError) as exc:
                raise ParseError(path, lineno, str(exc)) from None
            if node < 0 or (n is not None and node >= n):
                raise IdOutOfRangeError(path, lineno, f"node id {node} out of range")
            if node in entries:
                raise DuplicateLabelError(path, lineno, f"node {node} assigned twice")
            entries[node] = code
    size = n if n is not None else (max(entries) + 1 if entries else 0)
    if sorted(entries) != list(range(size)):
        raise ParseError(path, None, f"splits must assign a role to every node 0..{size - 1}")
    roles = np.array([entries[i] for i in range(size)], dtype=np.int8)
    return SplitAssignment(roles)


def save_splits(splits: SplitAssignment, path) -> None:
    with Path(path).open("w") as fh:
        fh.write("node_id,role\n")
        for i, r in enumerate(splits.roles):
            fh.write(f"{i},{ROLE_NAMES[r]}\n")


# -- splitting ------------------------------------------------------------------------


def _round_half_up(x) -> int:
    return int(math.floor(x + 0.5))


def make_splits(ds: Dataset, fractions=(0.25, 0.25), labeling_rate=1.0, seed=0) -> SplitAssignment:
    """Random val/test split, then a labelled subset of the remaining training nodes.

    ``fractions`` is (val, test). Only nodes with a known label can become
    ``train_labeled``; the labelled count is round-half-up of
    ``labeling_rate`` times the number of such training nodes, at least 1.
    """
    val_frac, test_frac = fractions
    if val_frac < 0 or test_frac < 0 or val_frac + test_frac > 1:
        raise InvalidConfigError(f"split fractions {fractions} must be non-negative and sum to <= 1")
    if not 0 < labeling_rate <= 1:
        raise InvalidConfigError(f"labeling rate must lie in (0, 1], got {labeling_rate}")
    rng = np.random.default_rng(seed)
    n = ds.n
    n_val = _round_half_up(n * val_frac)
    n_test = _round_half_up(n * test_frac)
    if n_val + n_test > n:
        n_test = n - n_val
    perm = rng.permutation(n)
    roles = np.full(n, TRAIN_UNLABELED, dtype=np.int8)
    roles[perm[:n_val]] = VAL
    roles[perm[n_val:n_val + n_test]] = TEST
    train = perm[n_val + n_test:]
    candidates = train[ds.labels[train] >= 0]
    if candidates.size == 0:
        raise InvalidConfigError("no labelled node left in the training set")
    n_lab = min(candidates.size, max(1, _round_half_up(candidates.size * labeling_rate)))
    roles[rng.permutation(candidates)[:n_lab]] = TRAIN_LABELED
    return SplitAssignment(roles)


# -- synthetic graphs -----------------------------------------------------------------


@dataclass(frozen=True)
class SbmConfig:
    """Planted-partition graph with Gaussian class-conditional features.

    Class ``c`` has mean ``separation * e_(c mod d)``; every feature gets
    independent N(0, noise_std^2) noise.
    """

    blocks: int = 4
    nodes_per_block: int = 100
    p_intra: float = 0.05
    p_inter: float = 0.005
    feature_dim: int = 16
    separation: float = 1.0
    noise_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.blocks < 1 or self.nodes_per_block < 1 or self.feature_dim < 0:
            raise InvalidConfigError("blocks, nodes_per_block must be >= 1 and feature_dim >= 0")
        for name in ("p_intra", "p_inter"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise InvalidConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.noise_std < 0:
            raise InvalidConfigError("noise_std must be non-negative")


def _sample_pairs(rng, num_pairs, prob):
    if num_pairs == 0 or prob == 0:
        return np.zeros(0, dtype=np.int64)
    m = rng.binomial(num_pairs, prob)
    return np.sort(rng.choice(num_pairs, size=m, replace=False))


def generate_sbm(cfg: SbmConfig) -> Dataset:
    rng = np.random.default_rng(cfg.seed)
    b, m = cfg.blocks, cfg.nodes_per_block
    n = b * m
    labels = np.repeat(np.arange(b), m)
    edges = []
    # pairs are enumerated per block pair; a sampled flat index maps back to (i, j)
    for a in range(b):
        iu, ju = np.triu_indices(m, k=1)
        idx = _sample_pairs(rng, iu.size, cfg.p_intra)
        edges.append(np.stack([a * m + iu[idx], a * m + ju[idx]], axis=1))
        for c in range(a + 1, b):
            idx = _sample_pairs(rng, m * m, cfg.p_inter)
            edges.append(np.stack([a * m + idx // m, c * m + idx % m], axis=1))
    graph = SparseGraph.from_edges(n, np.concatenate(edges) if edges else np.zeros((0, 2)))
    d = cfg.feature_dim
    means = np.zeros((b, d))
    if d:
        means[np.arange(b), np.arange(b) % d] = cfg.separation
    features = means[labels] + cfg.noise_std * rng.standard_normal((n, d))
    return Dataset(graph, features, labels, b)
