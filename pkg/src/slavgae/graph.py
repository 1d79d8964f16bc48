"""Undirected binary graphs in CSR form, GCN normalization and node masking.

Graphs are immutable. Every transformation (subgraph induction, masking)
returns a new graph with the same node indexing, so feature and label
matrices never need to be re-indexed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, InvalidConfigError, ParseError, IdOutOfRangeError

__all__ = [
    "SparseGraph",
    "NormalizedAdjacency",
    "normalize_adjacency",
    "induce_training_subgraph",
    "sample_node_mask",
    "apply_node_mask",
    "read_edge_list",
    "write_edge_list",
]


@dataclass(frozen=True, eq=False)
class SparseGraph:
    """Symmetric binary adjacency stored as CSR row offsets + sorted columns.

    Use :meth:`from_edges` to build one from an arbitrary edge list; the
    plain constructor expects arrays that already satisfy the invariants.
    """

    n: int
    row_offsets: np.ndarray
    col_indices: np.ndarray

    def __post_init__(self):
        ro = np.ascontiguousarray(self.row_offsets, dtype=np.int64)
        ci = np.ascontiguousarray(self.col_indices, dtype=np.int64)
        if ro.shape != (self.n + 1,) or ro[0] != 0 or ro[-1] != ci.size:
            raise DimensionError("row_offsets must have length n+1 and end at nnz")
        ro.setflags(write=False)
        ci.setflags(write=False)
        object.__setattr__(self, "row_offsets", ro)
        object.__setattr__(self, "col_indices", ci)

    @classmethod
    def from_edges(cls, n, edges) -> "SparseGraph":
        """Build from (i, j) pairs. Symmetrizes, drops duplicates and self-loops."""
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise DimensionError(f"edge endpoint outside [0, {n})")
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
        keep = src != dst
        src, dst = src[keep], dst[keep]
        key = np.unique(src * n + dst)
        src, dst = key // n, key % n
        offsets = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=offsets[1:])
        return cls(n, offsets, dst)

    @classmethod
    def empty(cls, n) -> "SparseGraph":
        return cls(n, np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int64))

    @property
    def nnz(self) -> int:
        return int(self.col_indices.size)

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return self.nnz // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def row_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.n, dtype=np.int64), self.degrees())

    def neighbors(self, i) -> np.ndarray:
        return self.col_indices[self.row_offsets[i]:self.row_offsets[i + 1]]

    def edges(self) -> np.ndarray:
        """Undirected edge list with i < j, shape (num_edges, 2)."""
        rows = self.row_ids()
        upper = rows < self.col_indices
        return np.stack([rows[upper], self.col_indices[upper]], axis=1)

    def to_dense(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        a[self.row_ids(), self.col_indices] = 1.0
        return a

    def keep_nodes(self, keep) -> "SparseGraph":
        """Drop every edge with an endpoint where ``keep`` is False."""
        keep = np.asarray(keep, dtype=bool)
        if keep.shape != (self.n,):
            raise DimensionError(f"node selector has length {keep.size}, graph has {self.n} nodes")
        rows = self.row_ids()
        sel = keep[rows] & keep[self.col_indices]
        offsets = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows[sel], minlength=self.n), out=offsets[1:])
        return SparseGraph(self.n, offsets, self.col_indices[sel])

    def subgraph(self, nodes) -> "SparseGraph":
        """Induced subgraph on ``nodes``, relabelled to 0..len(nodes)-1 in the given order."""
        nodes = np.asarray(nodes, dtype=np.int64)
        remap = np.full(self.n, -1, dtype=np.int64)
        remap[nodes] = np.arange(nodes.size)
        e = self.edges()
        if e.size:
            e = remap[e]
            e = e[(e >= 0).all(axis=1)]
        return SparseGraph.from_edges(nodes.size, e)

    def __eq__(self, other):
        if not isinstance(other, SparseGraph):
            return NotImplemented
        return (self.n == other.n
                and np.array_equal(self.row_offsets, other.row_offsets)
                and np.array_equal(self.col_indices, other.col_indices))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class NormalizedAdjacency:
    """Real-valued CSR matrix D^-1/2 (A + I) D^-1/2, self-loops included."""

    n: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    matrix: sp.csr_matrix = field(repr=False, default=None)

    def __post_init__(self):
        if self.matrix is None:
            m = sp.csr_matrix((self.values, self.col_indices, self.row_offsets), shape=(self.n, self.n))
            object.__setattr__(self, "matrix", m)

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


def normalize_adjacency(g: SparseGraph) -> NormalizedAdjacency:
    n = g.n
    deg = g.degrees().astype(np.float64) + 1.0
    rows = np.concatenate([g.row_ids(), np.arange(n)])
    cols = np.concatenate([g.col_indices, np.arange(n)])
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    # same expression for (i, j) and (j, i) keeps the result exactly symmetric
    vals = 1.0 / np.sqrt(deg[rows] * deg[cols])
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=offsets[1:])
    return NormalizedAdjacency(n, offsets, cols, vals)


def induce_training_subgraph(g: SparseGraph, splits) -> SparseGraph:
    """Remove every edge touching a validation or test node.

    ``splits`` is a :class:`~slavgae.data.SplitAssignment` or anything with a
    ``training_mask()`` method returning a boolean array of length n.
    """
    mask = np.asarray(splits.training_mask(), dtype=bool)
    if mask.shape != (g.n,):
        raise DimensionError(f"splits cover {mask.size} nodes, graph has {g.n}")
    return g.keep_nodes(mask)


def sample_node_mask(n, p, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli(p) visibility bit per node (1 = unmasked)."""
    if not 0.0 <= p <= 1.0:
        raise InvalidConfigError(f"unmasking probability must lie in [0, 1], got {p}")
    return (rng.random(n) < p).astype(np.int8)


def apply_node_mask(g: SparseGraph, m) -> SparseGraph:
    """Isolate masked nodes; indexing and node count are unchanged."""
    m = np.asarray(m)
    if m.shape != (g.n,):
        raise DimensionError(f"mask has length {m.size}, graph has {g.n} nodes")
    return g.keep_nodes(m != 0)


def read_edge_list(path, n) -> SparseGraph:
    """Parse the whitespace edge-list format ('#' comments, 0-based ids)."""
    path = Path(path)
    edges = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 2:
                raise ParseError(path, lineno, f"expected 2 node ids, got {len(parts)} fields")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(path, lineno, f"non-integer node id in {s!r}") from None
            if not (0 <= i < n and 0 <= j < n):
                raise IdOutOfRangeError(path, lineno, f"node id outside [0, {n})")
            edges.append((i, j))
    return SparseGraph.from_edges(n, edges)


def write_edge_list(g: SparseGraph, path) -> None:
    with Path(path).open("w") as fh:
        fh.write(f"# undirected edge list, {g.n} nodes, {g.num_edges} edges\n")
        for i, j in g.edges():
            fh.write(f"{i} {j}\n")
