"""Sparse graphs, kNN construction, shift normalization and product operators."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from . import shift as _shift
from .errors import (
    DegenerateGraphError,
    DimensionMismatchError,
    InvalidInputError,
    InvalidParameterError,
    InvalidShapeError,
    SequenceFormatError,
    UnsupportedError,
)

__all__ = [
    "Graph",
    "ProductShiftOperator",
    "PRODUCT_PRESETS",
    "build_knn_graph",
    "normalize_shift",
    "make_product",
    "product_edge_count",
    "complete_graph",
    "edgeless_graph",
    "path_graph",
    "read_edge_list",
    "write_edge_list",
    "read_points",
    "write_points",
]


@dataclass(frozen=True, eq=False)
class Graph:
    """Weighted sparse shift operator stored as row-sorted triplets.

    ``rows``, ``cols`` and ``weights`` are sorted by ``(row, col)``; ``indptr``
    gives CSR row boundaries. Entry ``(i, j)`` means node ``i`` aggregates
    from node ``j`` in ``y = S x``. Use :meth:`from_triplets` rather than the
    raw constructor.
    """

    n_nodes: int
    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    is_symmetric: bool = False
    indptr: np.ndarray = field(repr=False, default=None)

    @classmethod
    def from_triplets(cls, n_nodes, rows, cols, weights=None, symmetric=None):
        n_nodes = int(n_nodes)
        if n_nodes < 1:
            raise InvalidParameterError("n_nodes must be positive")
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        if weights is None:
            weights = np.ones(rows.shape)
        weights = np.asarray(weights, dtype=float).ravel()
        if not (rows.shape == cols.shape == weights.shape):
            raise InvalidInputError("rows, cols and weights must have equal length")
        if rows.size and (
            rows.min() < 0 or cols.min() < 0 or rows.max() >= n_nodes or cols.max() >= n_nodes
        ):
            raise InvalidInputError(f"edge index out of range for {n_nodes} nodes")
        if not np.all(np.isfinite(weights)):
            raise InvalidInputError("edge weights must be finite")
        order = np.lexsort((cols, rows))
        rows, cols, weights = rows[order], cols[order], weights[order]
        if rows.size > 1:
            dup = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
            if dup.any():
                k = int(np.argmax(dup))
                raise InvalidInputError(f"duplicate edge ({rows[k]}, {cols[k]})")
        indptr = np.zeros(n_nodes + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=n_nodes), out=indptr[1:])
        g = cls(n_nodes, rows, cols, weights, False, indptr)
        is_sym = g._check_symmetric()
        if symmetric and not is_sym:
            raise InvalidInputError("graph flagged symmetric but weight(i,j) != weight(j,i)")
        object.__setattr__(g, "is_symmetric", is_sym if symmetric is None else bool(symmetric))
        for a in (rows, cols, weights, indptr):
            a.setflags(write=False)
        return g

    @classmethod
    def from_dense(cls, matrix, symmetric=None):
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidShapeError("shift matrix must be square")
        r, c = np.nonzero(m)
        return cls.from_triplets(m.shape[0], r, c, m[r, c], symmetric=symmetric)

    def _check_symmetric(self):
        if self.rows.size == 0:
            return True
        fwd = dict(zip(zip(self.rows.tolist(), self.cols.tolist()), self.weights.tolist()))
        return all(fwd.get((j, i)) == w for (i, j), w in fwd.items())

    @property
    def n_edges(self):
        """Number of stored directed entries (self-loops included)."""
        return int(self.rows.size)

    def to_dense(self):
        m = np.zeros((self.n_nodes, self.n_nodes))
        m[self.rows, self.cols] = self.weights
        return m

    def scaled(self, factor):
        return Graph.from_triplets(
            self.n_nodes, self.rows, self.cols, self.weights * float(factor),
            symmetric=self.is_symmetric or None,
        )

    @cached_property
    def transpose(self):
        return Graph.from_triplets(self.n_nodes, self.cols, self.rows, self.weights)

    def shift(self, x):
        """``S x`` for a signal of length ``n_nodes`` (or a batch of them)."""
        return _shift.shift_nodes(self, x, 1)

    def __repr__(self):
        return f"Graph(n_nodes={self.n_nodes}, n_edges={self.n_edges}, symmetric={self.is_symmetric})"


def complete_graph(n, weight=1.0):
    """Fully connected graph without self-loops."""
    r, c = np.nonzero(~np.eye(n, dtype=bool))
    return Graph.from_triplets(n, r, c, np.full(r.shape, float(weight)))


def edgeless_graph(n):
    return Graph.from_triplets(n, [], [], [])


def path_graph(n, weight=1.0):
    i = np.arange(n - 1)
    return Graph.from_triplets(
        n, np.r_[i, i + 1], np.r_[i + 1, i], np.full(2 * (n - 1), float(weight))
    )


def build_knn_graph(points, k, weighting="gaussian"):
    """Symmetrized k-nearest-neighbour graph over a point cloud.

    Each point links to its ``k`` nearest other points (Euclidean). The
    directed kNN relation is symmetrized by union, keeping the larger weight
    when both directions exist. With ``weighting="gaussian"`` the weight is
    ``exp(-d**2 / sigma**2)`` where ``sigma`` is the mean kNN distance.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[1] < 1:
        raise InvalidInputError("points must be an N x D array with D >= 1")
    n = pts.shape[0]
    k = int(k)
    if k < 1 or k >= n:
        raise InvalidParameterError(f"k must satisfy 1 <= k < N (k={k}, N={n})")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("point coordinates must be finite")
    if weighting not in ("gaussian", "binary"):
        raise InvalidParameterError(f"unknown weighting {weighting!r}")

    # query k+1 and drop self; exact duplicates may displace self from slot 0
    dist, idx = cKDTree(pts).query(pts, k=min(k + 1, n))
    src, dst, d = [], [], []
    for i in range(n):
        keep = idx[i] != i
        nb, dd = idx[i][keep][:k], dist[i][keep][:k]
        src.append(np.full(nb.shape, i))
        dst.append(nb)
        d.append(dd)
    src, dst, d = np.concatenate(src), np.concatenate(dst), np.concatenate(d)

    if weighting == "binary":
        w = np.ones(d.shape)
    else:
        sigma = d.mean()
        w = np.exp(-(d**2) / sigma**2) if sigma > 0 else np.ones(d.shape)

    both = np.concatenate([np.stack([src, dst], 1), np.stack([dst, src], 1)])
    ww = np.concatenate([w, w])
    merged = {}
    for (i, j), wij in zip(both.tolist(), ww.tolist()):
        if wij > merged.get((i, j), -np.inf):
            merged[(i, j)] = wij
    keys = np.array(list(merged.keys()), dtype=np.int64).reshape(-1, 2)
    return Graph.from_triplets(n, keys[:, 0], keys[:, 1], list(merged.values()), symmetric=True)


def spectral_norm_estimate(g, tol=1e-10, max_iter=10_000, seed=0):
    """Largest singular value of ``S`` by power iteration on ``S^T S``."""
    if g.n_edges == 0 or not np.any(g.weights):
        raise DegenerateGraphError("graph has no nonzero edges")
    v = np.random.default_rng(seed).standard_normal(g.n_nodes)
    v /= np.linalg.norm(v)
    st = g.transpose
    lam = 0.0
    for _ in range(max_iter):
        w = st.shift(g.shift(v))
        new = float(v @ w)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            raise DegenerateGraphError("power iteration collapsed to zero")
        v = w / nrm
        if lam > 0 and abs(new - lam) < tol * lam:
            lam = new
            break
        lam = new
    return float(np.sqrt(lam))


def normalize_shift(g, tol=1e-10, max_iter=10_000):
    """Scale ``g`` to unit spectral norm (power-iteration estimate)."""
    if tol <= 0:
        raise InvalidParameterError("tol must be positive")
    return g.scaled(1.0 / spectral_norm_estimate(g, tol, max_iter))


PRODUCT_PRESETS = {
    "cartesian": ((1, 0, 1.0), (0, 1, 1.0)),
    "kronecker": ((1, 1, 1.0),),
    "strong": ((1, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)),
}


@dataclass(frozen=True, eq=False)
class ProductShiftOperator:
    """Lazy ``sum_ij s_ij (S^i kron S_F^j)`` acting on node-major signals."""

    node_graph: Graph
    feature_graph: Graph
    terms: tuple
    kind: str = "custom"

    @property
    def n_nodes(self):
        return self.node_graph.n_nodes

    @property
    def n_features(self):
        return self.feature_graph.n_nodes

    @property
    def dim(self):
        return self.n_nodes * self.n_features

    def apply(self, x):
        """One application of the product shift to ``(N*F,)`` or ``(B, N*F)``."""
        n, f = self.n_nodes, self.n_features
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != n * f:
            raise DimensionMismatchError(f"expected length {n * f}, got {x.shape[-1]}")
        out = np.zeros(x.shape)
        node_shifted = None
        for i, j, s in self.terms:
            if s == 0:
                continue
            if i == 0 and j == 0:
                term = x
            elif i == 1 and j == 0:
                if node_shifted is None:
                    node_shifted = _shift.shift_nodes(self.node_graph, x, f)
                term = node_shifted
            elif i == 0 and j == 1:
                term = _shift.shift_features(self.feature_graph, x, n)
            else:
                if node_shifted is None:
                    node_shifted = _shift.shift_nodes(self.node_graph, x, f)
                term = _shift.shift_features(self.feature_graph, node_shifted, n)
            out += s * term
        return out

    def to_dense(self):
        """Dense ``NF x NF`` matrix; test-scale only."""
        s, sf = self.node_graph.to_dense(), self.feature_graph.to_dense()
        out = np.zeros((self.dim, self.dim))
        for i, j, c in self.terms:
            out += c * np.kron(np.linalg.matrix_power(s, i), np.linalg.matrix_power(sf, j))
        return out


def make_product(node_graph, feature_graph, kind="cartesian", terms=None):
    """Build a lazy product shift operator.

    ``kind`` is one of ``cartesian``, ``kronecker``, ``strong`` or ``custom``;
    ``custom`` takes ``terms`` as ``(i, j, s_ij)`` with ``i, j`` in ``{0, 1}``
    and real ``s_ij``.
    """
    if node_graph.n_nodes < 1 or feature_graph.n_nodes < 1:
        raise InvalidInputError("product factors must be non-empty")
    if kind == "custom":
        if terms is None:
            raise InvalidParameterError("custom product needs explicit terms")
        clean = []
        for i, j, s in terms:
            if i not in (0, 1) or j not in (0, 1):
                raise InvalidParameterError(f"term powers must be 0 or 1, got ({i}, {j})")
            if not np.isfinite(s):
                raise InvalidParameterError("term coefficient must be finite")
            clean.append((int(i), int(j), float(s)))
        terms = tuple(clean)
    elif kind in PRODUCT_PRESETS:
        if terms is not None:
            raise InvalidParameterError(f"{kind} product does not take terms")
        terms = PRODUCT_PRESETS[kind]
    else:
        raise InvalidParameterError(f"unknown product kind {kind!r}")
    return ProductShiftOperator(node_graph, feature_graph, terms, kind)


def product_edge_count(op):
    """Stored entries of the Cartesian product shift: ``F|E| + N|E_F|``."""
    if op.kind != "cartesian":
        raise UnsupportedError(f"edge count formula is defined for cartesian products, not {op.kind}")
    return op.n_features * op.node_graph.n_edges + op.n_nodes * op.feature_graph.n_edges


# --- CSV I/O -----------------------------------------------------------------


def write_edge_list(g, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["src", "dst", "weight"])
        for i, j, x in zip(g.rows.tolist(), g.cols.tolist(), g.weights.tolist()):
            w.writerow([i, j, repr(x)])


def read_edge_list(path, n_nodes=None):
    """Read a ``src,dst,weight`` edge list. ``n_nodes`` defaults to max index + 1."""
    rows, cols, ws = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["src", "dst", "weight"]:
            raise SequenceFormatError(f"{path}: expected header src,dst,weight")
        for r, line in enumerate(reader, start=1):
            if not line:
                continue
            if len(line) != 3:
                raise SequenceFormatError(f"{path}: expected 3 fields", row=r)
            try:
                rows.append(int(line[0]))
                cols.append(int(line[1]))
                ws.append(float(line[2]))
            except ValueError as exc:
                raise SequenceFormatError(f"{path}: {exc}", row=r) from None
    if n_nodes is None:
        n_nodes = max(max(rows, default=-1), max(cols, default=-1)) + 1
    return Graph.from_triplets(n_nodes, rows, cols, ws)


def write_points(points, path):
    pts = np.asarray(points, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node"] + [f"c{d + 1}" for d in range(pts.shape[1])])
        for i, row in enumerate(pts.tolist()):
            w.writerow([i] + [repr(v) for v in row])


def read_points(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "node" or len(header) < 2:
            raise SequenceFormatError(f"{path}: expected header node,c1,...,cD")
        out = []
        for r, line in enumerate(reader, start=1):
            if not line:
                continue
            if len(line) != len(header):
                raise SequenceFormatError(f"{path}: ragged row", row=r)
            if int(line[0]) != len(out):
                raise SequenceFormatError(f"{path}: node ids must be 0..N-1 in order", row=r)
            vals = [float(v) for v in line[1:]]
            if not all(np.isfinite(vals)):
                raise SequenceFormatError(f"{path}: non-finite coordinate", row=r)
            out.append(vals)
    return np.array(out, dtype=float)


def save_graph(g, path):
    write_edge_list(g, path)


def load_graph(path, n_nodes=None):
    return read_edge_list(path, n_nodes)

