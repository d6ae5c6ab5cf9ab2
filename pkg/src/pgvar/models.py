"""Predictor families: dense VAR, graph VAR, product-graph VAR and its generalization.

All families share the recursion ``x_t = -sum_p H_p x_{t-p} + e_t``; the
stored coefficients are the ``h`` of that recursion and the minus sign is
applied at prediction time.

Coefficient layouts
-------------------
VAR     ``(P, NF, NF)``        dense lag matrices ``A_p``
GVAR    ``(C, P, K+1)``        ``C = 1`` shared or ``C = F`` one filter per feature channel
PGVAR   ``(P, K+1)``           ``H_p = sum_k h[p, k] S_prod^k``
GPGVAR  ``(P, K+1, L+1)``      ``H_p = sum_{k,l} h[p, k, l] (S^k kron S_F^l)``
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import filtering
from .errors import (
    DimensionMismatchError,
    InsufficientDataError,
    InvalidParameterError,
    UnsupportedError,
)
from .signal import SignalSequence
from .graph import Graph, ProductShiftOperator, edgeless_graph, make_product, read_edge_list, write_edge_list

FAMILIES = ("VAR", "GVAR", "PGVAR", "GPGVAR")


@dataclass(frozen=True, eq=False)
class ModelParams:
    family: str
    P: int
    coeffs: np.ndarray
    n_nodes: int
    n_features: int = 1
    K: int = 0
    L: int = 0
    node_graph: Graph | None = None
    feature_graph: Graph | None = None
    product: ProductShiftOperator | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidParameterError(f"unknown family {self.family!r}")
        if self.P < 1 or self.K < 0 or self.L < 0:
            raise InvalidParameterError("need P >= 1, K >= 0, L >= 0")
        c = np.array(self.coeffs, dtype=float)
        if not np.all(np.isfinite(c)):
            raise InvalidParameterError("coefficients must be finite")
        expected = {
            "VAR": [(self.P, self.dim, self.dim)],
            "GVAR": [(1, self.P, self.K + 1), (self.n_features, self.P, self.K + 1)],
            "PGVAR": [(self.P, self.K + 1)],
            "GPGVAR": [(self.P, self.K + 1, self.L + 1)],
        }[self.family]
        if c.shape not in expected:
            raise DimensionMismatchError(
                f"{self.family} coefficients must have shape {expected[0]}, got {c.shape}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def dim(self):
        return self.n_nodes * self.n_features

    @property
    def n_params(self):
        return int(self.coeffs.size)

    @property
    def order(self):
        return (self.P, self.K, self.L)


def var_model(A):
    A = np.asarray(A, dtype=float)
    return ModelParams("VAR", A.shape[0], A, n_nodes=A.shape[1])


def gvar_model(graph, h, n_features=1):
    """Graph VAR. ``h`` is ``(P, K+1)`` (shared) or ``(F, P, K+1)`` (per channel)."""
    h = np.asarray(h, dtype=float)
    if h.ndim == 2:
        h = h[None]
    return ModelParams("GVAR", h.shape[1], h, graph.n_nodes, n_features, K=h.shape[2] - 1, node_graph=graph)


def pgvar_model(op, h):
    h = np.asarray(h, dtype=float)
    return ModelParams(
        "PGVAR", h.shape[0], h, op.n_nodes, op.n_features, K=h.shape[1] - 1,
        node_graph=op.node_graph, feature_graph=op.feature_graph, product=op,
    )


def gpgvar_model(node_graph, feature_graph, h):
    h = np.asarray(h, dtype=float)
    return ModelParams(
        "GPGVAR", h.shape[0], h, node_graph.n_nodes, feature_graph.n_nodes,
        K=h.shape[1] - 1, L=h.shape[2] - 1, node_graph=node_graph, feature_graph=feature_graph,
    )


def with_coeffs(m, coeffs):
    """Same structure as ``m`` with new coefficients (orders inferred from shape)."""
    c = np.asarray(coeffs, dtype=float)
    if m.family == "VAR":
        return var_model(c)
    if m.family == "GVAR":
        return gvar_model(m.node_graph, c, m.n_features)
    if m.family == "PGVAR":
        return pgvar_model(m.product, c)
    return gpgvar_model(m.node_graph, m.feature_graph, c)


def zero_model(family, P, K=0, L=0, *, n_nodes, n_features=1, node_graph=None,
               feature_graph=None, product=None, separate_channels=False):
    """All-zero coefficients for the given structure."""
    if family == "VAR":
        n = n_nodes * n_features
        m = var_model(np.zeros((P, n, n)))
        return ModelParams("VAR", P, m.coeffs, n_nodes, n_features)
    if family == "GVAR":
        c = n_features if separate_channels else 1
        return gvar_model(node_graph, np.zeros((c, P, K + 1)), n_features)
    if family == "PGVAR":
        return pgvar_model(product, np.zeros((P, K + 1)))
    if family == "GPGVAR":
        return gpgvar_model(node_graph, feature_graph, np.zeros((P, K + 1, L + 1)))
    raise InvalidParameterError(f"unknown family {family!r}")


# --- regressors ----------------------------------------------------------------


def regressor_stack(m, x):
    """Per-lag basis signals of ``x`` (``(NF,)`` or ``(B, NF)``).

    Returns ``(Q_lag, ...)``: ``S^k x`` for GVAR, ``S_prod^k x`` for PGVAR,
    ``(S^k kron S_F^l) x`` flattened ``k``-major for GPGVAR. Not defined for VAR.
    """
    if m.family == "GVAR":
        return filtering.poly_stack(m.node_graph, x, m.K, m.n_features)
    if m.family == "PGVAR":
        return filtering.product_shift_stack(m.product, x, m.K)
    if m.family == "GPGVAR":
        st = filtering.product_stack(m.node_graph, m.feature_graph, x, m.K, m.L)
        return st.reshape((-1,) + st.shape[2:])
    raise UnsupportedError("VAR has no graph regressors")


def _entry_weights(m, p):
    """Per-lag coefficient broadcastable against a regressor stack ``(Q, ..., NF)``."""
    if m.family == "GVAR":
        h = m.coeffs[:, p, :]  # (C, K+1)
        if h.shape[0] == 1:
            return h[0]
        return np.tile(h.T, (1, m.n_nodes))  # (K+1, NF)
    if m.family == "PGVAR":
        return m.coeffs[p]
    return m.coeffs[p].ravel()


def _combine(w, stack):
    if w.ndim == 1:
        return np.tensordot(w, stack, axes=(0, 0))
    extra = stack.ndim - 2
    return np.sum(w.reshape((w.shape[0],) + (1,) * extra + (w.shape[1],)) * stack, axis=0)


def _check_history(m, history):
    hist = np.asarray(history, dtype=float)
    if hist.ndim != 2 or hist.shape[0] < m.P:
        raise InsufficientDataError(f"need at least P={m.P} past signals")
    if hist.shape[1] != m.dim:
        raise DimensionMismatchError(f"signals must have length {m.dim}, got {hist.shape[1]}")
    return hist


def predict_one_step(m, history):
    """One-step forecast ``x_t = -sum_p H_p x_{t-p}``.

    ``history[0]`` is ``x_{t-1}``, ``history[1]`` is ``x_{t-2}``, and so on.
    """
    hist = _check_history(m, history)
    y = np.zeros(m.dim)
    for p in range(m.P):
        x = hist[p]
        if m.family == "VAR":
            y += m.coeffs[p] @ x
        elif m.family == "PGVAR":
            y += filtering.apply_product_shift_filter(m.product, m.coeffs[p], x)
        elif m.family == "GPGVAR":
            y += filtering.apply_product_filter(m.node_graph, m.feature_graph, m.coeffs[p], x)
        else:
            y += _combine(_entry_weights(m, p), filtering.poly_stack(m.node_graph, x, m.K, m.n_features))
    return -y


def predict_teacher_forced(m, data, targets, stack=None):
    """One-step forecasts of ``data[t]`` for each ``t`` in ``targets`` from true lags.

    ``stack`` may carry a precomputed ``regressor_stack(m, data)``.
    """
    data = np.asarray(data, dtype=float)
    targets = np.asarray(targets, dtype=np.int64)
    if targets.size == 0:
        return np.zeros((0, m.dim))
    if targets.min() < m.P or targets.max() >= data.shape[0]:
        raise InsufficientDataError(f"targets must lie in [P={m.P}, T={data.shape[0]})")
    y = np.zeros((targets.size, m.dim))
    if m.family == "VAR":
        for p in range(m.P):
            y += data[targets - p - 1] @ m.coeffs[p].T
        return -y
    lo = targets.min() - m.P
    if stack is None:
        stack = regressor_stack(m, data[lo:targets.max()])
        offset = lo
    else:
        offset = 0
    for p in range(m.P):
        y += _combine(_entry_weights(m, p), stack[:, targets - p - 1 - offset])
    return -y


def rollout(m, seq, t_start, t_end, mode="teacher_forced"):
    """Predictions for steps ``t_start <= t < t_end`` as a ``(t_end - t_start, NF)`` array."""
    data = seq.data if isinstance(seq, SignalSequence) else np.asarray(seq, dtype=float)
    if t_start < m.P or t_end > data.shape[0] or t_end < t_start:
        raise InsufficientDataError(
            f"rollout range [{t_start}, {t_end}) invalid for P={m.P}, T={data.shape[0]}"
        )
    if mode == "teacher_forced":
        return predict_teacher_forced(m, data, np.arange(t_start, t_end))
    if mode != "recursive":
        raise InvalidParameterError(f"unknown rollout mode {mode!r}")
    buf = [row for row in data[:t_start]]
    out = np.zeros((t_end - t_start, m.dim))
    for i, t in enumerate(range(t_start, t_end)):
        out[i] = predict_one_step(m, np.array(buf[t - m.P:t][::-1]))
        buf.append(out[i])
    return out


# --- nesting -------------------------------------------------------------------


def reduce_model(m):
    """Rewrite a reducible product model as the equivalent (shared) GVAR.

    PGVAR reduces when every term touching ``S_F`` vanishes (edgeless feature
    graph) and what remains is exactly ``S kron I_F``. GPGVAR reduces when
    ``L == 0`` or the feature graph is edgeless; the ``l = 0`` slice is kept.
    """
    if m.family == "PGVAR":
        op = m.product
        no_features = op.feature_graph.n_edges == 0 or not np.any(op.feature_graph.weights)
        if not no_features:
            raise UnsupportedError("PGVAR with a non-empty feature graph is not reducible")
        survivors = {}
        for i, j, s in op.terms:
            if j == 0 and s != 0:
                survivors[i] = survivors.get(i, 0.0) + s
        if survivors != {1: 1.0}:
            raise UnsupportedError(f"product terms {op.terms} do not collapse to S kron I_F")
        return gvar_model(m.node_graph, m.coeffs, m.n_features)
    if m.family == "GPGVAR":
        no_features = m.feature_graph.n_edges == 0 or not np.any(m.feature_graph.weights)
        if m.L != 0 and not no_features:
            raise UnsupportedError("GPGVAR with L > 0 and a non-empty feature graph is not reducible")
        return gvar_model(m.node_graph, m.coeffs[:, :, 0], m.n_features)
    raise UnsupportedError(f"{m.family} is not a product-graph model")


def gvar_as_pgvar(m):
    """Shared-coefficient GVAR as a PGVAR over a Cartesian product with an edgeless feature graph."""
    if m.family != "GVAR" or m.coeffs.shape[0] != 1:
        raise UnsupportedError("only shared-coefficient GVAR models embed into PGVAR")
    op = make_product(m.node_graph, edgeless_graph(m.n_features), "cartesian")
    return pgvar_model(op, m.coeffs[0])


def gvar_as_gpgvar(m, feature_graph=None):
    """Shared-coefficient GVAR as a GPGVAR with ``L = 0``."""
    if m.family != "GVAR" or m.coeffs.shape[0] != 1:
        raise UnsupportedError("only shared-coefficient GVAR models embed into GPGVAR")
    fg = feature_graph if feature_graph is not None else edgeless_graph(m.n_features)
    return gpgvar_model(m.node_graph, fg, m.coeffs[0][:, :, None])


def as_dense_var(m):
    """Materialize the lag matrices ``A_p = H_p`` as a dense VAR (small scale only)."""
    if m.family == "VAR":
        return m
    n, f = m.n_nodes, m.n_features
    S = m.node_graph.to_dense()
    A = np.zeros((m.P, n * f, n * f))
    if m.family == "GVAR":
        for p in range(m.P):
            for k in range(m.K + 1):
                hk = m.coeffs[:, p, k]
                mix = np.diag(np.broadcast_to(hk, (f,)))
                A[p] += np.kron(np.linalg.matrix_power(S, k), mix)
    elif m.family == "PGVAR":
        Sp = m.product.to_dense()
        for p in range(m.P):
            for k in range(m.K + 1):
                A[p] += m.coeffs[p, k] * np.linalg.matrix_power(Sp, k)
    else:
        SF = m.feature_graph.to_dense()
        for p in range(m.P):
            for k in range(m.K + 1):
                for l in range(m.L + 1):
                    A[p] += m.coeffs[p, k, l] * np.kron(
                        np.linalg.matrix_power(S, k), np.linalg.matrix_power(SF, l)
                    )
    return ModelParams("VAR", m.P, A, n, f)


# --- serialization -----------------------------------------------------------


def model_to_dict(m, graph_paths=None, transform=None):
    """JSON-ready dict; ``graph_paths`` maps ``"node"``/``"feature"`` to edge-list paths."""
    graph_paths = graph_paths or {}
    d = {
        "family": m.family,
        "P": m.P,
        "K": m.K,
        "L": m.L,
        "n_nodes": m.n_nodes,
        "n_features": m.n_features,
        "coeffs": m.coeffs.tolist(),
    }
    if m.product is not None:
        d["product"] = {"kind": m.product.kind, "terms": [list(t) for t in m.product.terms]}
    graphs = {}
    if m.node_graph is not None:
        graphs["node"] = {"path": str(graph_paths.get("node", "")), "n_nodes": m.n_nodes}
    if m.feature_graph is not None:
        graphs["feature"] = {"path": str(graph_paths.get("feature", "")), "n_nodes": m.n_features}
    d["graphs"] = graphs
    d["preprocessing"] = transform.to_dict() if transform is not None else None
    return d


def model_from_dict(d, base_dir=".", graphs=None):
    """Rebuild a model; graphs come from ``graphs`` or the referenced edge lists."""
    graphs = dict(graphs or {})
    for key, ref in d.get("graphs", {}).items():
        if key not in graphs:
            path = Path(ref["path"])
            if not path.is_absolute():
                path = Path(base_dir) / path
            graphs[key] = read_edge_list(path, ref["n_nodes"])
    fam, c = d["family"], np.asarray(d["coeffs"], dtype=float)
    if fam == "VAR":
        return ModelParams("VAR", d["P"], c, d["n_nodes"], d["n_features"])
    if fam == "GVAR":
        return gvar_model(graphs["node"], c, d["n_features"])
    if fam == "PGVAR":
        pr = d["product"]
        if pr["kind"] == "custom":
            op = make_product(graphs["node"], graphs["feature"], "custom", [tuple(t) for t in pr["terms"]])
        else:
            op = make_product(graphs["node"], graphs["feature"], pr["kind"])
        return pgvar_model(op, c)
    return gpgvar_model(graphs["node"], graphs["feature"], c)


def save_model(m, path, transform=None):
    """Write model JSON plus sibling ``<stem>.node.csv`` / ``<stem>.feature.csv`` edge lists."""
    path = Path(path)
    refs = {}
    for key, g in (("node", m.node_graph), ("feature", m.feature_graph)):
        if g is not None:
            gp = path.with_name(f"{path.stem}.{key}.csv")
            write_edge_list(g, gp)
            refs[key] = gp.name
    doc = model_to_dict(m, refs, transform)
    path.write_text(json.dumps(doc, indent=1) + "\n")
    return path


def load_model(path):
    """Returns ``(model, transform_dict_or_None)``."""
    path = Path(path)
    d = json.loads(path.read_text())
    return model_from_dict(d, base_dir=path.parent), d.get("preprocessing")
