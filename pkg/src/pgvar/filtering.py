"""Polynomial and product-graph filters evaluated by repeated sparse shifts.

Signals are node-major vectors of length ``N*F`` (or batches ``(B, N*F)``).
With ``X`` the ``N x F`` reshape of such a vector (row ``i`` = node ``i``),

    (S^k kron S_F^l) x = vec_rows(S^k X (S_F^l)^T)

which is evaluated as ``l`` feature shifts followed by ``k`` node shifts.
Nothing of size ``NF x NF`` is ever formed and ``S^k`` is never computed.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, InvalidParameterError
from .shift import count_multiply_adds, shift_features, shift_nodes

__all__ = [
    "apply_shift",
    "apply_poly_filter",
    "apply_product_filter",
    "apply_product_shift_filter",
    "poly_stack",
    "product_stack",
    "product_shift_stack",
    "count_multiply_adds",
]


def _coeffs(h, ndim):
    h = np.asarray(h, dtype=float)
    if h.ndim != ndim or h.size == 0:
        raise InvalidParameterError(f"filter coefficients must be a non-empty {ndim}-d array")
    if not np.all(np.isfinite(h)):
        raise InvalidParameterError("filter coefficients must be finite")
    return h


def _check_len(x, n):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n or x.ndim not in (1, 2):
        raise DimensionMismatchError(f"expected signal length {n}, got shape {x.shape}")
    return x


def apply_shift(g, x):
    """``S x``."""
    return shift_nodes(g, _check_len(x, g.n_nodes), 1)


def poly_stack(g, x, order, n_features=1):
    """``[x, Sx, ..., S^order x]`` with ``S`` acting across nodes (``S kron I_F``)."""
    x = _check_len(x, g.n_nodes * n_features)
    out = np.empty((order + 1,) + x.shape)
    out[0] = x
    for k in range(1, order + 1):
        out[k] = shift_nodes(g, out[k - 1], n_features)
    return out


def apply_poly_filter(g, h, x, n_features=1):
    """``sum_k h[k] S^k x`` by iterated shifts; ``K |E|`` multiply-adds per signal."""
    h = _coeffs(h, 1)
    x = _check_len(x, g.n_nodes * n_features)
    y = h[0] * x
    z = x
    for k in range(1, h.size):
        z = shift_nodes(g, z, n_features)
        y = y + h[k] * z
    return y


def product_stack(node_g, feat_g, x, order_nodes, order_features):
    """``out[k, l] = (S^k kron S_F^l) x`` for ``k <= K``, ``l <= L``.

    Feature-shift stack first (``L`` shifts of ``N|E_F|``), then each entry is
    shifted across nodes ``K`` times (``F|E|`` each).
    """
    n, f = node_g.n_nodes, feat_g.n_nodes
    x = _check_len(x, n * f)
    out = np.empty((order_nodes + 1, order_features + 1) + x.shape)
    out[0, 0] = x
    for l in range(1, order_features + 1):
        out[0, l] = shift_features(feat_g, out[0, l - 1], n)
    for l in range(order_features + 1):
        for k in range(1, order_nodes + 1):
            out[k, l] = shift_nodes(node_g, out[k - 1, l], f)
    return out


def apply_product_filter(node_g, feat_g, h, x):
    """``sum_{k,l} h[k, l] (S^k kron S_F^l) x``."""
    h = _coeffs(h, 2)
    stack = product_stack(node_g, feat_g, x, h.shape[0] - 1, h.shape[1] - 1)
    return np.tensordot(h, stack, axes=([0, 1], [0, 1]))


def product_shift_stack(op, x, order):
    """``[x, S_p x, ..., S_p^order x]`` for a lazy product operator ``S_p``."""
    x = _check_len(x, op.dim)
    out = np.empty((order + 1,) + x.shape)
    out[0] = x
    for k in range(1, order + 1):
        out[k] = op.apply(out[k - 1])
    return out


def apply_product_shift_filter(op, h, x):
    """``sum_k h[k] S_p^k x`` where ``S_p`` is the lazy product shift."""
    h = _coeffs(h, 1)
    x = _check_len(x, op.dim)
    y = h[0] * x
    z = x
    for k in range(1, h.size):
        z = op.apply(z)
        y = y + h[k] * z
    return y
