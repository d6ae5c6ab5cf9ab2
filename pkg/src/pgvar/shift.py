"""Low-level sparse shifts along the node or feature axis of node-major signals.

A batch of ``B`` node-major signals of length ``N*F`` is viewed as a
``(B, N, F)`` array; row ``i`` of each slice is the node signal of node ``i``.
In that view

    (S  kron I_F) x  ==  S @ X          (shift across nodes)
    (I_N kron S_F) x ==  X @ S_F.T      (shift across features)

so neither Kronecker factor is ever formed. Every multiply-add performed by
the kernel is tallied in the active :func:`count_multiply_adds` counter.
"""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass

import numpy as np

from . import _backend
from .errors import DimensionMismatchError


@dataclass
class OpCounter:
    value: int = 0


_COUNTER: contextvars.ContextVar[OpCounter | None] = contextvars.ContextVar(
    "pgvar_op_counter", default=None
)


@contextlib.contextmanager
def count_multiply_adds():
    """Count shift-stage multiply-adds performed inside the block.

    >>> with count_multiply_adds() as c:
    ...     apply_shift(g, x)
    >>> c.value == g.n_edges
    """
    counter = OpCounter()
    token = _COUNTER.set(counter)
    try:
        yield counter
    finally:
        _COUNTER.reset(token)


def _run(graph, x3, kernel=None):
    out = np.empty((x3.shape[0], graph.n_nodes, x3.shape[2]))
    kernel = kernel or _backend.shift_axis1
    kernel(graph.indptr, graph.cols, graph.weights, x3, out)
    counter = _COUNTER.get()
    if counter is not None:
        counter.value += x3.shape[0] * graph.n_edges * x3.shape[2]
    return out


def _as_batch(x, length):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != length:
        raise DimensionMismatchError(
            f"expected signal(s) of length {length}, got shape {x.shape}"
        )
    return np.ascontiguousarray(xb), single


def shift_nodes(graph, x, n_features=1):
    """Apply ``S kron I_F`` to one signal ``(N*F,)`` or a batch ``(B, N*F)``."""
    n = graph.n_nodes
    xb, single = _as_batch(x, n * n_features)
    out = _run(graph, xb.reshape(xb.shape[0], n, n_features))
    out = out.reshape(xb.shape[0], n * n_features)
    return out[0] if single else out


def shift_features(graph, x, n_nodes=1):
    """Apply ``I_N kron S_F`` to one signal ``(N*F,)`` or a batch ``(B, N*F)``."""
    f = graph.n_nodes
    xb, single = _as_batch(x, n_nodes * f)
    out = _run(graph, xb.reshape(xb.shape[0] * n_nodes, f, 1))
    out = out.reshape(xb.shape[0], n_nodes * f)
    return out[0] if single else out
