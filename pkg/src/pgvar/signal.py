"""Multi-dimensional graph-signal sequences, preprocessing, splits and CSV I/O."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateScaleError,
    InsufficientDataError,
    InvalidInputError,
    InvalidParameterError,
    InvalidShapeError,
    SequenceFormatError,
)


@dataclass(frozen=True, eq=False)
class SignalSequence:
    """``T`` node-major signals of ``N`` nodes with ``F`` features each.

    ``data[t, i*F + f]`` is feature ``f`` of node ``i`` at step ``t``.
    """

    data: np.ndarray
    n_nodes: int
    n_features: int = 1

    def __post_init__(self):
        data = np.array(self.data, dtype=float, copy=True)
        if data.ndim != 2:
            raise InvalidShapeError("sequence data must be T x (N*F)")
        if data.shape[1] != self.n_nodes * self.n_features:
            raise InvalidShapeError(
                f"row length {data.shape[1]} != N*F = {self.n_nodes * self.n_features}"
            )
        if not np.all(np.isfinite(data)):
            raise InvalidInputError("sequence entries must be finite")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n_steps(self):
        return self.data.shape[0]

    @property
    def dim(self):
        return self.n_nodes * self.n_features

    def __len__(self):
        return self.n_steps

    def node_signal(self, t, i):
        """Features of node ``i`` at step ``t`` (length ``F``)."""
        f = self.n_features
        return self.data[t, i * f:(i + 1) * f]

    def feature_signal(self, t, f):
        """Feature ``f`` across all nodes at step ``t`` (length ``N``)."""
        return self.data[t, f::self.n_features]

    def channel(self, f):
        """``T x N`` array holding feature ``f`` of every node over time."""
        return self.data[:, f::self.n_features]

    def with_data(self, data):
        return SignalSequence(data, self.n_nodes, self.n_features)


@dataclass(frozen=True)
class PreprocessTransform:
    mean: np.ndarray
    scale: float

    def apply(self, data):
        return (np.asarray(data, dtype=float) - self.mean) / self.scale

    def invert(self, data):
        return np.asarray(data, dtype=float) * self.scale + self.mean

    def to_dict(self):
        return {"mean": [float(v) for v in self.mean], "scale": float(self.scale)}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["mean"], dtype=float), float(d["scale"]))


def preprocess(seq):
    """Remove each entry's temporal mean, then divide by the global max ``|x|``."""
    if seq.n_steps < 2:
        raise InsufficientDataError("preprocessing needs at least 2 steps")
    mean = seq.data.mean(axis=0)
    centred = seq.data - mean
    scale = float(np.max(np.abs(centred)))
    # a constant series leaves only rounding noise of the mean behind
    noise = seq.n_steps * np.finfo(float).eps * float(np.max(np.abs(seq.data)))
    if scale <= noise:
        raise DegenerateScaleError("sequence is constant; cannot scale to unit maximum")
    transform = PreprocessTransform(mean, scale)
    return seq.with_data(centred / scale), transform


def reshape_to_matrix(x, n_nodes, n_features):
    """``F x N`` matrix whose column ``i`` is the node signal of node ``i``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size != n_nodes * n_features:
        raise InvalidShapeError(f"expected vector of length {n_nodes * n_features}, got {x.shape}")
    return x.reshape(n_nodes, n_features).T


def flatten_matrix(y):
    """Inverse of :func:`reshape_to_matrix` (column-major ``vec``)."""
    return np.asarray(y, dtype=float).ravel(order="F")


def split_series(n_steps, in_fraction, train_fraction, max_lag=0):
    """Contiguous train / validation / test index ranges.

    The first ``floor(in_fraction * T)`` steps are in-sample; of those the
    first ``floor(train_fraction * n_in)`` are training. Each segment must hold
    at least ``max_lag + 1`` steps.
    """
    if not 0 < in_fraction < 1 or not 0 < train_fraction < 1:
        raise InvalidParameterError("fractions must lie strictly between 0 and 1")
    n_in = math.floor(in_fraction * n_steps)
    n_train = math.floor(train_fraction * n_in)
    segments = {
        "train": np.arange(0, n_train),
        "validation": np.arange(n_train, n_in),
        "test": np.arange(n_in, n_steps),
    }
    for name, idx in segments.items():
        if idx.size < max_lag + 1:
            raise InsufficientDataError(
                f"{name} segment has {idx.size} steps; need at least {max_lag + 1}",
                segment=name,
            )
    return segments["train"], segments["validation"], segments["test"]


def save_sequence(seq, path, times=None):
    """Write ``t,v0,...`` CSV with round-trip-exact floats (``t`` defaults to 0..T-1)."""
    if times is None:
        times = range(seq.n_steps)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"v{j}" for j in range(seq.dim)])
        for t, row in zip(times, seq.data.tolist()):
            w.writerow([int(t)] + [repr(v) for v in row])


def load_sequence(path, n_nodes=None, n_features=1, return_times=False):
    """Read a sequence CSV. ``n_nodes`` defaults to ``n_columns / n_features``.

    With ``return_times`` the parsed ``t`` column is returned as well.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "t":
            raise SequenceFormatError(f"{path}: expected header t,v0,...")
        width = len(header) - 1
        rows, times, last_t = [], [], None
        for r, line in enumerate(reader, start=1):
            if not line:
                continue
            if len(line) != width + 1:
                raise SequenceFormatError(
                    f"{path}: expected {width + 1} fields, got {len(line)}", row=r
                )
            try:
                t = float(line[0])
                vals = [float(v) for v in line[1:]]
            except ValueError as exc:
                raise SequenceFormatError(f"{path}: {exc}", row=r) from None
            if not all(math.isfinite(v) for v in vals):
                raise SequenceFormatError(f"{path}: non-finite value", row=r)
            if last_t is not None and not t > last_t:
                raise SequenceFormatError(f"{path}: time column not increasing", row=r)
            last_t = t
            times.append(t)
            rows.append(vals)
    if not rows:
        raise SequenceFormatError(f"{path}: no data rows")
    if n_nodes is None:
        if width % n_features:
            raise SequenceFormatError(f"{path}: {width} columns not divisible by F={n_features}")
        n_nodes = width // n_features
    seq = SignalSequence(np.array(rows), n_nodes, n_features)
    if return_times:
        return seq, np.array(times)
    return seq
