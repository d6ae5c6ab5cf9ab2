"""Numpy implementation of the shift kernel, used when the extension is absent."""

import numpy as np


def shift_axis1(indptr, indices, data, x, out):
    out[...] = 0.0
    if data.size == 0:
        return
    contrib = x[:, indices, :] * data[None, :, None]
    starts = indptr[:-1]
    nonempty = starts < indptr[1:]
    out[:, nonempty, :] = np.add.reduceat(contrib, starts[nonempty], axis=1)
