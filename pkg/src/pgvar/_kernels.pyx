# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sparse shift kernel.

``shift_axis1(indptr, indices, data, x, out)`` computes, for a CSR matrix S
with ``n_out`` rows,

    out[a, i, c] = sum_{e in row i} data[e] * x[a, indices[e], c]

i.e. S applied along the middle axis of a 3-D array. One multiply-add per
stored entry per (a, c) pair.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def shift_axis1(const cnp.int64_t[::1] indptr,
                const cnp.int64_t[::1] indices,
                const double[::1] data,
                const double[:, :, ::1] x,
                double[:, :, ::1] out):
    cdef Py_ssize_t n_a = x.shape[0]
    cdef Py_ssize_t n_c = x.shape[2]
    cdef Py_ssize_t n_out = indptr.shape[0] - 1
    cdef Py_ssize_t a, i, c, e, j
    cdef double w
    with nogil:
        for a in range(n_a):
            for i in range(n_out):
                for c in range(n_c):
                    out[a, i, c] = 0.0
                for e in range(indptr[i], indptr[i + 1]):
                    j = indices[e]
                    w = data[e]
                    for c in range(n_c):
                        out[a, i, c] += w * x[a, j, c]
