# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled split-scoring kernel for the multi-way tree learner.

Cells and labels are uint8 codes: F=0, U=1, T=2.  Matches the pure-Python
implementation in ``_split_scores_py`` bit-for-bit in semantics.
"""

import numpy as np

from libc.math cimport log2


cdef double _entropy(const double *counts, double total) noexcept nogil:
    cdef double h = 0.0
    cdef double p
    cdef int i
    if total <= 0.0:
        return 0.0
    for i in range(3):
        if counts[i] > 0.0:
            p = counts[i] / total
            h -= p * log2(p)
    return h


def split_gains(const unsigned char[:, ::1] cells,
                const unsigned char[::1] labels,
                const long long[::1] rows,
                const long long[::1] cands):
    """Information gain of splitting ``rows`` on each candidate column."""
    cdef Py_ssize_t n = rows.shape[0]
    cdef Py_ssize_t m = cands.shape[0]
    out = np.zeros(m, dtype=np.float64)
    cdef double[::1] gains = out
    cdef double parent_counts[3]
    cdef double child_counts[3][3]
    cdef double value_totals[3]
    cdef double h_parent, remainder
    cdef Py_ssize_t i, j
    cdef int k
    cdef long long r, c

    if n == 0 or m == 0:
        return out

    for k in range(3):
        parent_counts[k] = 0.0
    for i in range(n):
        parent_counts[labels[rows[i]]] += 1.0
    h_parent = _entropy(parent_counts, <double> n)

    with nogil:
        for j in range(m):
            c = cands[j]
            for k in range(3):
                value_totals[k] = 0.0
                child_counts[k][0] = 0.0
                child_counts[k][1] = 0.0
                child_counts[k][2] = 0.0
            for i in range(n):
                r = rows[i]
                value_totals[cells[r, c]] += 1.0
                child_counts[cells[r, c]][labels[r]] += 1.0
            remainder = 0.0
            for k in range(3):
                if value_totals[k] > 0.0:
                    remainder += (value_totals[k] / <double> n) * \
                        _entropy(child_counts[k], value_totals[k])
            gains[j] = h_parent - remainder
    return out
