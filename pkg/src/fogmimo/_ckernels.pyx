# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Signatures mirror :mod:`fogmimo._pykernels`."""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow, sqrt, floor

cnp.import_array()


def uncovered_counts(double[:, ::1] darts, double[:, ::1] centers,
                     cnp.int64_t[::1] offsets, double r_out):
    cdef Py_ssize_t n_trials = offsets.shape[0] - 1
    cdef Py_ssize_t n_darts = darts.shape[0]
    cdef Py_ssize_t t, d, c, lo, hi
    cdef double r2 = r_out * r_out
    cdef double dx, dy, px, py
    cdef cnp.int64_t count
    cdef bint covered
    out = np.zeros(n_trials, dtype=np.int64)
    cdef cnp.int64_t[::1] res = out
    for t in range(n_trials):
        lo = offsets[t]
        hi = offsets[t + 1]
        if hi == lo:
            res[t] = n_darts
            continue
        count = 0
        for d in range(n_darts):
            px = darts[d, 0]
            py = darts[d, 1]
            covered = False
            for c in range(lo, hi):
                dx = px - centers[c, 0]
                dy = py - centers[c, 1]
                if dx * dx + dy * dy <= r2:
                    covered = True
                    break
            if not covered:
                count += 1
        res[t] = count
    return out


def distance_matrix(double[:, ::1] a, double[:, ::1] b, double side):
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0], i, j
    cdef double dx, dy
    out = np.empty((na, nb), dtype=np.float64)
    cdef double[:, ::1] res = out
    for i in range(na):
        for j in range(nb):
            dx = a[i, 0] - b[j, 0]
            dy = a[i, 1] - b[j, 1]
            if side > 0:
                dx -= side * floor(dx / side + 0.5)
                dy -= side * floor(dy / side + 0.5)
            res[i, j] = sqrt(dx * dx + dy * dy)
    return out


def gain_matrix(double[:, ::1] a, double[:, ::1] b, double side,
                double eta, double min_distance):
    cdef Py_ssize_t na = a.shape[0], nb = b.shape[0], i, j
    cdef double dx, dy, r
    out = np.empty((na, nb), dtype=np.float64)
    cdef double[:, ::1] res = out
    for i in range(na):
        for j in range(nb):
            dx = a[i, 0] - b[j, 0]
            dy = a[i, 1] - b[j, 1]
            if side > 0:
                dx -= side * floor(dx / side + 0.5)
                dy -= side * floor(dy / side + 0.5)
            r = sqrt(dx * dx + dy * dy)
            if r < min_distance:
                r = min_distance
            res[i, j] = pow(r, -eta)
    return out
