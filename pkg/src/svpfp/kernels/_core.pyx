# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled particle deposition/gather kernels.

Loop structure mirrors ``_pure``: corners outer, particles inner, axis
factors multiplied in ascending order, so both backends produce identical
floating-point results on identical inputs.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "cython"


def deposit_cic(positions, weights, int n_cells, double length):
    positions = np.ascontiguousarray(positions, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    cdef cnp.float64_t[:, ::1] pos = positions
    cdef cnp.float64_t[::1] wts = weights
    cdef Py_ssize_t n = pos.shape[0]
    cdef int d = <int> pos.shape[1]
    cdef double h = length / n_cells
    cdef cnp.int64_t[:, ::1] i0 = np.empty((n, d), dtype=np.int64)
    cdef cnp.float64_t[:, ::1] frac = np.empty((n, d), dtype=np.float64)
    cdef Py_ssize_t p
    cdef int j
    cdef double s
    cdef long cell
    for p in range(n):
        for j in range(d):
            s = pos[p, j] % length
            if s < 0:
                s += length
            s /= h
            cell = <long> s
            if cell > s:  # floor for the rare negative rounding case
                cell -= 1
            frac[p, j] = s - cell
            cell %= n_cells
            if cell < 0:
                cell += n_cells
            i0[p, j] = cell

    shape = (n_cells,) * d
    grid_arr = np.zeros(shape)
    cdef cnp.float64_t[::1] flat = grid_arr.reshape(-1)
    cdef int corner
    cdef double w
    cdef long idx, stride, c
    for corner in range(1 << d):
        for p in range(n):
            w = wts[p]
            idx = 0
            stride = 1
            # row-major: last axis has stride 1
            for j in range(d):
                if (corner >> j) & 1:
                    w *= frac[p, j]
                    c = i0[p, j] + 1
                    if c == n_cells:
                        c = 0
                else:
                    w *= 1.0 - frac[p, j]
                    c = i0[p, j]
                idx = idx * n_cells + c
            flat[idx] += w
    return grid_arr


def gather_linear(field, positions, double length):
    field = np.ascontiguousarray(field, dtype=np.float64)
    positions = np.ascontiguousarray(positions, dtype=np.float64)
    cdef cnp.float64_t[:, ::1] pos = positions
    cdef Py_ssize_t n = pos.shape[0]
    cdef int d = <int> pos.shape[1]
    cdef int vector = 1 if field.ndim == d + 1 else 0
    cdef int n_cells = field.shape[0]
    cdef int ncomp = field.shape[field.ndim - 1] if vector else 1
    cdef double h = length / n_cells
    cdef cnp.float64_t[:, ::1] fld = field.reshape(-1, ncomp) if vector else field.reshape(-1, 1)
    cdef cnp.int64_t[:, ::1] i0 = np.empty((n, d), dtype=np.int64)
    cdef cnp.float64_t[:, ::1] frac = np.empty((n, d), dtype=np.float64)
    cdef Py_ssize_t p
    cdef int j, comp
    cdef double s
    cdef long cell
    for p in range(n):
        for j in range(d):
            s = pos[p, j] % length
            if s < 0:
                s += length
            s /= h
            cell = <long> s
            if cell > s:
                cell -= 1
            frac[p, j] = s - cell
            cell %= n_cells
            if cell < 0:
                cell += n_cells
            i0[p, j] = cell

    out_arr = np.zeros((n, ncomp))
    cdef cnp.float64_t[:, ::1] out = out_arr
    cdef int corner
    cdef double w
    cdef long idx, c
    for corner in range(1 << d):
        for p in range(n):
            w = 1.0
            idx = 0
            for j in range(d):
                if (corner >> j) & 1:
                    w *= frac[p, j]
                    c = i0[p, j] + 1
                    if c == n_cells:
                        c = 0
                else:
                    w *= 1.0 - frac[p, j]
                    c = i0[p, j]
                idx = idx * n_cells + c
            for comp in range(ncomp):
                out[p, comp] += w * fld[idx, comp]
    if vector:
        return out_arr
    return out_arr.reshape(-1)
