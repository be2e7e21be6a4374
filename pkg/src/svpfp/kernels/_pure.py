"""Pure-numpy implementations of the particle deposition/gather kernels.

These are the reference implementations; the compiled extension in
``_core.pyx`` reproduces them bit-for-bit on the same inputs (both reduce
in the same index order for the scatter, and numpy's fused multiply order
is matched by accumulating per-corner contributions).
"""
from __future__ import annotations

import numpy as np

BACKEND_NAME = "pure"


def deposit_cic(positions: np.ndarray, weights: np.ndarray, n_cells: int, length: float) -> np.ndarray:
    """Cloud-in-cell scatter of weighted particles onto a periodic grid.

    positions: (n, d) in [0, length); weights: (n,).  Returns the raw
    weighted occupancy, shape (n_cells,)*d; divide by the cell volume to
    get a density.
    """
    positions = np.asarray(positions, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    n, d = positions.shape
    h = length / n_cells
    s = np.mod(positions, length) / h  # fractional cell coordinates
    i0 = np.floor(s).astype(np.int64)
    frac = s - i0
    i0 = np.mod(i0, n_cells)
    i1 = np.mod(i0 + 1, n_cells)
    grid = np.zeros((n_cells,) * d)
    # iterate over the 2^d corners of the surrounding cell
    for corner in range(1 << d):
        idx = []
        w = weights.copy()
        for j in range(d):
            if corner >> j & 1:
                idx.append(i1[:, j])
                w = w * frac[:, j]
            else:
                idx.append(i0[:, j])
                w = w * (1.0 - frac[:, j])
        np.add.at(grid, tuple(idx), w)
    return grid


def gather_linear(field: np.ndarray, positions: np.ndarray, length: float) -> np.ndarray:
    """Multilinear periodic interpolation of a gridded field at particle positions.

    field: (n_cells,)*d scalar or (n_cells,)*d + (c,) vector values on node
    points j*length/n_cells; positions: (n, d).  Returns (n,) or (n, c).
    """
    field = np.asarray(field, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.float64)
    n, d = positions.shape
    vector = field.ndim == d + 1
    n_cells = field.shape[0]
    h = length / n_cells
    s = np.mod(positions, length) / h
    i0 = np.floor(s).astype(np.int64)
    frac = s - i0
    i0 = np.mod(i0, n_cells)
    i1 = np.mod(i0 + 1, n_cells)
    out_shape = (n, field.shape[-1]) if vector else (n,)
    out = np.zeros(out_shape)
    for corner in range(1 << d):
        idx = []
        w = np.ones(n)
        for j in range(d):
            if corner >> j & 1:
                idx.append(i1[:, j])
                w = w * frac[:, j]
            else:
                idx.append(i0[:, j])
                w = w * (1.0 - frac[:, j])
        vals = field[tuple(idx)]
        if vector:
            out += w[:, None] * vals
        else:
            out += w * vals
    return out
