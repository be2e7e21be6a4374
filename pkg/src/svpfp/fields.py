"""Spectral electrostatic field solver with neutralizing background.

E = grad (-Laplace)^{-1} (rho - 1) on the periodic box, realized as the
Fourier multiplier i k / |k|^2 with the k=0 mode removed (the background
subtraction is exactly the removal of the spatial mean).  General mean-field
kernels are supported through a user-supplied multiplier table.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .phase_space import GridSpec

__all__ = [
    "FieldSolution",
    "solve_poisson",
    "solve_kernel",
    "coulomb_multiplier",
    "dealias_mask",
    "load_kernel_csv",
    "electric_energy",
]

_KERNEL_BOUND = 1.0e6


@dataclass
class FieldSolution:
    """Electric field on the spatial grid, plus diagnostics."""

    E: np.ndarray  # shape (N,)*d + (d,)
    rho_bar: float
    kernel: str
    neutrality_warning: bool = False


def _x_wavenumbers(grid: GridSpec):
    """Broadcastable integer wavenumber arrays per spatial axis."""
    ks = []
    for j in range(grid.d):
        shape = [1] * grid.d
        shape[j] = grid.N_x
        ks.append(grid.kx.reshape(shape))
    return ks


def coulomb_multiplier(grid: GridSpec) -> np.ndarray:
    """|k|^{-2} on the spatial wavenumber grid, zero at k=0."""
    ks = _x_wavenumbers(grid)
    k2 = sum(k**2 for k in ks)
    out = np.zeros_like(k2)
    nz = k2 != 0
    out[nz] = 1.0 / k2[nz]
    return out


def dealias_mask(grid: GridSpec) -> np.ndarray:
    """Boolean mask keeping |k_j| <= fraction * N_x/2 on every axis."""
    cut = grid.dealias_fraction * grid.N_x / 2.0
    mask = np.ones((grid.N_x,) * grid.d, dtype=bool)
    for k in _x_wavenumbers(grid):
        mask &= np.abs(k) <= cut
    return mask


def solve_kernel(
    rho: np.ndarray, grid: GridSpec, multiplier: np.ndarray, kernel_name: str = "custom"
) -> FieldSolution:
    """E with hat E(k) = i k Khat(k) rho_hat(k), zero mode removed."""
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (grid.N_x,) * grid.d:
        raise ValueError(f"rho shape {rho.shape} incompatible with grid")
    if not np.all(np.isfinite(rho)):
        raise ValueError("rho contains non-finite values")
    if multiplier.shape != rho.shape:
        raise ValueError("multiplier table does not cover the wavenumber grid")
    ks = _x_wavenumbers(grid)
    kmag = np.sqrt(sum(k**2 for k in ks))
    if np.max(kmag * np.abs(multiplier)) > _KERNEL_BOUND:
        raise ValueError("ill-posed kernel: |k| * |Khat(k)| exceeds bound")
    rho_hat = np.fft.fftn(rho)
    rho_bar = float(np.real(rho_hat.flat[0]) / rho.size)
    rho_hat.flat[0] = 0.0  # neutralizing background: remove the mean
    E = np.empty(rho.shape + (grid.d,))
    for j, k in enumerate(ks):
        E[..., j] = np.real(np.fft.ifftn(1j * k * multiplier * rho_hat))
    return FieldSolution(
        E=E,
        rho_bar=rho_bar,
        kernel=kernel_name,
        neutrality_warning=abs(rho_bar - 1.0) > 0.01,
    )


def solve_poisson(rho: np.ndarray, grid: GridSpec) -> FieldSolution:
    return solve_kernel(rho, grid, coulomb_multiplier(grid), kernel_name="coulomb")


def electric_energy(sol: FieldSolution, grid: GridSpec) -> float:
    """(1/2) integral |E|^2 dx."""
    return float(0.5 * np.sum(sol.E**2) * grid.dx**grid.d)


def load_kernel_csv(path: str | Path, grid: GridSpec) -> np.ndarray:
    """Read a multiplier table (k components..., value) covering the grid."""
    table = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = len(header) - 1
        if d != grid.d:
            raise ValueError(f"kernel CSV dimension {d} != grid dimension {grid.d}")
        for row in reader:
            key = tuple(int(c) for c in row[:d])
            table[key] = float(row[d])
    mult = np.empty((grid.N_x,) * grid.d)
    kx = grid.kx.astype(int)
    for idx in np.ndindex(*mult.shape):
        key = tuple(int(kx[i]) for i in idx)
        if key not in table:
            raise ValueError(f"kernel CSV missing wavenumber {key}")
        mult[idx] = table[key]
    return mult
