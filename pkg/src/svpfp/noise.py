"""Colored-in-space, white-in-time random forcing fields.

The forcing is expanded in a real trigonometric basis: for each lattice
vector ell with 0 < |ell|_inf <= K and each polarization i, the basis
function is c_d * gamma * sin(ell.x) or cos(ell.x) depending on the sign
class of ell, with c_d = sqrt(2) (2 pi)^{-d/2}.  Per-mode amplitudes
sigma_k control spatial regularity; per-mode Brownian increments are drawn
from a counter-based generator so that any (realization, mode, step)
increment can be regenerated bit-exactly in isolation.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ModeIndex",
    "NoiseSpec",
    "BasisSet",
    "NoisePath",
    "build_basis",
    "coloring",
    "ColoringTable",
    "sample_mode_increments",
    "sample_field_increment",
    "lorentz_noise_term",
    "rotate_about_axis",
    "save_coloring_csv",
    "load_coloring_csv",
]


def _norm_c(d: int) -> float:
    return np.sqrt(2.0) * (2.0 * np.pi) ** (-d / 2.0)


@dataclass(frozen=True)
class ModeIndex:
    """One forcing mode: lattice vector ell != 0 plus a polarization label."""

    ell: tuple
    polarization: int

    def __post_init__(self):
        if all(c == 0 for c in self.ell):
            raise ValueError("ell must be nonzero")

    @property
    def abs_ell(self) -> float:
        return float(np.sqrt(sum(c * c for c in self.ell)))


@dataclass(frozen=True)
class NoiseSpec:
    """Mode set and coloring law for the random field.

    coloring_law: ("power", p) for sigma_k = |k|^-p, ("gaussian", lam) for
    sigma_k = exp(-lam |k|^2), or ("custom", {mode_id: sigma}).
    regularity_target is the Sobolev exponent used in the tail report.
    """

    dimension: int
    max_wavenumber: int
    coloring_law: tuple = ("power", 6.0)
    regularity_target: int = 4
    include_magnetic: bool = False
    sigma_B1: float = 0.0
    sigma_B2: float = 0.0
    speed_of_light: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        if self.dimension not in (1, 2, 3):
            raise ValueError(f"unsupported dimension d={self.dimension}")
        if self.max_wavenumber < 1:
            raise ValueError("max_wavenumber must be >= 1")
        if self.include_magnetic and self.dimension < 3:
            raise ValueError("magnetic forcing requires d=3")
        if self.speed_of_light <= 0:
            raise ValueError("speed_of_light must be positive")


def _positive_class(ell: tuple) -> bool:
    """Membership of ell in the 'sine' half-lattice (last component positive,
    ties broken by the first component)."""
    if ell[-1] > 0:
        return True
    if ell[-1] < 0:
        return False
    return _positive_class(ell[:-1])


def _polarization_vectors(ell: tuple, d: int) -> np.ndarray:
    """Orthonormal polarization frame for ell (rows), defined on the positive
    half-lattice and extended by gamma(-ell) = -gamma(ell)."""
    if d == 1:
        return np.array([[1.0]])
    e = np.asarray(ell, dtype=np.float64)
    if not _positive_class(ell):
        return -_polarization_vectors(tuple(-c for c in ell), d)
    eh = e / np.linalg.norm(e)
    if d == 2:
        perp = np.array([-eh[1], eh[0]])
        return np.stack([perp, eh])
    ref = np.array([0.0, 0.0, 1.0])
    if abs(np.dot(eh, ref)) > 0.9:
        ref = np.array([1.0, 0.0, 0.0])
    g1 = np.cross(eh, ref)
    g1 /= np.linalg.norm(g1)
    g2 = np.cross(eh, g1)
    return np.stack([g1, g2, eh])


@dataclass
class BasisSet:
    """Ordered forcing modes with evaluators on the spatial grid."""

    dimension: int
    modes: list
    gammas: np.ndarray  # (n_modes, d) polarization vectors
    is_sine: np.ndarray  # (n_modes,) trig parity flags

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def evaluate(self, x_points: np.ndarray) -> np.ndarray:
        """e_k at points of shape (..., d); returns (n_modes, ..., d)."""
        x_points = np.asarray(x_points, dtype=np.float64)
        if x_points.shape[-1] != self.dimension:
            raise ValueError(
                f"points have dimension {x_points.shape[-1]}, expected {self.dimension}"
            )
        c = _norm_c(self.dimension)
        ells = np.array([m.ell for m in self.modes], dtype=np.float64)
        phase = np.tensordot(x_points, ells, axes=([-1], [-1]))  # (..., n_modes)
        phase = np.moveaxis(phase, -1, 0)  # (n_modes, ...)
        trig = np.where(
            self.is_sine.reshape((-1,) + (1,) * (phase.ndim - 1)),
            np.sin(phase),
            np.cos(phase),
        )
        return c * trig[..., None] * self.gammas.reshape(
            (self.n_modes,) + (1,) * (phase.ndim - 1) + (self.dimension,)
        )

    def evaluate_on_grid(self, grid_axis: np.ndarray) -> np.ndarray:
        """e_k on the tensor grid built from one axis; (n_modes, N,...,N, d)."""
        d = self.dimension
        mesh = np.meshgrid(*([grid_axis] * d), indexing="ij")
        pts = np.stack(mesh, axis=-1)
        return self.evaluate(pts)


def build_basis(spec: NoiseSpec) -> BasisSet:
    """All modes with 0 < |ell|_inf <= K, d polarizations each."""
    d = spec.dimension
    K = spec.max_wavenumber
    modes, gammas, sines = [], [], []
    for ell in np.ndindex(*((2 * K + 1,) * d)):
        ell = tuple(int(c) - K for c in ell)
        if all(c == 0 for c in ell):
            continue
        frame = _polarization_vectors(ell, d)
        sine = _positive_class(ell)
        for i in range(d):
            modes.append(ModeIndex(ell=ell, polarization=i + 1))
            gammas.append(frame[i])
            sines.append(sine)
    return BasisSet(
        dimension=d,
        modes=modes,
        gammas=np.array(gammas),
        is_sine=np.array(sines, dtype=bool),
    )


@dataclass
class ColoringTable:
    """Per-mode amplitudes sigma_k plus the weighted tail report."""

    sigmas: np.ndarray  # (n_modes,), aligned with the basis order
    weighted_sum: float  # sum |k|^{2 sigma'} sigma_k^2 over all modes
    shell_sums: dict  # |ell| shell -> partial weighted sum


def coloring(spec: NoiseSpec, basis: BasisSet | None = None) -> ColoringTable:
    if basis is None:
        basis = build_basis(spec)
    abs_ell = np.array([m.abs_ell for m in basis.modes])
    law = spec.coloring_law
    kind = law[0]
    if kind == "power":
        sig = abs_ell ** (-float(law[1]))
    elif kind == "gaussian":
        sig = np.exp(-float(law[1]) * abs_ell**2)
    elif kind == "custom":
        table = law[1]
        sig = np.array([float(table[i]) for i in range(basis.n_modes)])
        if np.any(sig < 0):
            raise ValueError("custom coloring coefficients must be nonnegative")
    elif kind == "zero":
        sig = np.zeros_like(abs_ell)
    else:
        raise ValueError(f"unknown coloring law {kind!r}")
    sig = spec.amplitude * sig
    sp = spec.regularity_target
    weights = abs_ell ** (2 * sp) * sig**2
    shells: dict = {}
    for a, w in zip(abs_ell, weights):
        key = round(float(a), 9)
        shells[key] = shells.get(key, 0.0) + float(w)
    return ColoringTable(
        sigmas=sig,
        weighted_sum=float(np.sum(weights)),
        shell_sums=dict(sorted(shells.items())),
    )


# ----------------------------------------------------------------------
# counter-based increments
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class NoisePath:
    """Key material for one external noise realization.

    Increments are N(0, dt) per (step, mode), produced by a Philox
    counter-based generator keyed on (seed, realization) with the counter
    encoding (step, mode).  Regeneration of any single increment from the
    key is bit-exact.
    """

    seed: int
    dt: float
    n_steps: int
    realization: int = 0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")

    def _key(self) -> list:
        return [self.seed & 0xFFFFFFFFFFFFFFFF, self.realization & 0xFFFFFFFFFFFFFFFF]

    def increment(self, step: int, mode: int) -> float:
        """Single Brownian increment Delta W^{(mode)}_step ~ N(0, dt)."""
        if not 0 <= step < self.n_steps:
            raise IndexError(f"step {step} outside the path horizon")
        bg = np.random.Philox(key=self._key(), counter=[step, mode, 0, 0])
        z = np.random.Generator(bg).standard_normal()
        return float(z * np.sqrt(self.dt))

    def increments_for_step(self, step: int, n_modes: int) -> np.ndarray:
        """All mode increments for one step (each regenerated from its key)."""
        return np.array([self.increment(step, mode) for mode in range(n_modes)])


def sample_mode_increments(path: NoisePath, step: int, basis: BasisSet) -> np.ndarray:
    return path.increments_for_step(step, basis.n_modes)


def sample_field_increment(
    path: NoisePath,
    step: int,
    basis: BasisSet,
    table: ColoringTable,
    x_grid: np.ndarray,
) -> np.ndarray:
    """Sampled field increment sum_k sigma_k e_k(x) dW_k on the grid.

    x_grid is the 1D spatial axis; the return value has one d-vector per
    tensor-grid node: shape (N,)*d + (d,).
    """
    x_grid = np.asarray(x_grid, dtype=np.float64)
    if x_grid.ndim != 1:
        raise ValueError("x_grid must be the 1D spatial axis")
    dW = sample_mode_increments(path, step, basis)
    ek = basis.evaluate_on_grid(x_grid)  # (n_modes, N..., d)
    coeff = table.sigmas * dW
    return np.tensordot(coeff, ek, axes=(0, 0))


# ----------------------------------------------------------------------
# magnetic term
# ----------------------------------------------------------------------


def lorentz_noise_term(
    v: np.ndarray, dW_E: np.ndarray, dW_B: np.ndarray, c: float
) -> np.ndarray:
    """Velocity increment dW_E + (v x dW_B)/c (cross product needs d=3)."""
    v = np.asarray(v, dtype=np.float64)
    dW_E = np.asarray(dW_E, dtype=np.float64)
    dW_B = np.asarray(dW_B, dtype=np.float64)
    if np.all(dW_B == 0.0):
        return dW_E + np.zeros_like(v)
    if v.shape[-1] != 3:
        raise ValueError("magnetic noise requires d=3")
    return dW_E + np.cross(v, dW_B) / c


def rotate_about_axis(v: np.ndarray, axis_times_angle: np.ndarray) -> np.ndarray:
    """Exact rotation of v by |w| radians about w = axis_times_angle.

    Used by the norm-conserving magnetic substep: |v| is invariant.
    """
    v = np.asarray(v, dtype=np.float64)
    w = np.asarray(axis_times_angle, dtype=np.float64)
    angle = np.linalg.norm(w, axis=-1, keepdims=True)
    small = angle < 1e-300
    axis = np.where(small, 0.0, w / np.where(small, 1.0, angle))
    a = angle[..., 0][..., None]
    cos_a = np.cos(a)
    sin_a = np.sin(a)
    dot = np.sum(axis * v, axis=-1, keepdims=True)
    return v * cos_a + np.cross(axis, v) * sin_a + axis * dot * (1.0 - cos_a)


# ----------------------------------------------------------------------
# CSV interchange for coloring tables
# ----------------------------------------------------------------------


def save_coloring_csv(path: str | Path, basis: BasisSet, table: ColoringTable):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        d = basis.dimension
        writer.writerow([f"ell{j + 1}" for j in range(d)] + ["polarization", "sigma"])
        for mode, sig in zip(basis.modes, table.sigmas):
            writer.writerow(list(mode.ell) + [mode.polarization, repr(float(sig))])


def load_coloring_csv(path: str | Path, basis: BasisSet) -> ColoringTable:
    """Read a coloring table and align it with the given basis order."""
    lookup = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = len(header) - 2
        if d != basis.dimension:
            raise ValueError(f"CSV dimension {d} != basis dimension {basis.dimension}")
        for row in reader:
            ell = tuple(int(c) for c in row[:d])
            pol = int(row[d])
            sigma = float(row[d + 1])
            if sigma < 0:
                raise ValueError("coloring coefficients must be nonnegative")
            lookup[(ell, pol)] = sigma
    sigmas = []
    for mode in basis.modes:
        key = (mode.ell, mode.polarization)
        if key not in lookup:
            raise ValueError(f"mode {key} missing from coloring CSV")
        sigmas.append(lookup[key])
    sig = np.array(sigmas)
    spec_like = np.array([m.abs_ell for m in basis.modes])
    weights = spec_like ** (2 * 4) * sig**2
    shells: dict = {}
    for a, w in zip(spec_like, weights):
        key = round(float(a), 9)
        shells[key] = shells.get(key, 0.0) + float(w)
    return ColoringTable(
        sigmas=sig, weighted_sum=float(np.sum(weights)), shell_sums=shells
    )
