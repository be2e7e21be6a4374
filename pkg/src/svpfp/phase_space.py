"""Phase-space grids, distribution fields, weighted norms and regularizers.

The spatial domain is the periodic box [0, 2pi)^d; velocity space is
truncated to the periodic box [-V_max, V_max)^d so that all derivatives can
be taken spectrally.  Runs are expected to keep essentially all mass inside
|v| < V_max/2 (see ``mass_outside_fraction``); the truncation is then
invisible at the working tolerances.
"""
from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

__all__ = [
    "GridSpec",
    "DistributionField",
    "WeightedNormSpec",
    "CutoffSpec",
    "weighted_sobolev_norm",
    "l2_norm",
    "total_mass",
    "density",
    "mollify",
    "mollifier_multiplier",
    "bump_transform",
    "cutoff_theta",
    "smooth_step",
    "regularize_initial",
    "mass_outside_fraction",
    "save_snapshot",
    "load_snapshot",
]


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Tensor-product phase-space grid.

    d: spatial (= velocity) dimension, 1..3
    N_x: points per spatial axis (power of two, >= 8)
    N_v: points per velocity axis (power of two, >= 8)
    V_max: velocity half-width; the velocity box [-V_max, V_max) is periodic
    dealias_fraction: fraction of modes kept when dealiasing field products
    """

    d: int
    N_x: int
    N_v: int
    V_max: float
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"unsupported dimension d={self.d}")
        if self.N_x < 8 or self.N_v < 8:
            raise ValueError("N_x and N_v must be >= 8")
        if not (_is_pow2(self.N_x) and _is_pow2(self.N_v)):
            raise ValueError("N_x and N_v must be powers of two")
        if self.V_max <= 0:
            raise ValueError("V_max must be positive")
        if not 0 < self.dealias_fraction <= 1:
            raise ValueError("dealias_fraction must lie in (0, 1]")

    # -- axis helpers -------------------------------------------------

    @property
    def dx(self) -> float:
        return 2.0 * np.pi / self.N_x

    @property
    def dv(self) -> float:
        return 2.0 * self.V_max / self.N_v

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.N_x) * self.dx

    @property
    def v(self) -> np.ndarray:
        return -self.V_max + np.arange(self.N_v) * self.dv

    @property
    def kx(self) -> np.ndarray:
        """Integer spatial wavenumbers in FFT order."""
        return np.fft.fftfreq(self.N_x, d=1.0 / self.N_x)

    @property
    def kv(self) -> np.ndarray:
        """Velocity wavenumbers (period 2*V_max) in FFT order."""
        return np.fft.fftfreq(self.N_v, d=1.0 / self.N_v) * (np.pi / self.V_max)

    @property
    def kx_deriv(self) -> np.ndarray:
        """Spatial wavenumbers with the Nyquist mode zeroed (for derivatives)."""
        k = self.kx.copy()
        k[self.N_x // 2] = 0.0
        return k

    @property
    def kv_deriv(self) -> np.ndarray:
        k = self.kv.copy()
        k[self.N_v // 2] = 0.0
        return k

    @property
    def shape(self) -> tuple:
        return (self.N_x,) * self.d + (self.N_v,) * self.d

    @property
    def x_axes(self) -> tuple:
        return tuple(range(self.d))

    @property
    def v_axes(self) -> tuple:
        return tuple(range(self.d, 2 * self.d))

    @property
    def cell_volume(self) -> float:
        return self.dx**self.d * self.dv**self.d

    def v_magnitude_sq(self) -> np.ndarray:
        """|v|^2 broadcast over the velocity axes, shape (N_v,)*d."""
        out = np.zeros((self.N_v,) * self.d)
        for j in range(self.d):
            shape = [1] * self.d
            shape[j] = self.N_v
            out = out + (self.v**2).reshape(shape)
        return out

    def velocity_weight(self, m: float) -> np.ndarray:
        """<v>^m = (1+|v|^2)^{m/2} on the velocity grid."""
        return (1.0 + self.v_magnitude_sq()) ** (m / 2.0)


@dataclass
class DistributionField:
    """Gridded distribution f(x, v) at one instant."""

    grid: GridSpec
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} != grid shape {self.grid.shape}"
            )

    def copy(self) -> "DistributionField":
        return DistributionField(self.grid, self.values.copy(), self.time)

    def check_finite(self):
        if not np.all(np.isfinite(self.values)):
            raise ValueError("distribution field contains non-finite values")


@dataclass(frozen=True)
class WeightedNormSpec:
    """H^sigma_m norm parameters: sigma derivatives, <v>^m velocity weight."""

    sigma: int = 0
    m: int = 0

    def __post_init__(self):
        if self.sigma < 0 or self.m < 0:
            raise ValueError("sigma and m must be nonnegative")


# ----------------------------------------------------------------------
# spectral derivatives and norms
# ----------------------------------------------------------------------


def _axis_multiplier(k: np.ndarray, power: int, ndim: int, axis: int) -> np.ndarray:
    shape = [1] * ndim
    shape[axis] = len(k)
    return ((1j * k) ** power).reshape(shape)


def spectral_derivative(f: DistributionField, alpha, beta) -> np.ndarray:
    """partial_x^alpha partial_v^beta f via the FFT, returned in physical space."""
    g = f.grid
    alpha = tuple(alpha)
    beta = tuple(beta)
    if len(alpha) != g.d or len(beta) != g.d:
        raise ValueError("alpha and beta must have length d")
    F = np.fft.fftn(f.values)
    n = 2 * g.d
    for j, a in enumerate(alpha):
        if a:
            F = F * _axis_multiplier(g.kx_deriv, a, n, j)
    for j, b in enumerate(beta):
        if b:
            F = F * _axis_multiplier(g.kv_deriv, b, n, g.d + j)
    return np.real(np.fft.ifftn(F))


def multi_indices(d: int, order: int):
    """All multi-indices alpha in N^d with |alpha| == order."""
    if d == 1:
        yield (order,)
        return
    for head in range(order + 1):
        for tail in multi_indices(d - 1, order - head):
            yield (head,) + tail


def derivative_pairs(d: int, sigma: int):
    """All (alpha, beta) with |alpha| + |beta| <= sigma."""
    for total in range(sigma + 1):
        for ax in range(total + 1):
            for alpha in multi_indices(d, ax):
                for beta in multi_indices(d, total - ax):
                    yield alpha, beta


def weighted_l2_sq(grid: GridSpec, values: np.ndarray, m: float) -> float:
    """integral of |values|^2 <v>^m over the phase-space box."""
    w = grid.velocity_weight(m) if m else 1.0
    return float(np.sum(values**2 * w) * grid.cell_volume)


def weighted_sobolev_norm(f: DistributionField, spec: WeightedNormSpec) -> float:
    """H^sigma_m norm with spectral derivatives and trapezoid quadrature."""
    g = f.grid
    if spec.sigma > g.N_v // 4:
        raise ValueError(
            f"sigma={spec.sigma} exceeds the spectral sanity bound N_v/4={g.N_v // 4}"
        )
    f.check_finite()
    total = 0.0
    for alpha, beta in derivative_pairs(g.d, spec.sigma):
        if sum(alpha) + sum(beta) == 0:
            der = f.values
        else:
            der = spectral_derivative(f, alpha, beta)
        total += weighted_l2_sq(g, der, spec.m)
    return float(np.sqrt(total))


def l2_norm(f: DistributionField) -> float:
    return float(np.sqrt(weighted_l2_sq(f.grid, f.values, 0)))


def total_mass(f: DistributionField) -> float:
    return float(np.sum(f.values) * f.grid.cell_volume)


def density(f: DistributionField) -> np.ndarray:
    """rho(x) = integral of f over the velocity box."""
    return np.sum(f.values, axis=f.grid.v_axes) * f.grid.dv**f.grid.d


def mass_outside_fraction(f: DistributionField, radius: float | None = None) -> float:
    """Fraction of |f| mass at |v| >= radius (default V_max/2)."""
    g = f.grid
    r = g.V_max / 2.0 if radius is None else radius
    vsq = g.v_magnitude_sq()
    mask = (vsq >= r * r).astype(float)
    absf = np.abs(f.values)
    denom = np.sum(absf)
    if denom == 0.0:
        return 0.0
    return float(np.sum(absf * mask) / denom)


# ----------------------------------------------------------------------
# mollifier
# ----------------------------------------------------------------------

_BUMP_QUAD_POINTS = 4097


def _bump_profile(u: np.ndarray) -> np.ndarray:
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ui * ui))
    return out


def bump_transform(xi: np.ndarray) -> np.ndarray:
    """Fourier transform of the unit-mass C^infty bump on (-1, 1).

    Real, even, equal to 1 at xi=0 and bounded by 1 in modulus.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=np.float64))
    u = np.linspace(-1.0, 1.0, _BUMP_QUAD_POINTS)
    phi = _bump_profile(u)
    phi /= np.trapezoid(phi, u)
    out = np.trapezoid(phi[None, :] * np.cos(np.outer(xi, u)), u, axis=1)
    return out


def mollifier_multiplier(grid: GridSpec, epsilon: float) -> np.ndarray:
    """Spectral multiplier of the periodized spatial mollifier, on the x-grid."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    phi_axis = bump_transform(epsilon * grid.kx)
    mult = phi_axis
    for _ in range(grid.d - 1):
        mult = np.multiply.outer(mult, phi_axis)
    return mult


def mollify(f: DistributionField, epsilon: float) -> DistributionField:
    """Periodized convolution with the scaled bump, in x only.

    The zero-mode multiplier is exactly 1, so total mass is preserved.
    """
    g = f.grid
    mult = mollifier_multiplier(g, epsilon)
    F = np.fft.fftn(f.values, axes=g.x_axes)
    F *= mult.reshape(mult.shape + (1,) * g.d)
    out = np.real(np.fft.ifftn(F, axes=g.x_axes))
    return DistributionField(g, out, f.time)


# ----------------------------------------------------------------------
# cutoff
# ----------------------------------------------------------------------


def smooth_step(u: np.ndarray) -> np.ndarray:
    """C^infty step: 0 at u<=0, 1 at u>=1, derivative bounded by 2."""
    u = np.asarray(u, dtype=np.float64)
    out = np.zeros_like(u)
    out[u >= 1.0] = 1.0
    mid = (u > 0.0) & (u < 1.0)
    um = u[mid]
    ga = np.exp(-1.0 / um)
    gb = np.exp(-1.0 / (1.0 - um))
    out[mid] = ga / (ga + gb)
    return out


@dataclass(frozen=True)
class CutoffSpec:
    """theta_R: smooth nonincreasing cutoff, 1 below R, 0 above 2R."""

    R: float

    def __post_init__(self):
        if self.R <= 0:
            raise ValueError("R must be positive")


def cutoff_theta(x, spec: CutoffSpec):
    """Evaluate theta_R at nonnegative x; exact 1 for x<=R, exact 0 for x>=2R."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0):
        raise ValueError("cutoff argument must be nonnegative")
    val = smooth_step(2.0 - x / spec.R)
    if val.ndim == 0:
        return float(val)
    return val


# ----------------------------------------------------------------------
# initial-data regularization
# ----------------------------------------------------------------------


def regularize_initial(f: DistributionField, n: int) -> DistributionField:
    """Mollify at scale 1/n in (x, v) and cut off velocities above ~2n.

    The convolution is realized spectrally (v treated on its periodic box);
    the velocity cutoff is theta(|v|/n) applied pointwise.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    g = f.grid
    if 2 * n > g.V_max:
        warnings.warn(
            f"velocity cutoff at 2n={2 * n} exceeds V_max={g.V_max}; cutoff inactive",
            stacklevel=2,
        )
    mult_x = bump_transform(g.kx / n)
    mult_v = bump_transform(g.kv / n)
    F = np.fft.fftn(f.values)
    nd = 2 * g.d
    for j in range(g.d):
        shape = [1] * nd
        shape[j] = g.N_x
        F = F * mult_x.reshape(shape)
    for j in range(g.d):
        shape = [1] * nd
        shape[g.d + j] = g.N_v
        F = F * mult_v.reshape(shape)
    smooth = np.real(np.fft.ifftn(F))
    vmag = np.sqrt(g.v_magnitude_sq())
    theta_v = cutoff_theta(vmag, CutoffSpec(R=float(n)))
    smooth = smooth * theta_v
    return DistributionField(g, smooth, f.time)


# ----------------------------------------------------------------------
# snapshot container: JSON sidecar + raw little-endian float64
# ----------------------------------------------------------------------


def save_snapshot(f: DistributionField, path: str | Path):
    """Write <path>.json (metadata) and <path>.f64 (raw array, row-major LE)."""
    path = Path(path)
    g = f.grid
    meta = {
        "kind": "distribution_field",
        "grid": {
            "d": g.d,
            "N_x": g.N_x,
            "N_v": g.N_v,
            "V_max": g.V_max,
            "dealias_fraction": g.dealias_fraction,
        },
        "time": f.time,
        "endianness": "little",
        "dtype": "f64",
        "shape": list(f.values.shape),
    }
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")
    f.values.astype("<f8").tofile(path.with_suffix(".f64"))


def load_snapshot(path: str | Path) -> DistributionField:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    if meta.get("kind") != "distribution_field":
        raise ValueError(f"{path}: not a distribution-field snapshot")
    gm = meta["grid"]
    grid = GridSpec(
        d=gm["d"],
        N_x=gm["N_x"],
        N_v=gm["N_v"],
        V_max=gm["V_max"],
        dealias_fraction=gm.get("dealias_fraction", 2.0 / 3.0),
    )
    raw = np.fromfile(path.with_suffix(".f64"), dtype="<f8")
    values = raw.reshape(meta["shape"])
    return DistributionField(grid, values, meta["time"])
