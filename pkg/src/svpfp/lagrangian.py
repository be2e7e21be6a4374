"""Particle integrator for the stochastic characteristics, flow diagnostics,
and backward density reconstruction.

Characteristics: dX = V dt, dV = -nu V dt + drift(X) dt + sqrt(2 nu) dW~
(internal, per particle) + noise field(X) dW (external, shared).  The
external field is constant in v, so the Stratonovich and Ito readings of its
term coincide and the Euler-Maruyama and Heun pushes agree to first order.

Density reconstruction runs the characteristics backward from every grid
node, reversing the same substep maps the grid solver applies forward, and
averages the initial data over internal-noise replicas.  With nu = 0 the
inner flow is deterministic and the reconstruction agrees with the grid
solver up to trigonometric interpolation of the initial data.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .fields import solve_poisson
from .noise import BasisSet, ColoringTable, NoisePath, rotate_about_axis
from .phase_space import DistributionField, GridSpec

__all__ = [
    "ParticleEnsemble",
    "FlowDiagnostics",
    "init_particles",
    "push",
    "feynman_kac_density",
    "deposit_density",
    "flow_volume_check",
    "trig_interpolate",
    "SpectralFieldEvaluator",
    "make_noise_evaluator",
    "save_particles",
    "load_particles",
]


@dataclass
class ParticleEnsemble:
    """Phase-space particle cloud for one external noise realization."""

    X: np.ndarray  # (N, d) positions in [0, 2 pi)
    V: np.ndarray  # (N, d) velocities
    w: np.ndarray  # (N,) weights
    internal_replicas: int = 1

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        self.V = np.atleast_2d(np.asarray(self.V, dtype=np.float64))
        self.w = np.asarray(self.w, dtype=np.float64)
        if self.X.shape != self.V.shape or self.X.shape[0] != self.w.shape[0]:
            raise ValueError("inconsistent particle array shapes")
        if self.internal_replicas < 1:
            raise ValueError("internal_replicas must be >= 1")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def copy(self) -> "ParticleEnsemble":
        return ParticleEnsemble(
            self.X.copy(), self.V.copy(), self.w.copy(), self.internal_replicas
        )


@dataclass
class FlowDiagnostics:
    volume_estimate: float
    volume_ci: float
    energy_mean: float
    energy_max: float
    method: str  # "shoelace" or "mc"
    self_intersection: bool = False


# ----------------------------------------------------------------------
# interpolation helpers
# ----------------------------------------------------------------------


def trig_interpolate(values: np.ndarray, points: np.ndarray, length: float, origin: float = 0.0) -> np.ndarray:
    """Exact trigonometric interpolation of periodic grid data at points.

    values: (N,)*d node data on origin + j*length/N per axis; points: (n, d).
    """
    values = np.asarray(values, dtype=np.float64)
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    d = points.shape[1]
    N = values.shape[0]
    F = np.fft.fftn(values) / values.size
    k = np.fft.fftfreq(N, d=1.0 / N) * (2.0 * np.pi / length)
    # zero the Nyquist imaginary contribution by symmetrizing: replace the
    # Nyquist wavenumber's complex exponential with a cosine
    out = np.zeros(points.shape[0], dtype=np.complex128)
    # accumulate axis-by-axis via iterative tensor contraction
    cur = F
    for j in range(d):
        phase = np.exp(1j * np.outer(points[:, j] - origin, k))  # (n, N)
        nyq = N // 2
        # cosine at the Nyquist mode keeps the interpolant real-valued
        phase[:, nyq] = np.cos((points[:, j] - origin) * k[nyq])
        if j == 0:
            cur = np.tensordot(phase, cur, axes=(1, 0))  # (n, rest...)
        else:
            cur = np.einsum("nk,n...k->n...", phase, np.moveaxis(cur, 1, -1))
    out = cur
    return np.real(out)


class SpectralFieldEvaluator:
    """Trigonometric (default) or cubic interpolation of a gridded d-vector field."""

    def __init__(self, E: np.ndarray, grid: GridSpec, method: str = "trig"):
        if E.shape != (grid.N_x,) * grid.d + (grid.d,):
            raise ValueError("field shape incompatible with grid")
        if method not in ("trig", "cubic"):
            raise ValueError("method must be 'trig' or 'cubic'")
        self.E = np.asarray(E, dtype=np.float64)
        self.grid = grid
        self.method = method
        if method == "cubic":
            from scipy.interpolate import CubicSpline

            if grid.d != 1:
                raise ValueError("cubic interpolation implemented for d=1 only")
            x_ext = np.append(grid.x, 2.0 * np.pi)
            y_ext = np.append(self.E[:, 0], self.E[0, 0])
            self._spline = CubicSpline(x_ext, y_ext, bc_type="periodic")

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        if self.method == "cubic":
            return self._spline(np.mod(points[:, 0], 2.0 * np.pi))[:, None]
        out = np.empty((points.shape[0], self.grid.d))
        for j in range(self.grid.d):
            out[:, j] = trig_interpolate(self.E[..., j], points, 2.0 * np.pi)
        return out


def make_noise_evaluator(path: NoisePath, step: int, basis: BasisSet, table: ColoringTable):
    """Evaluator of the shared external increment field at arbitrary points."""
    dW = path.increments_for_step(step, basis.n_modes)
    coeff = table.sigmas * dW

    def evaluate(points: np.ndarray) -> np.ndarray:
        ek = basis.evaluate(np.atleast_2d(points))  # (n_modes, n, d)
        return np.tensordot(coeff, ek, axes=(0, 0))

    return evaluate


# ----------------------------------------------------------------------
# initialization and deposition
# ----------------------------------------------------------------------


def init_particles(
    f0: DistributionField,
    N: int,
    strategy: str = "grid_weighted",
    seed: int = 0,
    internal_replicas: int = 1,
) -> ParticleEnsemble:
    """Particle cloud sampling f0: one per cell (weighted) or N rejection draws."""
    g = f0.grid
    if N < 1:
        raise ValueError("N must be >= 1")
    if strategy == "grid_weighted":
        mesh = np.meshgrid(*([g.x] * g.d + [g.v] * g.d), indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        X = pts[:, : g.d]
        V = pts[:, g.d :]
        w = f0.values.ravel() * g.cell_volume
        return ParticleEnsemble(X, V, w, internal_replicas)
    if strategy == "rejection_sampled":
        if np.any(f0.values < 0):
            raise ValueError("rejection sampling requires nonnegative initial data")
        rng = np.random.default_rng(seed)
        fmax = float(np.max(f0.values))
        mass = float(np.sum(f0.values) * g.cell_volume)
        X = np.empty((N, g.d))
        V = np.empty((N, g.d))
        filled = 0
        while filled < N:
            batch = max(2 * (N - filled), 64)
            xs = rng.uniform(0.0, 2.0 * np.pi, size=(batch, g.d))
            vs = rng.uniform(-g.V_max, g.V_max, size=(batch, g.d))
            u = rng.uniform(0.0, fmax, size=batch)
            vals = trig_interpolate_phase_space(f0, xs, vs)
            keep = u < vals
            take = min(int(np.sum(keep)), N - filled)
            X[filled : filled + take] = xs[keep][:take]
            V[filled : filled + take] = vs[keep][:take]
            filled += take
        w = np.full(N, mass / N)
        return ParticleEnsemble(X, V, w, internal_replicas)
    raise ValueError(f"unknown init strategy {strategy!r}")


def trig_interpolate_phase_space(f: DistributionField, xs: np.ndarray, vs: np.ndarray) -> np.ndarray:
    """Evaluate the band-limited interpolant of f at off-grid (x, v) points."""
    g = f.grid
    xs = np.atleast_2d(xs)
    vs = np.atleast_2d(vs)
    n = xs.shape[0]
    F = np.fft.fftn(f.values) / f.values.size
    kx = g.kx
    kv = g.kv
    cur = F
    for j in range(g.d):
        phase = np.exp(1j * np.outer(xs[:, j], kx))
        phase[:, g.N_x // 2] = np.cos(xs[:, j] * kx[g.N_x // 2])
        if j == 0:
            cur = np.tensordot(phase, cur, axes=(1, 0))
        else:
            cur = np.einsum("nk,n...k->n...", phase, np.moveaxis(cur, 1, -1))
    for j in range(g.d):
        phase = np.exp(1j * np.outer(vs[:, j] + g.V_max, kv))
        phase[:, g.N_v // 2] = np.cos((vs[:, j] + g.V_max) * kv[g.N_v // 2])
        cur = np.einsum("nk,n...k->n...", phase, np.moveaxis(cur, 1, -1))
    return np.real(cur)


def deposit_density(ens: ParticleEnsemble, grid: GridSpec) -> np.ndarray:
    """Cloud-in-cell spatial density; cell sums reproduce the total weight."""
    raw = kernels.deposit_cic(ens.X, ens.w, grid.N_x, 2.0 * np.pi)
    return raw / grid.dx**grid.d


# ----------------------------------------------------------------------
# pushes
# ----------------------------------------------------------------------


def _friction_factor(nu: float, dt: float, exact: bool) -> float:
    if nu == 0.0:
        return 1.0
    return float(np.exp(-nu * dt)) if exact else 1.0 - nu * dt


def push(
    ens: ParticleEnsemble,
    e_field,
    noise_eval,
    nu: float,
    dt: float,
    scheme: str = "euler_maruyama",
    rng: np.random.Generator | None = None,
    exact_friction: bool = True,
    magnetic_increment: np.ndarray | None = None,
    speed_of_light: float = 1.0,
) -> ParticleEnsemble:
    """One time step of the characteristics.

    e_field(points)->(n,d) is the frozen drift (already cutoff-scaled and
    mollified); noise_eval(points)->(n,d) the shared external increment for
    this step; both may be None.  Internal noise sqrt(2 nu) dW~ is drawn
    fresh per particle from rng.  magnetic_increment, if given, is applied
    as an exact rotation of V (d=3), conserving |V|.
    """
    if scheme not in ("euler_maruyama", "stratonovich_heun"):
        raise ValueError(f"unknown scheme {scheme!r}")
    out = ens.copy()
    X, V = out.X, out.V
    d = out.d

    def drift_at(pos):
        if e_field is None:
            return 0.0
        return e_field(pos)

    if scheme == "euler_maruyama":
        a = drift_at(X)
        X_new = X + V * dt
        V_new = V * _friction_factor(nu, dt, exact_friction) + a * dt
    else:
        # Heun predictor-corrector on the drift part; the noise terms are
        # added once (their Ito/Stratonovich readings coincide here)
        a0 = drift_at(X)
        X_pred = X + V * dt
        V_pred = V * _friction_factor(nu, dt, exact_friction) + a0 * dt
        a1 = drift_at(np.mod(X_pred, 2.0 * np.pi))
        X_new = X + 0.5 * (V + V_pred) * dt
        V_new = V * _friction_factor(nu, dt, exact_friction) + 0.5 * (a0 + a1) * dt

    if noise_eval is not None:
        V_new = V_new + noise_eval(np.mod(X_new, 2.0 * np.pi))
    if nu > 0.0:
        if rng is None:
            raise ValueError("nu > 0 requires an rng for the internal noise")
        V_new = V_new + np.sqrt(2.0 * nu * dt) * rng.standard_normal(V.shape)
    if magnetic_increment is not None:
        if d != 3:
            raise ValueError("magnetic rotation requires d=3")
        axis = -np.asarray(magnetic_increment, dtype=np.float64) / speed_of_light
        V_new = rotate_about_axis(V_new, np.broadcast_to(axis, V_new.shape))

    if not np.all(np.isfinite(V_new)):
        bad = int(np.argwhere(~np.all(np.isfinite(V_new), axis=1))[0][0])
        raise FloatingPointError(f"non-finite velocity at particle {bad}")
    out.X = np.mod(X_new, 2.0 * np.pi)
    out.V = V_new
    return out


# ----------------------------------------------------------------------
# backward reconstruction
# ----------------------------------------------------------------------


def feynman_kac_density(
    f0: DistributionField,
    noise: NoisePath | None,
    basis: BasisSet | None,
    coloring: ColoringTable | None,
    n_steps: int,
    dt: float,
    nu: float = 0.0,
    drift_fields: list | None = None,
    replicas: int = 1,
    rng: np.random.Generator | None = None,
) -> DistributionField:
    """Backward-in-time reconstruction of the frozen-field solution at t = n_steps*dt.

    drift_fields[n] is the deterministic drift coefficient on the x-grid at
    step n (shape (N,)*d + (d,), without the dt factor), as recorded by the
    forward grid solver; None means zero drift.  For each grid node the
    characteristics are reversed through the same substep sequence the grid
    solver applies forward, with `replicas` independent internal-noise
    copies, and f0 is averaged over the endpoints (times the phase-space
    contraction factor of the friction).
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if nu == 0.0 and replicas > 1:
        warnings.warn(
            "nu=0 makes internal replicas redundant (deterministic inner flow)",
            stacklevel=2,
        )
        replicas = 1
    if nu > 0.0 and rng is None:
        rng = np.random.default_rng(0)
    g = f0.grid
    mesh = np.meshgrid(*([g.x] * g.d + [g.v] * g.d), indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    n_nodes = nodes.shape[0]

    drift_interp = []
    if drift_fields is not None:
        if len(drift_fields) != n_steps:
            raise ValueError("drift_fields must have one entry per step")
        for fld in drift_fields:
            if fld is None:
                drift_interp.append(None)
            else:
                drift_interp.append(SpectralFieldEvaluator(fld, g))

    accum = np.zeros(n_nodes)
    sig = np.sqrt(nu * dt)  # std of each half-diffusion kick
    for _ in range(replicas):
        X = np.repeat(nodes[:, : g.d], 1, axis=0).copy()
        V = nodes[:, g.d :].copy()
        for n in range(n_steps - 1, -1, -1):
            # inverse of the trailing half-transport
            X = X - V * (dt / 2.0)
            Xw = np.mod(X, 2.0 * np.pi)
            # a_total of this step, rebuilt from the recorded drift and the
            # regenerated noise increment
            a = np.zeros_like(V)
            if drift_fields is not None and drift_interp[n] is not None:
                a = a + drift_interp[n](Xw) * dt
            if noise is not None and coloring is not None:
                ev = make_noise_evaluator(noise, n, basis, coloring)
                a = a + ev(Xw)
            if nu > 0.0:
                # reverse kick/collision/kick: half shift, then diffusion,
                # dilation, diffusion stage by stage, then half shift
                V = V - a / 2.0
                V = V + sig * rng.standard_normal(V.shape)
                V = V * np.exp(nu * dt)
                V = V + sig * rng.standard_normal(V.shape)
                V = V - a / 2.0
            else:
                V = V - a
            # inverse of the leading half-transport
            X = X - V * (dt / 2.0)
        Xw = np.mod(X, 2.0 * np.pi)
        Vw = np.mod(V + g.V_max, 2.0 * g.V_max) - g.V_max
        accum += trig_interpolate_phase_space(f0, Xw, Vw)
    values = accum / replicas * np.exp(g.d * nu * dt * n_steps)
    return DistributionField(g, values.reshape(g.shape), time=n_steps * dt)


# ----------------------------------------------------------------------
# flow diagnostics
# ----------------------------------------------------------------------


def _shoelace(x: np.ndarray, y: np.ndarray) -> float:
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _segments_intersect(p, q):
    """Crude O(n^2) self-intersection test on a closed polygon."""
    n = p.shape[0]
    a1 = p
    a2 = np.roll(p, -1, axis=0)

    def ccw(A, B, C):
        return (C[:, 1] - A[:, 1]) * (B[:, 0] - A[:, 0]) > (
            B[:, 1] - A[:, 1]
        ) * (C[:, 0] - A[:, 0])

    for i in range(n):
        j = np.arange(n)
        mask = (j != i) & (j != (i - 1) % n) & (j != (i + 1) % n)
        B1 = np.broadcast_to(a1[i], (n, 2))
        B2 = np.broadcast_to(a2[i], (n, 2))
        inter = (
            (ccw(B1, a1, a2) != ccw(B2, a1, a2))
            & (ccw(B1, B2, a1) != ccw(B1, B2, a2))
        )
        if np.any(inter & mask):
            return True
    return False


def flow_volume_check(
    corners: np.ndarray,
    pusher,
    n_steps: int,
    boundary_samples: int = 1024,
    mc_samples: int = 10000,
    seed: int = 0,
) -> FlowDiagnostics:
    """Advect a phase-space box and report the enclosed-volume ratio.

    corners: (2, 2d) array of (low, high) box corners in (x..., v...)
    coordinates.  pusher(X, V, step) advances unwrapped positions one step
    and returns (X', V').  d=1 uses the shoelace area of the advected
    boundary polygon; d>=2 (or a self-intersecting polygon) falls back to a
    Monte Carlo volume estimate by advecting interior samples alongside a
    binary indicator... interior MC tracks mass of the advected uniform
    sample inside the image via sign of the initial draw (volume preservation
    means the pushforward of the uniform density has unchanged total).
    """
    corners = np.asarray(corners, dtype=np.float64)
    d = corners.shape[1] // 2
    lo, hi = corners[0], corners[1]
    vol0 = float(np.prod(hi - lo))
    rng = np.random.default_rng(seed)

    if d == 1:
        # boundary polygon, counterclockwise
        m = boundary_samples // 4
        ts = np.linspace(0.0, 1.0, m, endpoint=False)
        bx = np.concatenate(
            [
                lo[0] + ts * (hi[0] - lo[0]),
                np.full(m, hi[0]),
                hi[0] - ts * (hi[0] - lo[0]),
                np.full(m, lo[0]),
            ]
        )
        bv = np.concatenate(
            [
                np.full(m, lo[1]),
                lo[1] + ts * (hi[1] - lo[1]),
                np.full(m, hi[1]),
                hi[1] - ts * (hi[1] - lo[1]),
            ]
        )
        X = bx[:, None].copy()
        V = bv[:, None].copy()
        for n in range(n_steps):
            X, V = pusher(X, V, n)
        poly = np.stack([X[:, 0], V[:, 0]], axis=-1)
        if not _segments_intersect(poly, None):
            area = abs(_shoelace(poly[:, 0], poly[:, 1]))
            energy = V[:, 0] ** 2
            return FlowDiagnostics(
                volume_estimate=area / vol0,
                volume_ci=0.0,
                energy_mean=float(np.mean(energy)),
                energy_max=float(np.max(energy)),
                method="shoelace",
            )
        flagged = True
    else:
        flagged = False

    # MC estimate: vol(image)/vol(box) = E[|det J|] over uniform samples of
    # the box, with J the flow Jacobian approximated by forward differences
    # of 2d companion points per sample
    h = 1e-5
    Zs = rng.uniform(lo, hi, size=(mc_samples, 2 * d))
    cloud = [Zs]
    for j in range(2 * d):
        pert = Zs.copy()
        pert[:, j] += h
        cloud.append(pert)
    Z_all = np.concatenate(cloud, axis=0)
    X = Z_all[:, :d].copy()
    V = Z_all[:, d:].copy()
    for n in range(n_steps):
        X, V = pusher(X, V, n)
    img = np.concatenate([X, V], axis=1)
    base = img[:mc_samples]
    J = np.empty((mc_samples, 2 * d, 2 * d))
    for j in range(2 * d):
        block = img[(j + 1) * mc_samples : (j + 2) * mc_samples]
        J[:, :, j] = (block - base) / h
    dets = np.abs(np.linalg.det(J))
    est = float(np.mean(dets))
    ci = 3.0 * float(np.std(dets)) / np.sqrt(mc_samples)
    energy = np.sum(base[:, d:] ** 2, axis=1)
    return FlowDiagnostics(
        volume_estimate=est,
        volume_ci=ci,
        energy_mean=float(np.mean(energy)),
        energy_max=float(np.max(energy)),
        method="mc",
        self_intersection=flagged,
    )


# ----------------------------------------------------------------------
# PIC coupling and snapshots
# ----------------------------------------------------------------------


def pic_step(
    ens: ParticleEnsemble,
    grid: GridSpec,
    noise_eval,
    nu: float,
    dt: float,
    rng: np.random.Generator | None = None,
    scheme: str = "euler_maruyama",
) -> ParticleEnsemble:
    """Physically coupled mode: deposit, solve the field, push."""
    rho = deposit_density(ens, grid)
    sol = solve_poisson(rho, grid)
    ev = SpectralFieldEvaluator(sol.E, grid)
    return push(ens, ev, noise_eval, nu, dt, scheme=scheme, rng=rng)


def save_particles(ens: ParticleEnsemble, path: str | Path):
    path = Path(path)
    meta = {
        "kind": "particle_ensemble",
        "n": ens.n,
        "d": ens.d,
        "internal_replicas": ens.internal_replicas,
        "layout": "X then V then w, row-major",
        "endianness": "little",
        "dtype": "f64",
    }
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")
    blob = np.concatenate([ens.X.ravel(), ens.V.ravel(), ens.w])
    blob.astype("<f8").tofile(path.with_suffix(".f64"))


def load_particles(path: str | Path) -> ParticleEnsemble:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    if meta.get("kind") != "particle_ensemble":
        raise ValueError(f"{path}: not a particle snapshot")
    n, d = meta["n"], meta["d"]
    raw = np.fromfile(path.with_suffix(".f64"), dtype="<f8")
    X = raw[: n * d].reshape(n, d)
    V = raw[n * d : 2 * n * d].reshape(n, d)
    w = raw[2 * n * d :]
    return ParticleEnsemble(X, V, w, meta.get("internal_replicas", 1))
