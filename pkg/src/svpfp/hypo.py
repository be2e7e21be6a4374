"""Time-weighted hypocoercive energy functionals and regularization rates.

E1[t,f] = ||f||^2_m + a t ||grad_v f||^2_m + b t^2 <grad_v f, grad_x f>_m
          + c t^3 ||grad_x f||^2_m
with coefficients a = theta, b = theta^m2, c = theta^m3 chosen so the cross
term is dominated through Cauchy-Schwarz.  E_sigma sums E1 over mixed
derivatives of total order sigma; D_sigma is the matching dissipation rate.

The short-time smoothing experiment (x-derivatives blowing up like t^{-3/2},
v-derivatives like t^{-1/2} as t -> 0 for rough-in-x data) needs wavenumbers
far beyond any full phase-space grid, so it runs on a batch of decoupled
spatial Fourier modes of the field-free kinetic equation, each a function of
v alone.  A closed-form solution of the same mode problem (characteristics
in the velocity-frequency variable) serves as the accuracy oracle.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .phase_space import (
    DistributionField,
    GridSpec,
    multi_indices,
    spectral_derivative,
    weighted_l2_sq,
)

__all__ = [
    "EnergyCoefficients",
    "EnergyTrace",
    "choose_constants",
    "energy_E1",
    "energy_Esigma",
    "dissipation_Dsigma",
    "coercive_lower_bound",
    "regularization_rate_fit",
    "ModeBatch",
    "mode_batch_init_rough",
    "run_mode_batch",
    "mode_oracle_gaussian",
    "rate_experiment",
    "write_energy_csv",
    "ENERGY_CSV_COLUMNS",
]

ENERGY_CSV_COLUMNS = ("t", "E_sigma", "D_sigma", "norm_sq", "gradv_sq", "cross", "gradx_sq")


@dataclass(frozen=True)
class EnergyCoefficients:
    """Admissible weights for the time-weighted energy functional."""

    epsilon: float
    theta: float
    m2: float
    m3: float
    a: float
    b: float
    c: float

    def inequality_slack(self) -> dict:
        """Slack (lhs - rhs >= 0 means satisfied) of each admissibility bound."""
        e = self.epsilon
        return {
            "unit_vs_a": 1.0 - self.a / e,
            "a_vs_b": self.a / e - self.b / e**2,
            "b_vs_c": self.b / e**2 - self.c / e**3,
            "a_le_eps_sqrt_b": e * np.sqrt(self.b) - self.a,
            "b_le_eps_sqrt_ac": e * np.sqrt(self.a * self.c) - self.b,
            "ordering": min(self.a - self.b, self.b - self.c, self.c),
        }

    def admissible(self) -> bool:
        return all(s >= -1e-15 for s in self.inequality_slack().values())


def choose_constants(epsilon: float) -> EnergyCoefficients:
    """Sufficient coefficient choice theta = epsilon^8, m2=1.5, m3=1.75.

    The binding constraint reduces to theta^{1/8} <= epsilon, so this choice
    satisfies every admissibility inequality; they are re-verified by direct
    evaluation before returning.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    theta = epsilon**8
    m2, m3 = 1.5, 1.75
    coeffs = EnergyCoefficients(
        epsilon=epsilon,
        theta=theta,
        m2=m2,
        m3=m3,
        a=theta,
        b=theta**m2,
        c=theta**m3,
    )
    if not coeffs.admissible():
        raise AssertionError(
            f"coefficient admissibility failed for epsilon={epsilon}: "
            f"{coeffs.inequality_slack()}"
        )
    return coeffs


@dataclass
class EnergyTrace:
    times: np.ndarray
    E_sigma: np.ndarray
    D_sigma: np.ndarray
    components: dict  # name -> array over times


# ----------------------------------------------------------------------
# functionals on full phase-space fields
# ----------------------------------------------------------------------


def _weighted_inner(grid: GridSpec, A: np.ndarray, B: np.ndarray, m: float) -> float:
    w = grid.velocity_weight(m) if m else 1.0
    return float(np.sum(A * B * w) * grid.cell_volume)


def _gradients(f: DistributionField):
    g = f.grid
    gx = [
        spectral_derivative(f, tuple(1 if i == j else 0 for i in range(g.d)), (0,) * g.d)
        for j in range(g.d)
    ]
    gv = [
        spectral_derivative(f, (0,) * g.d, tuple(1 if i == j else 0 for i in range(g.d)))
        for j in range(g.d)
    ]
    return gx, gv


def energy_E1(t: float, f: DistributionField, coeffs: EnergyCoefficients, m: float) -> float:
    """The four-term time-weighted functional on one field."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    g = f.grid
    gx, gv = _gradients(f)
    norm_sq = weighted_l2_sq(g, f.values, m)
    gradv_sq = sum(weighted_l2_sq(g, gvj, m) for gvj in gv)
    gradx_sq = sum(weighted_l2_sq(g, gxj, m) for gxj in gx)
    cross = sum(_weighted_inner(g, gvj, gxj, m) for gvj, gxj in zip(gv, gx))
    return (
        norm_sq
        + coeffs.a * t * gradv_sq
        + coeffs.b * t**2 * cross
        + coeffs.c * t**3 * gradx_sq
    )


def coercive_lower_bound(
    t: float, f: DistributionField, coeffs: EnergyCoefficients, m: float
) -> float:
    """Half the cross-term-free sum; E1 >= this under admissibility."""
    g = f.grid
    gx, gv = _gradients(f)
    norm_sq = weighted_l2_sq(g, f.values, m)
    gradv_sq = sum(weighted_l2_sq(g, gvj, m) for gvj in gv)
    gradx_sq = sum(weighted_l2_sq(g, gxj, m) for gxj in gx)
    return 0.5 * (norm_sq + coeffs.a * t * gradv_sq + coeffs.c * t**3 * gradx_sq)


def _derivative_fields(f: DistributionField, p: int, q: int):
    """All fields d_x^alpha d_v^beta f with |alpha| = p, |beta| = q."""
    g = f.grid
    for alpha in multi_indices(g.d, p):
        for beta in multi_indices(g.d, q):
            if p == 0 and q == 0:
                yield (alpha, beta), f
            else:
                der = spectral_derivative(f, alpha, beta)
                yield (alpha, beta), DistributionField(g, der, f.time)


def energy_Esigma(
    t: float, f: DistributionField, coeffs: EnergyCoefficients, sigma: int, m: float
) -> tuple:
    """Sum of E1 over mixed derivatives of total order sigma, plus breakdown."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    total = 0.0
    components = {}
    for q in range(sigma + 1):
        p = sigma - q
        for key, der in _derivative_fields(f, p, q):
            val = energy_E1(t, der, coeffs, m)
            components[(p, q) + key] = val
            total += val
    return total, components


def dissipation_Dsigma(
    t: float, f: DistributionField, coeffs: EnergyCoefficients, sigma: int, m: float
) -> float:
    """Matching dissipation rate; nonnegative by construction."""
    g = f.grid
    total = 0.0
    for q in range(sigma + 1):
        p = sigma - q
        for _, der in _derivative_fields(f, p, q):
            gx, gv = _gradients(der)
            gradv_sq = sum(weighted_l2_sq(g, a, m) for a in gv)
            gradx_sq = sum(weighted_l2_sq(g, a, m) for a in gx)
            gradvv_sq = 0.0
            for j in range(g.d):
                for i in range(g.d):
                    beta = [0] * g.d
                    beta[j] += 1
                    beta[i] += 1
                    d2 = spectral_derivative(der, (0,) * g.d, tuple(beta))
                    gradvv_sq += weighted_l2_sq(g, d2, m)
            gradxv_sq = 0.0
            for j in range(g.d):
                for i in range(g.d):
                    alpha = [0] * g.d
                    alpha[j] += 1
                    beta = [0] * g.d
                    beta[i] += 1
                    d2 = spectral_derivative(der, tuple(alpha), tuple(beta))
                    gradxv_sq += weighted_l2_sq(g, d2, m)
            total += (
                gradv_sq
                + coeffs.a * t * gradvv_sq
                + 0.5 * coeffs.b * t**2 * gradx_sq
                + coeffs.c * t**3 * gradxv_sq
            )
    return total


# ----------------------------------------------------------------------
# rate fitting
# ----------------------------------------------------------------------


def regularization_rate_fit(times: np.ndarray, norms: np.ndarray) -> dict:
    """OLS slope of log(norm) against log(t), with residual report."""
    times = np.asarray(times, dtype=np.float64)
    norms = np.asarray(norms, dtype=np.float64)
    if len(times) < 8:
        raise ValueError("need at least 8 sample times")
    if times.max() / times.min() < 10.0:
        raise ValueError("sample times must span at least one decade")
    if np.any(norms <= 0):
        raise ValueError("norms must be positive for a log-log fit")
    lx = np.log(times)
    ly = np.log(norms)
    A = np.stack([lx, np.ones_like(lx)], axis=-1)
    (slope, intercept), res, _, _ = np.linalg.lstsq(A, ly, rcond=None)
    fitted = A @ np.array([slope, intercept])
    return {
        "slope": float(slope),
        "intercept": float(intercept),
        "residual_rms": float(np.sqrt(np.mean((ly - fitted) ** 2))),
    }


# ----------------------------------------------------------------------
# mode-batched field-free kinetic solver
# ----------------------------------------------------------------------


@dataclass
class ModeBatch:
    """Spatial Fourier modes of the field-free equation, each a v-profile.

    F[i, :] = fhat(k_i, v); weights[i] approximates the spectral measure so
    that sums over i stand in for sums over the full integer lattice.
    """

    k: np.ndarray  # (n_modes,)
    weights: np.ndarray  # (n_modes,) quadrature weights |A_k|^2 dk
    F: np.ndarray  # (n_modes, N_v) complex
    N_v: int
    V_max: float
    time: float = 0.0

    @property
    def v(self) -> np.ndarray:
        return -self.V_max + np.arange(self.N_v) * (2.0 * self.V_max / self.N_v)

    @property
    def dv(self) -> float:
        return 2.0 * self.V_max / self.N_v

    @property
    def eta(self) -> np.ndarray:
        return np.fft.fftfreq(self.N_v, d=1.0 / self.N_v) * (np.pi / self.V_max)

    def copy(self) -> "ModeBatch":
        return ModeBatch(self.k, self.weights, self.F.copy(), self.N_v, self.V_max, self.time)


def mode_batch_init_rough(
    k_min: float = 1.0,
    k_max: float = 1.0e5,
    n_modes: int = 160,
    N_v: int = 512,
    V_max: float = 4.0,
    spectral_exponent: float = -1.0,
    seed: int = 7,
) -> ModeBatch:
    """Rough-in-x data: random-phase modes with |fhat(k)|^2 ~ k^exponent,
    Maxwellian v-profile, k sampled logarithmically with quadrature weights."""
    rng = np.random.default_rng(seed)
    k = np.geomspace(k_min, k_max, n_modes)
    # trapezoid weights in k for the continuum sum over modes
    dk = np.gradient(k)
    amp2 = k**spectral_exponent
    weights = amp2 * dk
    v = -V_max + np.arange(N_v) * (2.0 * V_max / N_v)
    profile = np.exp(-(v**2) / 2.0) / np.sqrt(2.0 * np.pi)
    phases = np.exp(2j * np.pi * rng.random(n_modes))
    F = phases[:, None] * profile[None, :]
    return ModeBatch(k=k, weights=weights, F=F.astype(np.complex128), N_v=N_v, V_max=V_max)


_MODE_DILATION_CACHE: dict = {}


def _mode_dilation_matrix(N_v: int, V_max: float, scale: float) -> np.ndarray:
    key = (N_v, V_max, scale)
    cached = _MODE_DILATION_CACHE.get(key)
    if cached is not None:
        return cached
    v = -V_max + np.arange(N_v) * (2.0 * V_max / N_v)
    eta = np.fft.fftfreq(N_v, d=1.0 / N_v) * (np.pi / V_max)
    E = np.exp(1j * np.outer(v * scale + V_max, eta))
    Fm = np.exp(-1j * np.outer(eta, v + V_max))
    M = np.real(E @ Fm) / N_v
    if len(_MODE_DILATION_CACHE) < 64:
        _MODE_DILATION_CACHE[key] = M
    return M


def mode_batch_step(batch: ModeBatch, nu: float, dt: float):
    """One Strang cycle: half transport, exact collision substep, half transport.

    The collision substep composes the exact friction dilation with the
    exact diffusion multiplier exp(-eta^2 (1 - e^{-2 nu dt}) / 2), which is
    the closed-form one-step solution of the collision operator alone.
    """
    v = batch.v
    phase = np.exp(-1j * np.outer(batch.k, v) * (dt / 2.0))
    batch.F *= phase
    if nu > 0.0:
        scale = np.exp(nu * dt)
        M = _mode_dilation_matrix(batch.N_v, batch.V_max, scale)
        batch.F = scale * (batch.F @ M.T)
        G = np.fft.fft(batch.F, axis=1)
        G *= np.exp(-(batch.eta**2) * (1.0 - np.exp(-2.0 * nu * dt)) / 2.0)[None, :]
        batch.F = np.fft.ifft(G, axis=1)
    batch.F *= phase
    batch.time += dt


def _mode_norms(batch: ModeBatch, m: float = 0.0) -> dict:
    """Weighted squared norms summed over the mode batch."""
    w = (1.0 + batch.v**2) ** (m / 2.0) if m else np.ones(batch.N_v)
    eta = batch.eta
    eta_d = eta.copy()
    eta_d[batch.N_v // 2] = 0.0
    G = np.fft.fft(batch.F, axis=1)
    dF = np.fft.ifft(1j * eta_d[None, :] * G, axis=1)
    d2F = np.fft.ifft(-(eta_d**2)[None, :] * G, axis=1)

    def wsum(A, extra=1.0):
        return float(np.sum(batch.weights[:, None] * extra * np.abs(A) ** 2 * w[None, :]) * batch.dv)

    k2 = (batch.k**2)[:, None]
    out = {
        "norm_sq": wsum(batch.F),
        "gradx_sq": float(
            np.sum(batch.weights[:, None] * k2 * np.abs(batch.F) ** 2 * w[None, :]) * batch.dv
        ),
        "gradv_sq": wsum(dF),
        "gradvv_sq": wsum(d2F),
        "gradxv_sq": float(
            np.sum(batch.weights[:, None] * k2 * np.abs(dF) ** 2 * w[None, :]) * batch.dv
        ),
        "cross": float(
            np.sum(
                batch.weights[:, None]
                * np.real(np.conj(dF) * (1j * batch.k[:, None] * batch.F))
                * w[None, :]
            )
            * batch.dv
        ),
    }
    return out


def run_mode_batch(
    batch: ModeBatch,
    nu: float,
    sample_times: np.ndarray,
    steps_per_interval: int = 6,
    coeffs: EnergyCoefficients | None = None,
    m: float = 0.0,
) -> EnergyTrace:
    """Advance the batch, sampling norms and the sigma=0 energy at the times."""
    sample_times = np.asarray(sample_times, dtype=np.float64)
    if np.any(np.diff(sample_times) <= 0) or sample_times[0] <= 0:
        raise ValueError("sample times must be positive and increasing")
    if coeffs is None:
        coeffs = choose_constants(0.5)
    times, E_arr, D_arr = [], [], []
    comps: dict = {
        "gradx_norm": [],
        "gradv_norm": [],
        "norm_sq": [],
        "gradv_sq": [],
        "cross": [],
        "gradx_sq": [],
    }
    t_prev = 0.0
    for t_target in sample_times:
        dt = (t_target - t_prev) / steps_per_interval
        for _ in range(steps_per_interval):
            mode_batch_step(batch, nu, dt)
        t_prev = t_target
        n = _mode_norms(batch, m)
        t = batch.time
        E1 = (
            n["norm_sq"]
            + coeffs.a * t * n["gradv_sq"]
            + coeffs.b * t**2 * n["cross"]
            + coeffs.c * t**3 * n["gradx_sq"]
        )
        D1 = (
            n["gradv_sq"]
            + coeffs.a * t * n["gradvv_sq"]
            + 0.5 * coeffs.b * t**2 * n["gradx_sq"]
            + coeffs.c * t**3 * n["gradxv_sq"]
        )
        times.append(t)
        E_arr.append(E1)
        D_arr.append(D1)
        comps["gradx_norm"].append(np.sqrt(n["gradx_sq"]))
        comps["gradv_norm"].append(np.sqrt(n["gradv_sq"]))
        for key in ("norm_sq", "gradv_sq", "cross", "gradx_sq"):
            comps[key].append(n[key])
    return EnergyTrace(
        times=np.array(times),
        E_sigma=np.array(E_arr),
        D_sigma=np.array(D_arr),
        components={k: np.array(vv) for k, vv in comps.items()},
    )


def mode_oracle_gaussian(k: float, eta: np.ndarray, nu: float, t: float, n_quad: int = 400) -> np.ndarray:
    """Closed-form mode solution with standard-Gaussian v-profile.

    ghat(t, eta) = ghat0(eta0) exp(-nu * integral of eta(s)^2), where the
    frequency characteristic solves eta' = nu eta - k; ghat0 is the
    continuum transform of the unit-mass Gaussian.  The damping integral is
    evaluated by fine trapezoid quadrature.
    """
    eta = np.asarray(eta, dtype=np.float64)
    if nu > 0:
        eta0 = np.exp(-nu * t) * eta + (k / nu) * (1.0 - np.exp(-nu * t))
    else:
        eta0 = eta + k * t
    s = np.linspace(0.0, t, n_quad)
    if nu > 0:
        eta_s = np.exp(nu * s)[None, :] * (eta0[:, None] - k / nu) + k / nu
    else:
        eta_s = eta0[:, None] - k * s[None, :]
    damp = np.trapezoid(eta_s**2, s, axis=1)
    g0 = np.exp(-(eta0**2) / 2.0)
    return g0 * np.exp(-nu * damp)


def rate_experiment(
    nu: float = 0.5,
    t_min: float = 1.0e-3,
    t_max: float = 1.0e-1,
    n_samples: int = 12,
    steps_per_interval: int = 6,
    seed: int = 7,
    **batch_kwargs,
) -> dict:
    """Full short-time smoothing experiment: run, fit both slopes, report."""
    batch = mode_batch_init_rough(seed=seed, **batch_kwargs)
    n0 = _mode_norms(batch, 0.0)
    sample_times = np.geomspace(t_min, t_max, n_samples)
    trace = run_mode_batch(batch, nu, sample_times, steps_per_interval)
    fit_x = regularization_rate_fit(trace.times, trace.components["gradx_norm"])
    fit_v = regularization_rate_fit(trace.times, trace.components["gradv_norm"])
    return {
        "trace": trace,
        "gradx_slope": fit_x["slope"],
        "gradv_slope": fit_v["slope"],
        "gradx_residual": fit_x["residual_rms"],
        "gradv_residual": fit_v["residual_rms"],
        "initial_norm_sq": n0["norm_sq"],
        "sup_E_sigma": float(np.max(trace.E_sigma)),
    }


def write_energy_csv(path: str | Path, trace: EnergyTrace):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ENERGY_CSV_COLUMNS)
        for i, t in enumerate(trace.times):
            writer.writerow(
                [
                    repr(float(t)),
                    repr(float(trace.E_sigma[i])),
                    repr(float(trace.D_sigma[i])),
                    repr(float(trace.components["norm_sq"][i])),
                    repr(float(trace.components["gradv_sq"][i])),
                    repr(float(trace.components["cross"][i])),
                    repr(float(trace.components["gradx_sq"][i])),
                ]
            )
