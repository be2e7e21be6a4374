"""Monte Carlo orchestration over external noise realizations.

Each realization gets its own counter-based noise path keyed by (base_seed,
realization id), so results are bit-identical regardless of how realizations
are scheduled across workers.  Threshold-crossing times are detected post
hoc on the diagnostics cadence grid; runs continue past crossings up to the
horizon or a numeric abort.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import eulerian
from .eulerian import StepPlan
from .noise import BasisSet, ColoringTable, NoisePath, NoiseSpec, build_basis, coloring
from .phase_space import DistributionField, WeightedNormSpec

__all__ = [
    "EnsembleConfig",
    "RunRecord",
    "EnsembleSummary",
    "run_ensemble",
    "detect_stopping",
    "moment_summary",
    "write_summary_json",
]


@dataclass
class EnsembleConfig:
    realizations: int
    base_seed: int
    plan: StepPlan
    n_steps: int
    cadence: int = 1
    stopping_norm: WeightedNormSpec = field(default_factory=lambda: WeightedNormSpec(2, 2))
    stopping_levels: tuple = (1.0, 2.0, 4.0, 8.0)

    def __post_init__(self):
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if self.cadence < 1:
            raise ValueError("cadence must be >= 1")
        if self.n_steps < 1:
            raise ValueError("n_steps must be >= 1")


@dataclass
class RunRecord:
    realization: int
    times: np.ndarray
    mass: np.ndarray
    l2: np.ndarray
    norm: np.ndarray  # stopping norm series on the cadence grid
    theta: np.ndarray
    stopping_times: dict  # level -> first crossing time or +inf
    completed: bool
    failure: str | None = None
    log: list = field(default_factory=list)


@dataclass
class EnsembleSummary:
    records: list
    failures: list
    moments: dict
    stopping_quantiles: dict


def _run_one(
    realization: int,
    f0: DistributionField,
    config: EnsembleConfig,
    noise_spec: NoiseSpec | None,
    basis: BasisSet | None,
    table: ColoringTable | None,
) -> RunRecord:
    dt = config.plan.dt
    noise = None
    if noise_spec is not None:
        noise = NoisePath(
            seed=config.base_seed,
            dt=dt,
            n_steps=config.n_steps,
            realization=realization,
        )
    state = eulerian.SolverState(f=f0.copy(), noise=noise, basis=basis, coloring=table)
    times, mass, l2, norm, theta = [0.0], [], [], [], []
    # the t=0 row uses the initial data directly
    from .phase_space import l2_norm, total_mass, weighted_sobolev_norm

    mass.append(total_mass(f0))
    l2.append(l2_norm(f0))
    norm.append(weighted_sobolev_norm(f0, config.stopping_norm))
    theta.append(1.0)
    failure = None
    completed = True
    try:
        for n in range(config.n_steps):
            eulerian.step(state, config.plan)
            if (n + 1) % config.cadence == 0 or n + 1 == config.n_steps:
                row = state.log[-1]
                times.append(row.t)
                mass.append(row.mass)
                l2.append(row.L2)
                norm.append(row.Hs0m0_norm)
                theta.append(row.theta_R)
    except FloatingPointError as exc:
        failure = str(exc)
        completed = False
    record = RunRecord(
        realization=realization,
        times=np.array(times),
        mass=np.array(mass),
        l2=np.array(l2),
        norm=np.array(norm),
        theta=np.array(theta),
        stopping_times={},
        completed=completed,
        failure=failure,
        log=state.log,
    )
    record.stopping_times = detect_stopping(record, config.stopping_levels)
    return record


def run_ensemble(
    f0: DistributionField,
    config: EnsembleConfig,
    noise_spec: NoiseSpec | None = None,
    max_workers: int | None = None,
) -> EnsembleSummary:
    """M independent realizations; results merged in realization-id order."""
    basis = table = None
    if noise_spec is not None:
        basis = build_basis(noise_spec)
        table = coloring(noise_spec, basis)

    ids = list(range(config.realizations))
    if max_workers is None or max_workers <= 1 or config.realizations == 1:
        records = [_run_one(i, f0, config, noise_spec, basis, table) for i in ids]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = [
                pool.submit(_run_one, i, f0, config, noise_spec, basis, table)
                for i in ids
            ]
            records = [fut.result() for fut in futures]

    failures = [
        {"realization": r.realization, "message": r.failure}
        for r in records
        if not r.completed
    ]
    moments = {}
    ok = [r for r in records if r.completed]
    if ok:
        moments = moment_summary(ok, (2, 4))
    quantiles = _stopping_quantiles(records, config.stopping_levels)
    return EnsembleSummary(
        records=records, failures=failures, moments=moments, stopping_quantiles=quantiles
    )


def detect_stopping(record: RunRecord, levels) -> dict:
    """First norm crossing per level on the cadence grid; +inf if never."""
    out = {}
    for level in levels:
        hit = np.nonzero(record.norm > level)[0]
        out[float(level)] = float(record.times[hit[0]]) if hit.size else float("inf")
    return out


def _stopping_quantiles(records, levels) -> dict:
    out = {}
    for level in levels:
        taus = np.array([r.stopping_times[float(level)] for r in records])
        finite = taus[np.isfinite(taus)]
        out[float(level)] = {
            "fraction_crossed": float(np.mean(np.isfinite(taus))),
            "median": float(np.median(finite)) if finite.size else None,
            "q10": float(np.quantile(finite, 0.1)) if finite.size else None,
            "q90": float(np.quantile(finite, 0.9)) if finite.size else None,
        }
    return out


def moment_summary(records, p_list, n_boot: int = 400, boot_seed: int = 0) -> dict:
    """Empirical mean of sup_t norm^p per p, with bootstrap confidence bands."""
    if not records:
        raise ValueError("no completed records to summarize")
    sups = np.array([float(np.max(r.norm)) for r in records])
    rng = np.random.default_rng(boot_seed)
    out = {}
    for p in p_list:
        vals = sups**p
        mean = float(np.mean(vals))
        if len(vals) >= 2:
            boots = np.array(
                [
                    np.mean(rng.choice(vals, size=len(vals), replace=True))
                    for _ in range(n_boot)
                ]
            )
            lo, hi = np.quantile(boots, [0.025, 0.975])
        else:
            lo = hi = mean
        out[int(p)] = {
            "mean": mean,
            "ci_low": float(lo),
            "ci_high": float(hi),
            "max": float(np.max(vals)),
        }
    return out


def write_summary_json(path: str | Path, summary: EnsembleSummary):
    doc = {
        "realizations": len(summary.records),
        "failures": summary.failures,
        "moments": summary.moments,
        "stopping_quantiles": {
            str(k): v for k, v in summary.stopping_quantiles.items()
        },
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
