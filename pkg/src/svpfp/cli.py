"""Command-line entry point.

Subcommands: run (one realization), ensemble (Monte Carlo over noise
realizations), picard (frozen-field iteration report), hypo (energy trace
and smoothing-rate fit), convergence (dt-refinement table).  All output is
CSV/JSON plus the raw-f64 snapshot container; repeated invocation with the
same config and seed reproduces every file byte for byte.

Exit codes: 0 success, 2 configuration error, 3 numeric abort.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import config as cfg
from . import ensemble as ens
from . import eulerian, hypo, picard
from .config import ConfigError
from .noise import NoisePath, NoiseSpec, build_basis, coloring
from .phase_space import save_snapshot

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="svpfp", description=__doc__.split("\n")[1])
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("run", "ensemble", "picard", "hypo", "convergence"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="TOML config path")
        sp.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config entry (section.key=value); repeatable",
        )
        sp.add_argument("--output-dir", default=None, help="override output.dir")
        sp.add_argument("--seed", type=int, default=None, help="override noise.seed")
        sp.add_argument(
            "--threads", type=int, default=None, help="cap internal parallelism"
        )
    return p


def _load(args) -> dict:
    doc = cfg.load_config(args.config)
    doc = cfg.apply_overrides(doc, args.override)
    if args.output_dir is not None:
        doc["output"]["dir"] = args.output_dir
    if args.seed is not None:
        doc["noise"]["seed"] = args.seed
    return doc


def _noise_objects(doc: dict, grid_d: int, dt: float, n_steps: int):
    n = doc["noise"]
    if not n["enabled"] or n["coloring"] == "zero":
        return None, None, None
    law = (n["coloring"], n["coloring_param"]) if n["coloring"] != "zero" else ("zero",)
    spec = NoiseSpec(
        dimension=grid_d,
        max_wavenumber=n["max_wavenumber"],
        coloring_law=law,
        regularity_target=n["regularity_target"],
        amplitude=n["amplitude"],
    )
    basis = build_basis(spec)
    table = coloring(spec, basis)
    path = NoisePath(seed=n["seed"], dt=dt, n_steps=n_steps, realization=0)
    return path, basis, table


def _outdir(doc: dict) -> Path:
    out = Path(doc["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(doc: dict, threads: int | None) -> int:
    grid = cfg.build_grid(doc)
    plan = cfg.build_plan(doc)
    f0 = cfg.build_initial(doc, grid)
    n_steps = doc["solver"]["n_steps"]
    path, basis, table = _noise_objects(doc, grid.d, plan.dt, n_steps)
    out = _outdir(doc)
    prefix = doc["output"]["prefix"]
    snapshot_steps = set(int(s) for s in doc["output"]["snapshot_steps"])
    state = eulerian.SolverState(f=f0.copy(), noise=path, basis=basis, coloring=table)
    save_snapshot(f0, out / f"{prefix}_step000000")
    try:
        for n in range(n_steps):
            eulerian.step(state, plan)
            if (n + 1) in snapshot_steps:
                save_snapshot(state.f, out / f"{prefix}_step{n + 1:06d}")
    except FloatingPointError as exc:
        rescue = out / f"{prefix}_lastgood"
        save_snapshot(state.f, rescue)
        eulerian.write_step_log(out / f"{prefix}_steps.csv", state.log)
        print(f"numeric abort: {exc}; last good snapshot at {rescue}", file=sys.stderr)
        return EXIT_NUMERIC
    save_snapshot(state.f, out / f"{prefix}_final")
    eulerian.write_step_log(out / f"{prefix}_steps.csv", state.log)
    last = state.log[-1]
    print(
        f"run complete: t={last.t:.6g} mass={last.mass:.12g} L2={last.L2:.12g} "
        f"norm={last.Hs0m0_norm:.6g} theta={last.theta_R:.3g}"
    )
    return 0


def cmd_ensemble(doc: dict, threads: int | None) -> int:
    grid = cfg.build_grid(doc)
    plan = cfg.build_plan(doc)
    f0 = cfg.build_initial(doc, grid)
    e = doc["ensemble"]
    n = doc["noise"]
    noise_spec = None
    if n["enabled"]:
        noise_spec = NoiseSpec(
            dimension=grid.d,
            max_wavenumber=n["max_wavenumber"],
            coloring_law=(n["coloring"], n["coloring_param"])
            if n["coloring"] != "zero"
            else ("zero",),
            regularity_target=n["regularity_target"],
            amplitude=n["amplitude"],
        )
    config = ens.EnsembleConfig(
        realizations=e["realizations"],
        base_seed=n["seed"],
        plan=plan,
        n_steps=doc["solver"]["n_steps"],
        cadence=e["cadence"],
        stopping_levels=tuple(float(x) for x in e["stopping_levels"]),
    )
    try:
        summary = ens.run_ensemble(f0, config, noise_spec, max_workers=threads)
    except FloatingPointError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out = _outdir(doc)
    prefix = doc["output"]["prefix"]
    ens.write_summary_json(out / f"{prefix}_ensemble.json", summary)
    for record in summary.records:
        eulerian.write_step_log(
            out / f"{prefix}_r{record.realization:03d}.csv", record.log
        )
    print(
        f"ensemble complete: {config.realizations} realizations, "
        f"{len(summary.failures)} failures"
    )
    return 0


def cmd_picard(doc: dict, threads: int | None) -> int:
    grid = cfg.build_grid(doc)
    f0 = cfg.build_initial(doc, grid)
    p = doc["picard"]
    pc = picard.PicardConfig(
        j_max=p["j_max"],
        R=p["R"],
        epsilon=p["epsilon"],
        T=p["T"],
        dt=p["dt"],
        nu=p["nu"],
        backend=p["backend"],
        delta=p["delta"],
    )
    path, basis, table = _noise_objects(doc, grid.d, pc.dt, pc.n_steps)
    try:
        _, report = picard.run_iteration(f0, pc, path, basis, table)
    except FloatingPointError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out = _outdir(doc)
    prefix = doc["output"]["prefix"]
    picard.write_picard_csv(out / f"{prefix}_picard.csv", report)
    if report.degenerate:
        print("picard: degenerate fit (all differences at round-off)")
    else:
        print(
            f"picard: {len(report.diffs)} differences, K0={report.K0:.6g}, "
            f"cauchy={report.cauchy_flag}"
        )
    return 0


def cmd_hypo(doc: dict, threads: int | None) -> int:
    h = doc["hypo"]
    coeffs = hypo.choose_constants(h["epsilon"])
    slack = coeffs.inequality_slack()
    result = hypo.rate_experiment(
        nu=h["nu"],
        t_min=h["t_min"],
        t_max=h["t_max"],
        n_samples=h["n_samples"],
        steps_per_interval=h["steps_per_interval"],
        seed=h["seed"],
        k_min=h["k_min"],
        k_max=h["k_max"],
        n_modes=h["n_modes"],
        N_v=h["N_v"],
        V_max=h["V_max"],
    )
    out = _outdir(doc)
    prefix = doc["output"]["prefix"]
    hypo.write_energy_csv(out / f"{prefix}_energy.csv", result["trace"])
    doc_out = {
        "constants": {
            "epsilon": coeffs.epsilon,
            "theta": coeffs.theta,
            "a": coeffs.a,
            "b": coeffs.b,
            "c": coeffs.c,
            "admissible": coeffs.admissible(),
            "slack": slack,
        },
        "gradx_slope": result["gradx_slope"],
        "gradv_slope": result["gradv_slope"],
        "gradx_residual": result["gradx_residual"],
        "gradv_residual": result["gradv_residual"],
        "sup_E_sigma": result["sup_E_sigma"],
        "initial_norm_sq": result["initial_norm_sq"],
    }
    (out / f"{prefix}_hypo.json").write_text(json.dumps(doc_out, indent=2) + "\n")
    print(
        f"hypo: gradx slope {result['gradx_slope']:.4f}, "
        f"gradv slope {result['gradv_slope']:.4f}, "
        f"constants admissible: {coeffs.admissible()}"
    )
    return 0


def cmd_convergence(doc: dict, threads: int | None) -> int:
    """dt-refinement of the deterministic transport step against the exact shift."""
    grid = cfg.build_grid(doc)
    f0 = cfg.build_initial(doc, grid)
    c = doc["convergence"]
    t_final = c["t_final"]
    rows = []
    for level in range(c["dt_levels"]):
        n_steps = 2 ** (level + 3)
        dt = t_final / n_steps
        f = f0.copy()
        for _ in range(n_steps):
            f = eulerian.substep_transport_x(f, dt)
        exact = eulerian.substep_transport_x(f0, t_final)
        err = float(np.sqrt(np.mean((f.values - exact.values) ** 2)))
        rows.append((n_steps, dt, err))
    out = _outdir(doc)
    prefix = doc["output"]["prefix"]
    import csv as _csv

    floor = 1e-13
    with open(out / f"{prefix}_convergence.csv", "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(("n_steps", "dt", "rms_error", "note"))
        for n_steps, dt, err in rows:
            writer.writerow(
                [n_steps, repr(dt), repr(err), "exact" if err < floor else ""]
            )
    errs = np.array([r[2] for r in rows])
    if np.all(errs < floor):
        print("convergence: transport exact at machine floor (spectral)")
    else:
        dts = np.array([r[1] for r in rows])
        mask = errs > floor
        slope = np.polyfit(np.log(dts[mask]), np.log(errs[mask]), 1)[0]
        print(f"convergence: fitted order {slope:.3f}")
    return 0


_COMMANDS = {
    "run": cmd_run,
    "ensemble": cmd_ensemble,
    "picard": cmd_picard,
    "hypo": cmd_hypo,
    "convergence": cmd_convergence,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        doc = _load(args)
        return _COMMANDS[args.command](doc, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
