"""Ensemble orchestration tests: determinism, scheduling, stopping, moments."""
import math

import numpy as np
import pytest

from svpfp import eulerian
from svpfp.ensemble import (
    EnsembleConfig,
    RunRecord,
    detect_stopping,
    moment_summary,
    run_ensemble,
    write_summary_json,
)
from svpfp.eulerian import StepPlan
from svpfp.noise import NoisePath, NoiseSpec, build_basis, coloring
from svpfp.phase_space import DistributionField, GridSpec, WeightedNormSpec


def grid1(N_x=16, N_v=32):
    return GridSpec(d=1, N_x=N_x, N_v=N_v, V_max=8.0)


def maxwellian(g, perturbation=0.0):
    M = np.exp(-g.v_magnitude_sq() / 2.0) / math.sqrt(2.0 * math.pi)
    prof = 1.0 + perturbation * np.cos(g.x)
    return DistributionField(g, prof[:, None] * M[None, :])


def small_config(realizations=3, n_steps=10):
    plan = StepPlan(dt=0.01, norm_spec=WeightedNormSpec(2, 2))
    return EnsembleConfig(
        realizations=realizations, base_seed=42, plan=plan, n_steps=n_steps
    )


class TestValidation:
    def test_bad_parameters(self):
        plan = StepPlan(dt=0.01)
        with pytest.raises(ValueError):
            EnsembleConfig(realizations=0, base_seed=0, plan=plan, n_steps=5)
        with pytest.raises(ValueError):
            EnsembleConfig(realizations=1, base_seed=0, plan=plan, n_steps=0)
        with pytest.raises(ValueError):
            EnsembleConfig(realizations=1, base_seed=0, plan=plan, n_steps=5, cadence=0)


class TestDeterminism:
    def test_single_realization_matches_direct_run(self):
        # realization 0 reproduces a direct solver run on the same keyed path
        g = grid1()
        f0 = maxwellian(g, perturbation=0.05)
        config = small_config(realizations=1)
        spec = NoiseSpec(dimension=1, max_wavenumber=2)
        summary = run_ensemble(f0, config, noise_spec=spec)
        basis = build_basis(spec)
        table = coloring(spec, basis)
        noise = NoisePath(seed=42, dt=0.01, n_steps=10, realization=0)
        direct = eulerian.run(f0, config.plan, 10, noise=noise, basis=basis, coloring=table)
        rec = summary.records[0]
        assert rec.completed
        assert np.array_equal(
            np.array([row.L2 for row in rec.log]),
            np.array([row.L2 for row in direct.log]),
        )

    def test_worker_count_independent(self):
        g = grid1()
        f0 = maxwellian(g, perturbation=0.05)
        spec = NoiseSpec(dimension=1, max_wavenumber=2)
        serial = run_ensemble(f0, small_config(), noise_spec=spec, max_workers=1)
        threaded = run_ensemble(f0, small_config(), noise_spec=spec, max_workers=3)
        for a, b in zip(serial.records, threaded.records):
            assert a.realization == b.realization
            assert np.array_equal(a.norm, b.norm)
            assert np.array_equal(a.l2, b.l2)

    def test_realizations_differ(self):
        g = grid1()
        f0 = maxwellian(g, perturbation=0.05)
        spec = NoiseSpec(dimension=1, max_wavenumber=2)
        summary = run_ensemble(f0, small_config(realizations=2), noise_spec=spec)
        a, b = summary.records
        assert not np.array_equal(a.l2[1:], b.l2[1:])

    def test_zero_coloring_collapses_realizations(self):
        # zero noise amplitude: every realization is the deterministic run
        g = grid1()
        f0 = maxwellian(g, perturbation=0.05)
        spec = NoiseSpec(dimension=1, max_wavenumber=2, coloring_law=("zero",))
        summary = run_ensemble(f0, small_config(realizations=3), noise_spec=spec)
        a, b, c = summary.records
        assert np.array_equal(a.l2, b.l2) and np.array_equal(b.l2, c.l2)


class TestStopping:
    def synthetic_record(self, norms, times=None):
        n = len(norms)
        t = np.arange(n, dtype=float) if times is None else np.asarray(times)
        z = np.zeros(n)
        return RunRecord(
            realization=0,
            times=t,
            mass=z,
            l2=z,
            norm=np.asarray(norms, dtype=float),
            theta=z,
            stopping_times={},
            completed=True,
        )

    def test_first_crossing(self):
        rec = self.synthetic_record([0.5, 1.5, 3.0, 5.0])
        out = detect_stopping(rec, (1.0, 2.0, 4.0, 8.0))
        assert out[1.0] == 1.0
        assert out[2.0] == 2.0
        assert out[4.0] == 3.0
        assert out[8.0] == float("inf")

    def test_never_crossing(self):
        rec = self.synthetic_record([0.1, 0.2, 0.3])
        out = detect_stopping(rec, (1.0,))
        assert out[1.0] == float("inf")

    def test_quantiles_in_summary(self):
        g = grid1()
        f0 = maxwellian(g, perturbation=0.05)
        config = small_config()
        spec = NoiseSpec(dimension=1, max_wavenumber=2)
        summary = run_ensemble(f0, config, noise_spec=spec)
        # the stopping norm of this data is far above level 1.0 from t=0
        q = summary.stopping_quantiles[1.0]
        assert q["fraction_crossed"] == 1.0
        assert q["median"] == 0.0


class TestMoments:
    def test_power_mean_inequality(self):
        # E[sup^2] <= sqrt(E[sup^4]) by Cauchy-Schwarz; the empirical
        # moments must respect it
        rng = np.random.default_rng(0)
        records = [
            TestStopping().synthetic_record(rng.uniform(0.5, 2.0, 5)) for _ in range(40)
        ]
        out = moment_summary(records, (2, 4))
        assert out[2]["mean"] <= math.sqrt(out[4]["mean"]) * (1 + 1e-12)

    def test_bootstrap_bands_contain_mean(self):
        rng = np.random.default_rng(1)
        records = [
            TestStopping().synthetic_record(rng.uniform(0.5, 2.0, 5)) for _ in range(40)
        ]
        out = moment_summary(records, (2,))
        assert out[2]["ci_low"] <= out[2]["mean"] <= out[2]["ci_high"]

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            moment_summary([], (2,))


class TestOutput:
    def test_summary_json(self, tmp_path):
        g = grid1()
        f0 = maxwellian(g, perturbation=0.05)
        spec = NoiseSpec(dimension=1, max_wavenumber=2)
        summary = run_ensemble(f0, small_config(realizations=2), noise_spec=spec)
        path = tmp_path / "summary.json"
        write_summary_json(path, summary)
        import json

        doc = json.loads(path.read_text())
        assert doc["realizations"] == 2
        assert doc["failures"] == []
        assert "2" in {str(k) for k in doc["moments"]}

    def test_partial_record_on_abort(self):
        # a run that blows up reports a partial record, not an exception
        g = grid1()
        # finite at t=0, but the first transform overflows to infinity
        f0 = DistributionField(g, np.full(g.shape, 1e308))
        plan = StepPlan(dt=0.01, field_mode="none", norm_spec=WeightedNormSpec(2, 2))
        config = EnsembleConfig(realizations=1, base_seed=0, plan=plan, n_steps=3)
        summary = run_ensemble(f0, config)
        assert not summary.records[0].completed
        assert len(summary.failures) == 1
