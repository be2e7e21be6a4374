"""Grid, norm, mollifier, cutoff, regularizer, and snapshot tests.

Oracle values marked with their closed forms: the Gaussian integrals
int exp(-v^2) dv = sqrt(pi) and int v^2 exp(-v^2) dv = sqrt(pi)/2 give
exact norms for Maxwellian-type fields on a periodic box wide enough that
the truncated tails are below round-off.
"""
import math

import numpy as np
import pytest

from svpfp.phase_space import (
    CutoffSpec,
    DistributionField,
    GridSpec,
    WeightedNormSpec,
    bump_transform,
    cutoff_theta,
    density,
    l2_norm,
    mass_outside_fraction,
    mollifier_multiplier,
    mollify,
    load_snapshot,
    regularize_initial,
    save_snapshot,
    smooth_step,
    spectral_derivative,
    total_mass,
    weighted_sobolev_norm,
)


def grid1(N_x=32, N_v=64, V_max=8.0):
    return GridSpec(d=1, N_x=N_x, N_v=N_v, V_max=V_max)


def maxwellian_field(g):
    vals = np.exp(-g.v_magnitude_sq() / 2.0)
    return DistributionField(g, np.broadcast_to(vals, g.shape).copy())


class TestGridSpec:
    def test_axis_lengths(self):
        g = grid1()
        assert len(g.x) == 32 and len(g.v) == 64
        assert g.x[0] == 0.0 and g.v[0] == -8.0
        assert math.isclose(g.dx * g.N_x, 2.0 * math.pi)

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            GridSpec(d=1, N_x=24, N_v=64, V_max=6.0)
        with pytest.raises(ValueError):
            GridSpec(d=1, N_x=32, N_v=4, V_max=6.0)
        with pytest.raises(ValueError):
            GridSpec(d=4, N_x=32, N_v=32, V_max=6.0)
        with pytest.raises(ValueError):
            GridSpec(d=1, N_x=32, N_v=64, V_max=-1.0)

    def test_wavenumbers(self):
        g = grid1()
        assert g.kx[1] == 1.0 and g.kx[-1] == -1.0
        assert g.kx_deriv[g.N_x // 2] == 0.0
        # velocity wavenumbers have period pi/V_max spacing
        assert math.isclose(g.kv[1], math.pi / g.V_max)


class TestNorms:
    def test_l2_maxwellian(self):
        # ||e^{-v^2/2}||_{L^2}^2 = 2 pi * sqrt(pi)
        g = grid1()
        f = maxwellian_field(g)
        expected = 2.0 * math.pi * math.sqrt(math.pi)
        assert abs(l2_norm(f) ** 2 - expected) < 1e-12 * expected

    def test_h1_single_mode(self):
        # f = cos(x) e^{-v^2/2}: ||f||^2 = ||d_x f||^2 = pi sqrt(pi),
        # ||d_v f||^2 = pi sqrt(pi)/2, so the H^1 square is 2.5 pi sqrt(pi)
        g = grid1()
        vals = np.cos(g.x)[:, None] * np.exp(-(g.v**2) / 2.0)[None, :]
        f = DistributionField(g, vals)
        expected = 2.5 * math.pi * math.sqrt(math.pi)
        got = weighted_sobolev_norm(f, WeightedNormSpec(1, 0)) ** 2
        assert abs(got - expected) < 1e-10 * expected

    def test_weighted_l2(self):
        # m=2 weight: integral (1+v^2) e^{-v^2} dv = 1.5 sqrt(pi)
        g = grid1()
        f = maxwellian_field(g)
        expected = 2.0 * math.pi * 1.5 * math.sqrt(math.pi)
        got = weighted_sobolev_norm(f, WeightedNormSpec(0, 2)) ** 2
        assert abs(got - expected) < 1e-12 * expected

    def test_spectral_derivative_exact_mode(self):
        g = grid1()
        vals = np.sin(3 * g.x)[:, None] * np.exp(-(g.v**2) / 2.0)[None, :]
        f = DistributionField(g, vals)
        der = spectral_derivative(f, (1,), (0,))
        expected = 3 * np.cos(3 * g.x)[:, None] * np.exp(-(g.v**2) / 2.0)[None, :]
        assert np.max(np.abs(der - expected)) < 1e-11

    def test_sigma_bound(self):
        g = grid1(N_v=8)
        f = DistributionField(g, np.zeros(g.shape))
        with pytest.raises(ValueError):
            weighted_sobolev_norm(f, WeightedNormSpec(3, 0))


class TestDensity:
    def test_mass_and_density(self):
        g = grid1()
        f = maxwellian_field(g)
        rho = density(f)
        assert rho.shape == (g.N_x,)
        assert abs(total_mass(f) - np.sum(rho) * g.dx) < 1e-13

    def test_mass_outside(self):
        g = grid1()
        f = maxwellian_field(g)
        # Gaussian mass above |v| = 4 is ~ erfc(4/sqrt(2)) ~ 6.3e-5
        frac = mass_outside_fraction(f)
        assert 1e-6 < frac < 1e-3
        assert mass_outside_fraction(f, radius=20.0) == 0.0


class TestMollifier:
    def test_transform_normalization(self):
        out = bump_transform(np.array([0.0]))
        assert abs(out[0] - 1.0) < 1e-12

    def test_transform_bounded(self):
        xi = np.linspace(-50, 50, 301)
        out = bump_transform(xi)
        assert np.all(np.abs(out) <= 1.0 + 1e-12)

    def test_mass_preserved(self):
        g = grid1()
        rng = np.random.default_rng(0)
        f = DistributionField(g, rng.standard_normal(g.shape))
        fm = mollify(f, 0.3)
        assert abs(total_mass(fm) - total_mass(f)) < 1e-12 * abs(total_mass(f)) + 1e-14

    def test_smooths(self):
        g = grid1()
        rng = np.random.default_rng(1)
        f = DistributionField(g, rng.standard_normal(g.shape))
        fm = mollify(f, 0.5)
        rough = weighted_sobolev_norm(f, WeightedNormSpec(1, 0))
        smooth = weighted_sobolev_norm(fm, WeightedNormSpec(1, 0))
        assert smooth < rough

    def test_multiplier_shape(self):
        g = GridSpec(d=2, N_x=16, N_v=16, V_max=6.0)
        mult = mollifier_multiplier(g, 0.2)
        assert mult.shape == (16, 16)


class TestCutoff:
    def test_plateaus(self):
        spec = CutoffSpec(R=2.0)
        assert cutoff_theta(0.0, spec) == 1.0
        assert cutoff_theta(2.0, spec) == 1.0
        assert cutoff_theta(4.0, spec) == 0.0
        assert cutoff_theta(100.0, spec) == 0.0

    def test_monotone(self):
        spec = CutoffSpec(R=1.5)
        x = np.linspace(0.0, 5.0, 400)
        y = cutoff_theta(x, spec)
        assert np.all(np.diff(y) <= 1e-15)

    def test_slope_bound(self):
        # |theta'| <= 2/R, checked by dense finite differences
        for R in (0.5, 1.0, 3.0):
            x = np.linspace(0.0, 3.0 * R, 20001)
            y = cutoff_theta(x, CutoffSpec(R=R))
            slopes = np.abs(np.diff(y) / np.diff(x))
            assert np.max(slopes) <= 2.0 / R + 1e-6

    def test_smooth_step_range(self):
        u = np.linspace(-1, 2, 301)
        s = smooth_step(u)
        assert np.all((s >= 0) & (s <= 1))
        assert s[0] == 0.0 and s[-1] == 1.0

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            cutoff_theta(-1.0, CutoffSpec(R=1.0))


class TestRegularizer:
    def test_identity_limit(self):
        # band-limited data: R^n f -> f as n grows, and n ||R^n f - f||
        # strictly decreases along n = 4, 8, 16, 32
        g = grid1(N_x=32, N_v=128, V_max=8.0)
        vals = (1 + 0.3 * np.cos(2 * g.x))[:, None] * np.exp(-(g.v**2) / 2.0)[None, :]
        f = DistributionField(g, vals)
        norm = WeightedNormSpec(1, 2)
        seq = []
        for n in (4, 8, 16, 32):
            rn = regularize_initial(f, n)
            diff = DistributionField(g, rn.values - f.values)
            seq.append(n * weighted_sobolev_norm(diff, norm))
        assert all(b < a for a, b in zip(seq, seq[1:]))

    def test_uniform_boundedness(self):
        # ||R^n f|| / ||f|| stable across n (max/min ratio <= 2) on a fixed
        # representable field; rough data would be stripped by R^1 and the
        # ratio would measure the data, not the operators
        g = grid1(N_x=32, N_v=128, V_max=8.0)
        vals = (1 + 0.3 * np.cos(2 * g.x))[:, None] * np.exp(-(g.v**2) / 2.0)[None, :]
        f = DistributionField(g, vals)
        norm = WeightedNormSpec(1, 2)
        base = weighted_sobolev_norm(f, norm)
        ratios = []
        for n in range(1, 33):
            rn = regularize_initial(f, n)
            ratios.append(weighted_sobolev_norm(rn, norm) / base)
        assert max(ratios) / min(ratios) <= 2.0

    def test_cutoff_warning(self):
        g = grid1(V_max=4.0)
        f = maxwellian_field(g)
        with pytest.warns(UserWarning):
            regularize_initial(f, 3)


class TestSnapshots:
    def test_round_trip(self, tmp_path):
        g = grid1()
        rng = np.random.default_rng(5)
        f = DistributionField(g, rng.standard_normal(g.shape), time=0.75)
        save_snapshot(f, tmp_path / "snap")
        back = load_snapshot(tmp_path / "snap")
        assert back.grid == g
        assert back.time == 0.75
        assert np.array_equal(back.values, f.values)

    def test_rejects_wrong_kind(self, tmp_path):
        (tmp_path / "bad.json").write_text('{"kind": "something_else"}')
        with pytest.raises(ValueError):
            load_snapshot(tmp_path / "bad")
