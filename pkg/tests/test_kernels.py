"""Deposition/gather kernel tests and cross-backend equality."""
import math

import numpy as np
import pytest

from svpfp import kernels


def have_cython():
    try:
        kernels.get_backend("cython")
        return True
    except ImportError:
        return False


class TestDeposit:
    def test_conserves_total_weight(self):
        rng = np.random.default_rng(0)
        for d in (1, 2, 3):
            X = rng.uniform(0, 2 * math.pi, size=(500, d))
            w = rng.uniform(0.1, 1.0, size=500)
            grid = kernels.deposit_cic(X, w, 16, 2 * math.pi)
            assert abs(np.sum(grid) - np.sum(w)) < 1e-12 * np.sum(w)

    def test_particle_on_node(self):
        h = 2 * math.pi / 8
        grid = kernels.deposit_cic(np.array([[3 * h]]), np.array([2.0]), 8, 2 * math.pi)
        assert grid[3] == 2.0 and np.sum(np.abs(grid)) == 2.0

    def test_particle_at_midpoint(self):
        h = 2 * math.pi / 8
        grid = kernels.deposit_cic(np.array([[3.5 * h]]), np.array([1.0]), 8, 2 * math.pi)
        assert abs(grid[3] - 0.5) < 1e-12 and abs(grid[4] - 0.5) < 1e-12

    def test_periodic_wrap(self):
        # a particle just below the right edge splits onto the last and
        # first nodes
        h = 2 * math.pi / 8
        grid = kernels.deposit_cic(
            np.array([[2 * math.pi - 0.25 * h]]), np.array([1.0]), 8, 2 * math.pi
        )
        assert abs(grid[7] - 0.25) < 1e-12 and abs(grid[0] - 0.75) < 1e-12


class TestGather:
    def test_exact_at_nodes(self):
        rng = np.random.default_rng(1)
        field = rng.standard_normal((8, 8))
        h = 2 * math.pi / 8
        pts = np.array([[2 * h, 5 * h], [0.0, 7 * h]])
        out = kernels.gather_linear(field, pts, 2 * math.pi)
        assert out[0] == field[2, 5] and out[1] == field[0, 7]

    def test_midpoint_average(self):
        field = np.zeros(8)
        field[2], field[3] = 1.0, 3.0
        h = 2 * math.pi / 8
        out = kernels.gather_linear(field, np.array([[2.5 * h]]), 2 * math.pi)
        assert abs(out[0] - 2.0) < 1e-12

    def test_vector_field(self):
        rng = np.random.default_rng(2)
        field = rng.standard_normal((8, 2))
        pts = rng.uniform(0, 2 * math.pi, size=(20, 1))
        out = kernels.gather_linear(field, pts, 2 * math.pi)
        assert out.shape == (20, 2)
        for c in range(2):
            comp = kernels.gather_linear(field[:, c], pts, 2 * math.pi)
            assert np.array_equal(out[:, c], comp)

    def test_constant_field_exact(self):
        rng = np.random.default_rng(3)
        field = np.full((8, 8), 1.7)
        pts = rng.uniform(0, 2 * math.pi, size=(50, 2))
        out = kernels.gather_linear(field, pts, 2 * math.pi)
        assert np.max(np.abs(out - 1.7)) < 1e-12


@pytest.mark.skipif(not have_cython(), reason="compiled extension not built")
class TestBackendEquality:
    def test_deposit_bit_exact(self):
        pure = kernels.get_backend("pure")
        comp = kernels.get_backend("cython")
        rng = np.random.default_rng(4)
        for d in (1, 2, 3):
            X = rng.uniform(0, 2 * math.pi, size=(2000, d))
            w = rng.uniform(0.1, 1.0, size=2000)
            a = pure.deposit_cic(X, w, 16, 2 * math.pi)
            b = comp.deposit_cic(X, w, 16, 2 * math.pi)
            assert np.array_equal(a, b)

    def test_gather_bit_exact(self):
        pure = kernels.get_backend("pure")
        comp = kernels.get_backend("cython")
        rng = np.random.default_rng(5)
        for d in (1, 2, 3):
            field = rng.standard_normal((16,) * d)
            pts = rng.uniform(0, 2 * math.pi, size=(2000, d))
            a = pure.gather_linear(field, pts, 2 * math.pi)
            b = comp.gather_linear(field, pts, 2 * math.pi)
            assert np.array_equal(a, b)

    def test_active_backend_name(self):
        assert kernels.backend_name in ("pure", "cython")
