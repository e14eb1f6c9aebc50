"""Grid, quadrature, difference operators, spectrum, and vector algebra."""

import numpy as np
import pytest

import spherewave as sw
from spherewave.fields import HelmholtzSolver, forward_diff, midpoint_average

RNG = np.random.default_rng(1234)


@pytest.fixture(scope="module")
def grid():
    return sw.Grid1D(1.0, 127)


def random_field(grid, rng=RNG):
    return rng.standard_normal((grid.n, 3))


def dense_second_difference(grid):
    n, h = grid.n, grid.h
    a = np.zeros((n, n))
    idx = np.arange(n)
    a[idx, idx] = -2.0
    a[idx[:-1], idx[:-1] + 1] = 1.0
    a[idx[1:], idx[1:] - 1] = 1.0
    return a / h ** 2


class TestGrid:
    def test_spacing_identity(self, grid):
        assert grid.h * (grid.n + 1) == pytest.approx(grid.L, abs=1e-16)

    def test_nodes_interior(self, grid):
        assert grid.x[0] > 0.0 and grid.x[-1] < grid.L

    def test_bad_parameters(self):
        with pytest.raises(sw.ParameterError):
            sw.Grid1D(-1.0, 16)
        with pytest.raises(sw.ParameterError):
            sw.Grid1D(1.0, 1)


class TestInnerProduct:
    def test_zero_field(self, grid):
        z = sw.zero_field(grid)
        assert sw.inner_l2(grid, z, z) == 0.0

    def test_normalized_first_mode(self, grid):
        # discrete sine orthogonality makes the trapezoid rule exact here
        f = sw.sine_field(grid, 1, 1, np.sqrt(2.0 / grid.L))
        assert sw.inner_l2(grid, f, f) == pytest.approx(1.0, abs=1e-12)

    def test_pointwise_orthogonal_components(self, grid):
        f = sw.sine_field(grid, 2, 1)
        g = sw.sine_field(grid, 2, 2)
        assert sw.inner_l2(grid, f, g) == 0.0

    def test_grid_mismatch(self, grid):
        other = sw.Grid1D(1.0, 63)
        with pytest.raises(sw.ShapeError):
            sw.inner_l2(grid, sw.zero_field(grid), sw.zero_field(other))

    def test_symmetry_and_bilinearity(self, grid):
        for _ in range(25):
            f, g, w = (random_field(grid) for _ in range(3))
            a, b = RNG.standard_normal(2)
            assert sw.inner_l2(grid, f, g) == pytest.approx(sw.inner_l2(grid, g, f), rel=1e-13)
            lhs = sw.inner_l2(grid, a * f + b * g, w)
            rhs = a * sw.inner_l2(grid, f, w) + b * sw.inner_l2(grid, g, w)
            assert lhs == pytest.approx(rhs, rel=1e-11, abs=1e-12)


class TestLaplacian:
    def test_zero(self, grid):
        assert np.all(sw.laplacian(grid, sw.zero_field(grid)) == 0.0)

    def test_matches_dense_matrix(self, grid):
        a = dense_second_difference(grid)
        f = random_field(grid)
        expected = a @ f
        assert np.abs(sw.laplacian(grid, f) - expected).max() <= 1e-10

    def test_every_sine_mode_is_eigenvector(self, grid):
        for k in range(1, grid.n + 1):
            f = sw.sine_field(grid, k, 1 + k % 3)
            lam = sw.eigenvalue(grid, k)
            defect = sw.laplacian(grid, f) + lam * f
            assert np.abs(defect).max() <= 1e-12 * lam

    def test_linear_field_interior(self, grid):
        # f = x is linear and vanishes at x = 0, so the stencil is exact
        # everywhere except the node next to the right boundary, where the
        # Dirichlet extension by zero breaks linearity
        f = sw.zero_field(grid)
        f[:, 0] = grid.x
        lap = sw.laplacian(grid, f)
        assert np.abs(lap[:-1]).max() <= 1e-10
        assert lap[-1, 0] == pytest.approx(-grid.L / grid.h ** 2, rel=1e-12)

    def test_self_adjoint(self, grid):
        for _ in range(25):
            f, g = random_field(grid), random_field(grid)
            left = sw.inner_l2(grid, -sw.laplacian(grid, f), g)
            right = sw.inner_l2(grid, f, -sw.laplacian(grid, g))
            assert left == pytest.approx(right, rel=1e-12, abs=1e-13)


class TestH1Seminorm:
    def test_zero(self, grid):
        assert sw.h1_seminorm_sq(grid, sw.zero_field(grid)) == 0.0

    def test_eigenfield_value(self, grid):
        for k in (1, 5, 40):
            f = sw.sine_field(grid, k, 1, 0.7)
            lam = sw.eigenvalue(grid, k)
            expected = lam * sw.norm_l2_sq(grid, f)
            assert sw.h1_seminorm_sq(grid, f) == pytest.approx(expected, rel=1e-13)

    def test_continuum_limit_first_mode(self):
        # lambda_{h,1} -> (pi/L)^2 with O(h^2) defect
        for n in (63, 127, 255):
            grid = sw.Grid1D(1.0, n)
            f = sw.sine_field(grid, 1, 1, np.sqrt(2.0 / grid.L))
            target = (np.pi / grid.L) ** 2
            defect = abs(sw.h1_seminorm_sq(grid, f) - target)
            assert defect <= 1.1 * target * (np.pi * grid.h / grid.L) ** 2 / 12.0

    def test_summation_by_parts_gradient_form(self, grid):
        # <-A f, f> equals h * sum over midpoints of |Df|^2 exactly
        f = random_field(grid)
        df = forward_diff(grid, f)
        grad_form = grid.h * np.einsum("ij,ij->", df, df)
        assert sw.h1_seminorm_sq(grid, f) == pytest.approx(grad_form, rel=1e-12)


class TestSpectrum:
    def test_roundtrip(self, grid):
        f = random_field(grid)
        back = sw.inverse_sine_transform(sw.sine_transform(grid, f))
        assert np.abs(back - f).max() <= 1e-12 * np.abs(f).max()

    def test_single_mode_coefficient(self, grid):
        spec = sw.sine_transform(grid, sw.sine_field(grid, 3, 2, 0.25))
        assert spec.coeffs[2, 1] == pytest.approx(0.25, rel=1e-12)
        mask = np.ones_like(spec.coeffs, dtype=bool)
        mask[2, 1] = False
        assert np.abs(spec.coeffs[mask]).max() <= 1e-13


class TestSobolevNorm:
    def test_zero_any_order(self, grid):
        for delta in (0.0, 0.7, 2.0):
            assert sw.sobolev_norm(grid, sw.zero_field(grid), delta) == 0.0

    def test_parseval_normalized_mode(self, grid):
        f = sw.sine_field(grid, 4, 3, np.sqrt(2.0 / grid.L))
        assert sw.sobolev_norm(grid, f, 0.0) == pytest.approx(1.0, rel=1e-12)

    def test_matches_l2_and_h1(self, grid):
        for _ in range(10):
            f = random_field(grid)
            assert sw.sobolev_norm(grid, f, 0.0) == pytest.approx(
                sw.norm_l2(grid, f), rel=1e-10)
            assert sw.sobolev_norm(grid, f, 1.0) == pytest.approx(
                np.sqrt(sw.h1_seminorm_sq(grid, f)), rel=1e-10)

    def test_order_two_is_h2(self, grid):
        f = random_field(grid)
        assert sw.sobolev_norm(grid, f, 2.0) == pytest.approx(
            np.sqrt(sw.h2_norm_sq(grid, f)), rel=1e-10)

    def test_out_of_range(self, grid):
        with pytest.raises(sw.ParameterError):
            sw.sobolev_norm(grid, sw.zero_field(grid), 2.5)


class TestTripleCross:
    def test_unit_axes(self):
        out = sw.triple_cross(np.array([1.0, 0, 0]), np.array([0.0, 1.0, 0]))
        assert np.allclose(out, [0.0, -1.0, 0.0], atol=1e-15)

    def test_parallel_annihilates(self):
        h = np.array([0.3, -1.2, 2.0])
        assert np.abs(sw.triple_cross(h, 4.5 * h)).max() <= 1e-13

    def test_thousand_random_pairs(self):
        h = RNG.standard_normal((1000, 3))
        k = RNG.standard_normal((1000, 3))
        direct = np.cross(h, np.cross(h, k))
        assert np.abs(sw.triple_cross(h, k) - direct).max() <= 1e-13


class TestTangentProjection:
    def test_project_self_is_zero(self, grid):
        u = random_field(grid)
        assert np.abs(sw.project_tangent(grid, u, u)).max() <= 1e-13 * np.abs(u).max()

    def test_tangent_vector_unchanged(self, grid):
        u = random_field(grid)
        w = sw.project_tangent(grid, u, random_field(grid))
        again = sw.project_tangent(grid, u, w)
        assert np.abs(again - w).max() <= 1e-12 * (1.0 + np.abs(w).max())

    def test_recovers_orthogonal_part(self, grid):
        u = random_field(grid)
        v0 = random_field(grid)
        # Gram-Schmidt oracle: w is orthogonal to u by construction
        w = v0 - (sw.inner_l2(grid, u, v0) / sw.norm_l2_sq(grid, u)) * u
        out = sw.project_tangent(grid, u, u + w)
        assert np.abs(out - w).max() <= 1e-11 * (1.0 + np.abs(w).max())

    def test_orthogonality_scaled(self, grid):
        for _ in range(20):
            u, v = random_field(grid), random_field(grid)
            out = sw.project_tangent(grid, u, v)
            bound = 1e-12 * sw.norm_l2(grid, u) * sw.norm_l2(grid, v)
            assert abs(sw.inner_l2(grid, u, out)) <= bound

    def test_zero_direction_rejected(self, grid):
        with pytest.raises(sw.DegenerateFieldError):
            sw.project_tangent(grid, sw.zero_field(grid), random_field(grid))


class TestNormalization:
    def test_unit_field_unchanged(self, grid):
        u = sw.normalize_sphere(grid, random_field(grid))
        assert np.abs(sw.normalize_sphere(grid, u) - u).max() <= 1e-14

    def test_scale_invariance(self, grid):
        u = random_field(grid)
        a = sw.normalize_sphere(grid, u)
        b = sw.normalize_sphere(grid, 7.0 * u)
        assert np.abs(a - b).max() <= 1e-14

    def test_first_mode_coefficient(self, grid):
        u = sw.normalize_sphere(grid, sw.sine_field(grid, 1, 1))
        expected = np.sqrt(2.0 / grid.L) * np.sin(np.pi * grid.x / grid.L)
        assert np.abs(u[:, 0] - expected).max() <= 1e-12

    def test_zero_rejected(self, grid):
        with pytest.raises(sw.DegenerateFieldError):
            sw.normalize_sphere(grid, sw.zero_field(grid))


class TestStaggeredOperators:
    def test_forward_diff_of_linear_profile(self, grid):
        f = sw.zero_field(grid)
        f[:, 1] = 2.0 * grid.x
        df = forward_diff(grid, f)
        # interior cells see slope 2; the boundary cells see the Dirichlet jump
        assert np.abs(df[1:-1, 1] - 2.0).max() <= 1e-10
        assert df[0, 1] == pytest.approx(2.0, rel=1e-12)

    def test_midpoint_average_endpoints(self, grid):
        f = random_field(grid)
        fm = midpoint_average(grid, f)
        assert np.allclose(fm[0], 0.5 * f[0])
        assert np.allclose(fm[-1], 0.5 * f[-1])

    def test_helmholtz_solver_vs_dense(self, grid):
        c0, c2 = 1.7, 3e-4
        solver = HelmholtzSolver(grid, c0, c2)
        b = random_field(grid)
        dense = c0 * np.eye(grid.n) - c2 * dense_second_difference(grid)
        expected = np.linalg.solve(dense, b)
        assert np.abs(solver.solve(b) - expected).max() <= 1e-11
