"""Deterministic limit flow: mobility algebra, equivalence, structure."""

import numpy as np
import pytest

import spherewave as sw
from spherewave.limit import LimitParams

RNG = np.random.default_rng(55)


@pytest.fixture(scope="module")
def grid():
    return sw.Grid1D(1.0, 127)


@pytest.fixture(scope="module")
def basis(grid):
    return sw.build_basis(grid, 16, 2.0)


@pytest.fixture(scope="module")
def params(grid, basis):
    return LimitParams.auto(grid, 0.25, basis=basis, n_out=128)


def random_field(grid, rng=RNG):
    return rng.standard_normal((grid.n, 3))


def smooth_perturbation(grid, rng):
    modes = [(k, d, rng.standard_normal()) for k in range(1, 9) for d in (1, 2, 3)]
    w = sw.field_from_modes(grid, modes)
    return w / sw.norm_l2(grid, w)


class TestMobility:
    def test_zero_kernel(self, grid):
        u, r = random_field(grid), random_field(grid)
        out = sw.mobility_apply_inverse(u, np.zeros(grid.n), 2.0, r)
        assert np.allclose(out, r / 2.0)

    def test_field_direction_eigenvalue(self, grid):
        # M u = gamma u, hence M^{-1} u = u / gamma, for any phi
        u = random_field(grid)
        phi = 10.0 * RNG.random(grid.n)
        out = sw.mobility_apply_inverse(u, phi, 3.0, u)
        assert np.abs(out - u / 3.0).max() <= 1e-13 * (1 + np.abs(u).max())

    def test_multiply_back(self, grid):
        for _ in range(100):
            u, r = random_field(grid), random_field(grid)
            phi = 10.0 * RNG.random(grid.n)
            gamma = 0.5 + 2.0 * RNG.random()
            x = sw.mobility_apply_inverse(u, phi, gamma, r)
            uu = np.einsum("ij,ij->i", u, u)[:, None]
            ux = np.einsum("ij,ij->i", u, x)[:, None]
            back = (gamma + 0.5 * phi[:, None] * uu) * x - 0.5 * phi[:, None] * ux * u
            assert np.abs(back - r).max() <= 1e-13 * (1 + np.abs(r).max())


class TestLimitRhs:
    def test_eigenfield_equilibrium(self, grid, basis, params):
        # zero up to node-coordinate roundoff amplified by the stencil
        for k in (1, 2, 5):
            u = sw.normalize_sphere(grid, sw.sine_field(grid, k, 1))
            rhs = sw.limit_rhs(u, basis, params)
            assert sw.norm_l2(grid, rhs) <= 2e-15 / grid.h ** 2

    def test_parabolic_flag_matches_zero_kernel(self, grid):
        silent = sw.build_basis(grid, 0, 2.0)
        pa = LimitParams.auto(grid, 0.25, basis=silent, parabolic=False, n_out=128)
        pb = LimitParams.auto(grid, 0.25, basis=silent, parabolic=True, n_out=128)
        u = sw.normalize_sphere(grid, random_field(grid))
        a = sw.limit_rhs(u, silent, pa)
        b = sw.limit_rhs(u, silent, pb)
        assert np.array_equal(a, b)

    def test_zero_field_rejected(self, grid, basis, params):
        with pytest.raises(sw.DegenerateFieldError):
            sw.limit_rhs(sw.zero_field(grid), basis, params)

    def test_sphere_invariance_generator(self, grid, basis):
        # <u, du/dt> = |u|_{H1}^2 (|u|_H^2 - 1) / gamma, exactly in the algebra
        for gamma in (1.0, 2.5):
            p = LimitParams.auto(grid, 0.25, gamma=gamma, basis=basis, n_out=128)
            for _ in range(30):
                u = 0.7 * random_field(grid)
                lhs = sw.inner_l2(grid, u, sw.limit_rhs(u, basis, p))
                rhs = sw.h1_seminorm_sq(grid, u) * (sw.norm_l2_sq(grid, u) - 1.0) / gamma
                assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


class TestFormulationEquivalence:
    def test_mobility_velocity_cancels(self, grid, basis, params):
        for _ in range(100):
            u = sw.normalize_sphere(grid, random_field(grid))
            resid = sw.explicit_form_residual(u, sw.limit_rhs(u, basis, params), basis, params)
            assert resid <= 1e-10 * (1.0 + sw.h2_norm_sq(grid, u))

    def test_equilibrium_both_sides_vanish(self, grid, basis, params):
        u = sw.normalize_sphere(grid, sw.sine_field(grid, 2, 2))
        assert sw.explicit_form_residual(u, sw.zero_field(grid), basis, params) <= 1e-10

    def test_linear_in_velocity_perturbation(self, grid, basis, params):
        u = sw.normalize_sphere(grid, random_field(grid))
        ut = sw.limit_rhs(u, basis, params)
        w = sw.normalize_sphere(grid, random_field(grid))
        r1 = sw.explicit_form_residual(u, ut + 1e-3 * w, basis, params)
        r2 = sw.explicit_form_residual(u, ut + 2e-3 * w, basis, params)
        assert r2 == pytest.approx(2.0 * r1, rel=1e-6)


class TestSolveLimit:
    def test_eigenfield_is_stationary(self, grid, basis):
        u0 = sw.normalize_sphere(grid, sw.sine_field(grid, 1, 3))
        p = LimitParams.auto(grid, 1.0, basis=basis, n_out=128)
        traj = sw.solve_limit(u0, p, basis, stride=p.n_steps // 128)
        assert np.abs(traj.u_fields[-1] - u0).max() <= 1e-10
        assert traj.ut_h.max() <= 1e-10

    def test_sphere_residual_small_and_energy_inequality(self, grid, basis):
        u0 = sw.normalize_sphere(grid, sw.sine_field(grid, 1, 1)
                                 + sw.sine_field(grid, 2, 2, 0.1))
        p = LimitParams.auto(grid, 0.5, basis=basis, n_out=128)
        traj = sw.solve_limit(u0, p, basis, stride=p.n_steps // 128, keep_fields=False)
        assert traj.sphere_residual.max() <= 1e-5
        assert np.all(traj.energy_lhs <= traj.energy_rhs * (1.0 + 1e-6))

    def test_h1_norm_nonincreasing(self, grid, basis):
        u0 = sw.normalize_sphere(grid, sw.sine_field(grid, 1, 1)
                                 + sw.sine_field(grid, 3, 2, 0.2))
        p = LimitParams.auto(grid, 0.5, basis=basis, n_out=128)
        traj = sw.solve_limit(u0, p, basis, stride=p.n_steps // 128, keep_fields=False)
        h1_sq = traj.u_h1 ** 2
        assert np.all(np.diff(h1_sq) <= 1e-8 * h1_sq[0])

    def test_renormalize_option(self, grid, basis):
        u0 = sw.normalize_sphere(grid, sw.sine_field(grid, 1, 1)
                                 + sw.sine_field(grid, 2, 2, 0.1))
        p = LimitParams.auto(grid, 0.1, basis=basis, renormalize=True, n_out=64)
        traj = sw.solve_limit(u0, p, basis, stride=p.n_steps // 64, keep_fields=False)
        assert traj.sphere_residual.max() <= 1e-13

    def test_rough_initial_data_rejected(self, grid, basis):
        rough = random_field(grid)
        p = LimitParams.auto(grid, 0.1, basis=basis, n_out=64, h2_cap=10.0)
        with pytest.raises(sw.ParameterError):
            sw.solve_limit(rough, p, basis)

    def test_stability_guard(self, grid, basis):
        bound = LimitParams.stability_bound(grid, 1.0, float(basis.phi.max()), 1.0)
        with pytest.raises(sw.ParameterError):
            LimitParams(grid=grid, dt=3.0 * bound, T=1.0,
                        phi_max=float(basis.phi.max()))


class TestComparison:
    def test_identical_initial_data(self, grid, basis, params):
        u0 = sw.normalize_sphere(grid, sw.sine_field(grid, 1, 1)
                                 + sw.sine_field(grid, 2, 2, 0.1))
        comp = sw.comparison_experiment(u0, u0, params, basis,
                                        stride=params.n_steps // 32)
        assert np.all(comp.lhs == 0.0)
        assert np.isnan(comp.c1) and np.isnan(comp.c2)

    def test_epsilon_homogeneity_and_c2_stability(self, grid, basis):
        u10 = sw.normalize_sphere(grid, sw.sine_field(grid, 1, 1)
                                  + sw.sine_field(grid, 2, 2, 0.1))
        w = smooth_perturbation(grid, np.random.default_rng(3))
        p = LimitParams.auto(grid, 0.25, basis=basis, n_out=64)
        results = {}
        for eps in (1e-2, 1e-3):
            u20 = sw.normalize_sphere(grid, u10 + eps * w)
            results[eps] = sw.comparison_experiment(u10, u20, p, basis,
                                                    stride=p.n_steps // 64)
        a = results[1e-2].lhs / results[1e-2].initial_dist_h1_sq
        b = results[1e-3].lhs / results[1e-3].initial_dist_h1_sq
        assert np.abs(a - b).max() <= 0.1 * a.max()
        c2a, c2b = results[1e-2].c2, results[1e-3].c2
        assert abs(c2a - c2b) <= 0.2 * abs(c2a)
