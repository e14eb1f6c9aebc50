"""Self-contained invariant suite behind the `check` subcommand.

Every structural identity the library relies on is exercised once, at small
fixed sizes, with deterministic seeds: the algebraic oracles (triple cross,
trace summation, mobility inverse, formulation equivalence), the quadrature
and spectrum identities, the noise statistics, and two short dynamic runs
(energy identity, tangent residuals).  `correction_scale` is forwarded to
the dynamic runs so a deliberately flipped Ito correction demonstrates that
the energy-identity check detects it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import (
    Grid1D,
    cross,
    eigenvalue,
    h1_seminorm_sq,
    inner_l2,
    inverse_sine_transform,
    laplacian,
    norm_l2,
    norm_l2_sq,
    normalize_sphere,
    project_tangent,
    sine_field,
    sine_transform,
    sobolev_norm,
    triple_cross,
    zero_field,
)
from .limit import LimitParams, explicit_form_residual, limit_rhs, mobility_apply_inverse
from .noise import apply_noise, build_basis, derive_stream, sample_increment, strat_correction
from .spde import SpdeParams, SpdeStepper, State, functional_j, simulate

__all__ = ["CheckResult", "run_all", "CHECK_NAMES"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _random_field(grid: Grid1D, rng: np.random.Generator) -> np.ndarray:
    return rng.standard_normal((grid.n, 3))


def _grid() -> Grid1D:
    return Grid1D(1.0, 63)


def _check_quadrature(rng) -> CheckResult:
    grid = _grid()
    worst = 0.0
    for _ in range(50):
        f, g, w = (_random_field(grid, rng) for _ in range(3))
        a, b = rng.standard_normal(2)
        sym = abs(inner_l2(grid, f, g) - inner_l2(grid, g, f))
        lin = abs(inner_l2(grid, a * f + b * g, w)
                  - a * inner_l2(grid, f, w) - b * inner_l2(grid, g, w))
        scale = 1.0 + norm_l2(grid, f) * norm_l2(grid, g) + norm_l2(grid, w)
        worst = max(worst, sym / scale, lin / scale)
    return CheckResult("quadrature-bilinearity", worst <= 1e-13, f"max residual {worst:.2e}")


def _check_adjointness(rng) -> CheckResult:
    grid = _grid()
    worst = 0.0
    for _ in range(50):
        f, g = _random_field(grid, rng), _random_field(grid, rng)
        left = inner_l2(grid, -laplacian(grid, f), g)
        right = inner_l2(grid, f, -laplacian(grid, g))
        worst = max(worst, abs(left - right) / (1.0 + abs(left)))
    return CheckResult("summation-by-parts-adjointness", worst <= 1e-12,
                       f"max relative defect {worst:.2e}")


def _check_eigenvectors(rng) -> CheckResult:
    grid = _grid()
    worst = 0.0
    for k in range(1, grid.n + 1):
        f = sine_field(grid, k, 1 + (k % 3))
        defect = laplacian(grid, f) + eigenvalue(grid, k) * f
        worst = max(worst, float(np.abs(defect).max()) / eigenvalue(grid, k))
    return CheckResult("laplacian-eigenvectors", worst <= 1e-12,
                       f"max scaled defect over all modes {worst:.2e}")


def _check_triple_cross(rng) -> CheckResult:
    h = rng.standard_normal((1000, 3))
    k = rng.standard_normal((1000, 3))
    err = float(np.abs(triple_cross(h, k) - np.cross(h, np.cross(h, k))).max())
    return CheckResult("triple-cross-identity", err <= 1e-13, f"max error {err:.2e}")


def _check_spectrum_roundtrip(rng) -> CheckResult:
    grid = _grid()
    f = _random_field(grid, rng)
    back = inverse_sine_transform(sine_transform(grid, f))
    err = float(np.abs(back - f).max() / np.abs(f).max())
    return CheckResult("sine-spectrum-roundtrip", err <= 1e-12, f"relative error {err:.2e}")


def _check_sobolev(rng) -> CheckResult:
    grid = _grid()
    worst = 0.0
    for _ in range(20):
        f = _random_field(grid, rng)
        l2 = abs(sobolev_norm(grid, f, 0.0) - norm_l2(grid, f)) / norm_l2(grid, f)
        h1 = np.sqrt(h1_seminorm_sq(grid, f))
        h1_err = abs(sobolev_norm(grid, f, 1.0) - h1) / h1
        worst = max(worst, l2, h1_err)
    return CheckResult("sobolev-norm-consistency", worst <= 1e-10,
                       f"max relative gap {worst:.2e}")


def _check_projection(rng) -> CheckResult:
    grid = _grid()
    worst = 0.0
    for _ in range(50):
        u, v = _random_field(grid, rng), _random_field(grid, rng)
        w = project_tangent(grid, u, v)
        scale = norm_l2(grid, u) * norm_l2(grid, v)
        worst = max(worst, abs(inner_l2(grid, u, w)) / scale,
                    norm_l2(grid, project_tangent(grid, u, w) - w) / (1.0 + norm_l2(grid, v)))
    return CheckResult("tangent-projection", worst <= 1e-12,
                       f"max orthogonality/idempotence defect {worst:.2e}")


def _check_normalization(rng) -> CheckResult:
    grid = _grid()
    worst = 0.0
    for _ in range(20):
        u = _random_field(grid, rng)
        worst = max(worst, abs(norm_l2(grid, normalize_sphere(grid, u)) - 1.0),
                    float(np.abs(normalize_sphere(grid, 7.0 * u)
                                 - normalize_sphere(grid, u)).max()))
    return CheckResult("sphere-normalization", worst <= 1e-13, f"max defect {worst:.2e}")


def _check_trace_oracle(rng) -> CheckResult:
    grid = _grid()
    basis = build_basis(grid, 12, 2.0)
    worst = 0.0
    for _ in range(100):
        u, v = _random_field(grid, rng), _random_field(grid, rng)
        direct = zero_field(grid)
        for i in range(basis.m):
            xi = basis.xi[i][:, None]
            direct += cross(u, cross(u, v) * xi) * xi
        fast = strat_correction(u, v, basis)
        worst = max(worst, float(np.abs(fast - direct).max() / (1.0 + np.abs(fast).max())))
    return CheckResult("trace-oracle-equivalence", worst <= 1e-12,
                       f"max relative gap over 100 pairs {worst:.2e}")


def _check_energy_neutrality(rng) -> CheckResult:
    grid = _grid()
    basis = build_basis(grid, 12, 2.0)
    worst = 0.0
    for _ in range(50):
        u, v = _random_field(grid, rng), _random_field(grid, rng)
        uxv = cross(u, v)
        lhs = np.einsum("ij,ij->i", uxv, uxv) * basis.phi
        rhs = np.einsum("ij,ij->i", v, strat_correction(u, v, basis))
        scale = 1.0 + np.abs(lhs).max()
        worst = max(worst, float(np.abs(lhs + rhs).max() / scale))
    return CheckResult("noise-energy-neutrality", worst <= 1e-12,
                       f"max pointwise defect {worst:.2e}")


def _check_noise_orthogonality(rng) -> CheckResult:
    grid = _grid()
    basis = build_basis(grid, 12, 2.0)
    worst = 0.0
    for _ in range(20):
        u, v = _random_field(grid, rng), _random_field(grid, rng)
        dw = sample_increment(basis, 1e-3, rng)
        kick = apply_noise(u, v, basis, dw)
        scale = 1.0 + float(np.abs(kick).max())
        worst = max(worst,
                    float(np.abs(np.einsum("ij,ij->i", u, kick)).max() / scale),
                    float(np.abs(np.einsum("ij,ij->i", v, kick)).max() / scale))
    return CheckResult("noise-orthogonality", worst <= 1e-12,
                       f"max pointwise component {worst:.2e}")


def _check_phi_monotone(rng) -> CheckResult:
    grid = _grid()
    phis = [build_basis(grid, m, 2.0).phi for m in (1, 2, 4, 8, 16)]
    ok = all(np.all(b >= a - 1e-15) for a, b in zip(phis, phis[1:]))
    return CheckResult("phi-monotone-in-modes", ok, "phi nondecreasing in mode count")


def _check_increments(rng) -> CheckResult:
    grid = _grid()
    basis = build_basis(grid, 4, 2.0)
    dt = 2.5e-3
    s1 = derive_stream(99, 0, 1)
    s2 = derive_stream(99, 0, 1)
    same = np.array_equal(sample_increment(basis, dt, s1).values,
                          sample_increment(basis, dt, s2).values)
    draws = derive_stream(99, 0, 2).standard_normal(100_000) * np.sqrt(dt)
    mean_ok = abs(draws.mean()) <= 4.0 * np.sqrt(dt / len(draws))
    var_ok = abs(draws.var() / dt - 1.0) <= 0.05
    a = derive_stream(99, 1, 0).standard_normal(10_000)
    b = derive_stream(99, 2, 0).standard_normal(10_000)
    corr_ok = abs(np.corrcoef(a, b)[0, 1]) < 0.05
    passed = same and mean_ok and var_ok and corr_ok
    return CheckResult("increment-determinism", passed,
                       f"replay={same}, mean-in-4sigma={mean_ok}, var-within-5%={var_ok}, "
                       f"cross-stream-corr<0.05={corr_ok}")


def _check_mobility(rng) -> CheckResult:
    grid = _grid()
    worst = 0.0
    for _ in range(100):
        u, r = _random_field(grid, rng), _random_field(grid, rng)
        phi = 10.0 * rng.random(grid.n)
        gamma = 0.5 + 2.0 * rng.random()
        x = mobility_apply_inverse(u, phi, gamma, r)
        uu = np.einsum("ij,ij->i", u, u)[:, None]
        ux = np.einsum("ij,ij->i", u, x)[:, None]
        back = (gamma + 0.5 * phi[:, None] * uu) * x - 0.5 * phi[:, None] * ux * u
        worst = max(worst, float(np.abs(back - r).max() / (1.0 + np.abs(r).max())))
    return CheckResult("mobility-inverse", worst <= 1e-13,
                       f"max multiply-back error over 100 draws {worst:.2e}")


def _check_formulation(rng) -> CheckResult:
    grid = _grid()
    basis = build_basis(grid, 12, 2.0)
    params = LimitParams.auto(grid, 0.1, basis=basis)
    worst = 0.0
    for _ in range(100):
        u = normalize_sphere(grid, _random_field(grid, rng))
        resid = explicit_form_residual(u, limit_rhs(u, basis, params), basis, params)
        scale = 1.0 + norm_l2_sq(grid, laplacian(grid, u))
        worst = max(worst, resid / scale)
    return CheckResult("formulation-equivalence", worst <= 1e-10,
                       f"max scaled residual over 100 sphere fields {worst:.2e}")


def _check_sphere_generator(rng) -> CheckResult:
    grid = _grid()
    basis = build_basis(grid, 12, 2.0)
    worst = 0.0
    for gamma in (1.0, 2.5):
        params = LimitParams.auto(grid, 0.1, gamma=gamma, basis=basis)
        for _ in range(50):
            u = _random_field(grid, rng) * 0.5
            lhs = inner_l2(grid, u, limit_rhs(u, basis, params))
            rhs = h1_seminorm_sq(grid, u) * (norm_l2_sq(grid, u) - 1.0) / gamma
            worst = max(worst, abs(lhs - rhs) / (1.0 + abs(rhs)))
    return CheckResult("sphere-invariance-generator", worst <= 1e-10,
                       f"max relative defect {worst:.2e}")


def _check_j_two_paths(rng) -> CheckResult:
    grid = _grid()
    basis = build_basis(grid, 12, 2.0)
    worst = 0.0
    for _ in range(50):
        u, v = _random_field(grid, rng), _random_field(grid, rng)
        a = functional_j(u, v, basis, form="definition")
        b = functional_j(u, v, basis, form="expanded")
        worst = max(worst, abs(a - b) / (1.0 + abs(a)))
    return CheckResult("j-functional-two-paths", worst <= 1e-10,
                       f"max relative gap {worst:.2e}")


def _check_equilibrium(rng, correction_scale: float) -> CheckResult:
    grid = _grid()
    basis = build_basis(grid, 8, 2.0)
    u0 = normalize_sphere(grid, sine_field(grid, 3, 2))
    params = SpdeParams(grid=grid, mu=0.1, dt=1e-4, T=1e-3,
                        correction_scale=correction_scale)
    state = State.initial(grid, u0, zero_field(grid))
    stepper = SpdeStepper(params, basis)
    stepper.bind(state)
    drift_sup = 0.0
    for _ in range(10):
        w = np.sqrt(params.dt) * rng.standard_normal(basis.m)
        stepper.step(state, w)
        drift_sup = max(drift_sup, float(np.abs(state.u - u0).max()),
                        float(np.abs(state.v).max()))
    lp = LimitParams.auto(grid, 0.1, basis=basis)
    from .limit import _Rk4Flow
    flow = _Rk4Flow(u0, lp, basis)
    limit_drift = 0.0
    for _ in range(10):
        prev = flow.u.copy()
        flow.advance()
        limit_drift = max(limit_drift, float(np.abs(flow.u - prev).max()))
    passed = drift_sup <= 1e-12 and limit_drift <= 1e-12
    return CheckResult("equilibrium-fixed-point", passed,
                       f"stepper drift {drift_sup:.2e}, limit per-step drift {limit_drift:.2e}")


def _dynamic_run(rng, correction_scale: float):
    # gamma = 5 keeps the transverse constraint amplification e^{s t} mild,
    # so the correct correction passes cleanly and a flipped sign fails loudly
    grid = _grid()
    basis = build_basis(grid, 8, 2.0)
    u0 = normalize_sphere(grid, sine_field(grid, 1, 1) + sine_field(grid, 2, 2, 0.2))
    params = SpdeParams(grid=grid, mu=0.1, dt=1e-4, T=0.25, gamma=5.0,
                        correction_scale=correction_scale)
    return simulate(u0, zero_field(grid), params, basis, rng=rng, stride=50)


def _check_energy_identity(rng, correction_scale: float) -> CheckResult:
    traj = _dynamic_run(rng, correction_scale)
    drift = float(np.abs(traj.energy - traj.energy[0]).max() / traj.energy[0])
    return CheckResult("energy-identity", drift <= 2e-3,
                       f"relative energy drift {drift:.2e} (tolerance 2e-3)")


def _check_constraint_drift(rng, correction_scale: float) -> CheckResult:
    traj = _dynamic_run(rng, correction_scale)
    sup = float((np.abs(traj.theta) + np.abs(traj.eta)).max())
    return CheckResult("constraint-residual-drift", sup <= 2e-3,
                       f"sup |theta|+|eta| = {sup:.2e} (tolerance 2e-3)")


CHECK_NAMES = (
    "quadrature-bilinearity",
    "summation-by-parts-adjointness",
    "laplacian-eigenvectors",
    "triple-cross-identity",
    "sine-spectrum-roundtrip",
    "sobolev-norm-consistency",
    "tangent-projection",
    "sphere-normalization",
    "trace-oracle-equivalence",
    "noise-energy-neutrality",
    "noise-orthogonality",
    "phi-monotone-in-modes",
    "increment-determinism",
    "mobility-inverse",
    "formulation-equivalence",
    "sphere-invariance-generator",
    "j-functional-two-paths",
    "equilibrium-fixed-point",
    "energy-identity",
    "constraint-residual-drift",
)


def run_all(correction_scale: float = 1.0) -> list[CheckResult]:
    """Run every invariant check once, in the order of CHECK_NAMES."""
    rng = np.random.default_rng(20240811)
    results = [
        _check_quadrature(rng),
        _check_adjointness(rng),
        _check_eigenvectors(rng),
        _check_triple_cross(rng),
        _check_spectrum_roundtrip(rng),
        _check_sobolev(rng),
        _check_projection(rng),
        _check_normalization(rng),
        _check_trace_oracle(rng),
        _check_energy_neutrality(rng),
        _check_noise_orthogonality(rng),
        _check_phi_monotone(rng),
        _check_increments(rng),
        _check_mobility(rng),
        _check_formulation(rng),
        _check_sphere_generator(rng),
        _check_j_two_paths(rng),
        _check_equilibrium(rng, correction_scale),
        _check_energy_identity(rng, correction_scale),
        _check_constraint_drift(rng, correction_scale),
    ]
    assert [r.name for r in results] == list(CHECK_NAMES)
    return results
