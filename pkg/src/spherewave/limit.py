"""Deterministic limit flow on the unit sphere, in both formulations.

The evolution is integrated in the mobility form

    gamma du/dt = A_h u + |u|_{H1}^2 u + (1/2) phi u x (u x du/dt),

solved pointwise for du/dt through the exact Sherman-Morrison inverse of
M = (gamma + phi |u|^2 / 2) I - (phi/2) u u^T (note M u = gamma u).  The
divergence form

    d/dt [ (gamma + phi |u|^2 / 2) u ]
        = A_h u + |u|_{H1}^2 u + (3 phi / 2 gamma)([A_h u + |u|_{H1}^2 u].u) u

is kept as a residual oracle: substituting du/dt from the mobility form
makes it vanish identically, by the same algebra that proves the two
formulations equivalent.  The parabolic variant drops every phi term.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import numpy as np

from .errors import BlowUpError, DegenerateFieldError, ParameterError
from .fields import (
    Grid1D,
    h1_seminorm_sq,
    inner_l2,
    laplacian,
    norm_l2,
    norm_l2_sq,
    normalize_sphere,
)
from .noise import NoiseBasis

__all__ = [
    "LimitParams",
    "LimitTrajectory",
    "ComparisonResult",
    "mobility_apply_inverse",
    "limit_rhs",
    "explicit_form_residual",
    "solve_limit",
    "comparison_experiment",
]


@dataclass(frozen=True)
class LimitParams:
    """Parameters of the deterministic solver.

    The explicit RK4 step obeys dt <= theta * h^2 * gamma / (2 (gamma +
    max(phi)/2)); phi_max must therefore be the sup of the kernel the solver
    will actually see (0 in parabolic mode).
    """

    grid: Grid1D
    dt: float
    T: float
    gamma: float = 1.0
    parabolic: bool = False
    renormalize: bool = False
    phi_max: float = 0.0
    theta: float = 0.9
    h2_cap: float = 1.0e6

    def __post_init__(self):
        if self.gamma <= 0.0:
            raise ParameterError(f"friction must be positive, got {self.gamma}")
        if self.dt <= 0.0 or self.T <= 0.0:
            raise ParameterError("time step and horizon must be positive")
        if not 0.0 < self.theta <= 1.0:
            raise ParameterError(f"safety factor must lie in (0, 1], got {self.theta}")
        bound = self.stability_bound(self.grid, self.gamma, self.phi_max, self.theta)
        if self.dt > bound * (1.0 + 1e-12):
            raise ParameterError(
                f"dt={self.dt} violates the diffusive stability bound {bound:.3e}")

    @staticmethod
    def stability_bound(grid: Grid1D, gamma: float, phi_max: float, theta: float = 1.0) -> float:
        return theta * grid.h ** 2 * gamma / (2.0 * (gamma + 0.5 * phi_max))

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.T / self.dt)))

    @classmethod
    def auto(cls, grid: Grid1D, T: float, *, gamma: float = 1.0,
             basis: NoiseBasis | None = None, parabolic: bool = False,
             renormalize: bool = False, theta: float = 0.9,
             n_out: int = 256, h2_cap: float = 1.0e6) -> "LimitParams":
        phi_max = 0.0 if (parabolic or basis is None or basis.m == 0) else float(basis.phi.max())
        dt_max = cls.stability_bound(grid, gamma, phi_max, theta)
        n_steps = ceil(T / dt_max)
        n_steps = ((n_steps + n_out - 1) // n_out) * n_out
        return cls(grid=grid, dt=T / n_steps, T=T, gamma=gamma, parabolic=parabolic,
                   renormalize=renormalize, phi_max=phi_max, theta=theta, h2_cap=h2_cap)


def mobility_apply_inverse(u: np.ndarray, phi, gamma: float, r: np.ndarray) -> np.ndarray:
    """Solve [(gamma + phi|u|^2/2) I - (phi/2) u u^T] x = r per node.

    Uses the closed form M^{-1} = (1/a)[I + (phi/2 gamma) u u^T] with
    a = gamma + phi |u|^2 / 2, valid for every gamma > 0 and phi >= 0.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 1:
        phi = phi[:, None]
    uu = np.einsum("ij,ij->i", u, u)[:, None]
    ur = np.einsum("ij,ij->i", u, r)[:, None]
    a = gamma + 0.5 * phi * uu
    return (r + (phi / (2.0 * gamma)) * ur * u) / a


def limit_rhs(u: np.ndarray, basis: NoiseBasis, params: LimitParams) -> np.ndarray:
    """du/dt for the limit flow (or its parabolic variant)."""
    rhs, _, _ = _rhs_with_extras(u, basis, params)
    return rhs


def _rhs_with_extras(u: np.ndarray, basis: NoiseBasis, params: LimitParams):
    grid = params.grid
    if norm_l2_sq(grid, u) <= 0.0:
        raise DegenerateFieldError("limit dynamics are undefined for the zero field")
    lap = laplacian(grid, u)
    h1 = -inner_l2(grid, lap, u)
    r = lap + h1 * u
    if params.parabolic:
        return r / params.gamma, lap, h1
    return mobility_apply_inverse(u, basis.phi, params.gamma, r), lap, h1


def explicit_form_residual(u: np.ndarray, ut: np.ndarray, basis: NoiseBasis,
                           params: LimitParams) -> float:
    """H-norm residual of the divergence form, with d/dt expanded via ut.

    Zero (to roundoff) exactly when ut is the mobility-form velocity of u;
    linear in perturbations of ut.
    """
    grid = params.grid
    lap = laplacian(grid, u)
    h1 = -inner_l2(grid, lap, u)
    r = lap + h1 * u
    phi = np.zeros(grid.n) if params.parabolic else basis.phi
    uu = np.einsum("ij,ij->i", u, u)
    u_ut = np.einsum("ij,ij->i", u, ut)
    lhs = (params.gamma + 0.5 * phi * uu)[:, None] * ut + (phi * u_ut)[:, None] * u
    ru = np.einsum("ij,ij->i", r, u)
    rhs = r + (1.5 / params.gamma) * (phi * ru)[:, None] * u
    return norm_l2(grid, lhs - rhs)


def _repair_initial(grid: Grid1D, u0: np.ndarray, cap: float) -> np.ndarray:
    u0 = normalize_sphere(grid, u0)
    h2 = np.sqrt(norm_l2_sq(grid, laplacian(grid, u0)))
    if h2 > cap:
        raise ParameterError(
            f"initial field is too rough: |A_h u0|_H = {h2:.3e} exceeds the cap {cap:.3e}")
    return u0


class _Rk4Flow:
    """Classical RK4 on the limit flow, carrying the velocity of the current state."""

    def __init__(self, u0: np.ndarray, params: LimitParams, basis: NoiseBasis):
        self.params = params
        self.basis = basis
        self.u = _repair_initial(params.grid, u0, params.h2_cap)
        self.ut, self.lap, self.h1 = _rhs_with_extras(self.u, basis, params)
        self.ut_sq = norm_l2_sq(params.grid, self.ut)
        self.int_ut_sq = 0.0
        self.steps = 0

    def advance(self) -> None:
        params, basis = self.params, self.basis
        dt, grid = params.dt, params.grid
        u = self.u
        k1 = self.ut
        k2 = limit_rhs(u + 0.5 * dt * k1, basis, params)
        k3 = limit_rhs(u + 0.5 * dt * k2, basis, params)
        k4 = limit_rhs(u + dt * k3, basis, params)
        u_new = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if params.renormalize:
            u_new = normalize_sphere(grid, u_new)
        if not np.isfinite(u_new).all():
            raise BlowUpError(self.steps + 1)
        ut_new, lap_new, h1_new = _rhs_with_extras(u_new, basis, params)
        ut_sq_new = norm_l2_sq(grid, ut_new)
        self.int_ut_sq += 0.5 * dt * (self.ut_sq + ut_sq_new)
        self.u, self.ut, self.lap, self.h1 = u_new, ut_new, lap_new, h1_new
        self.ut_sq = ut_sq_new
        self.steps += 1


@dataclass
class LimitTrajectory:
    """Strided samples of the limit flow and its structural diagnostics."""

    params: LimitParams
    t: np.ndarray
    u_h1: np.ndarray
    u_h2: np.ndarray
    ut_h: np.ndarray
    sphere_residual: np.ndarray
    int_ut_sq: np.ndarray
    energy_lhs: np.ndarray
    energy_rhs: float
    u_fields: np.ndarray | None = None
    ut_fields: np.ndarray | None = None


def solve_limit(u0: np.ndarray, params: LimitParams, basis: NoiseBasis, *,
                stride: int = 1, keep_fields: bool = True) -> LimitTrajectory:
    """Run the limit flow to T, recording every `stride` steps plus the end."""
    if stride < 1:
        raise ParameterError(f"stride must be >= 1, got {stride}")
    grid = params.grid
    n_steps = params.n_steps
    rows = list(range(0, n_steps + 1, stride))
    if rows[-1] != n_steps:
        rows.append(n_steps)
    n_rows = len(rows)

    flow = _Rk4Flow(u0, params, basis)
    t = np.empty(n_rows)
    u_h1 = np.empty(n_rows)
    u_h2 = np.empty(n_rows)
    ut_h = np.empty(n_rows)
    sphere = np.empty(n_rows)
    int_ut = np.empty(n_rows)
    energy_lhs = np.empty(n_rows)
    u_fields = np.empty((n_rows, grid.n, 3)) if keep_fields else None
    ut_fields = np.empty((n_rows, grid.n, 3)) if keep_fields else None
    energy_rhs = float(flow.h1)

    def record(r: int):
        t[r] = flow.steps * params.dt
        u_h1[r] = np.sqrt(max(flow.h1, 0.0))
        u_h2[r] = np.sqrt(norm_l2_sq(grid, flow.lap))
        ut_h[r] = np.sqrt(flow.ut_sq)
        sphere[r] = abs(norm_l2(grid, flow.u) - 1.0)
        int_ut[r] = flow.int_ut_sq
        energy_lhs[r] = flow.h1 + 2.0 * params.gamma * flow.int_ut_sq
        if keep_fields:
            u_fields[r] = flow.u
            ut_fields[r] = flow.ut

    record(0)
    next_row = 1
    for k in range(1, n_steps + 1):
        flow.advance()
        if next_row < n_rows and rows[next_row] == k:
            record(next_row)
            next_row += 1

    return LimitTrajectory(params=params, t=t, u_h1=u_h1, u_h2=u_h2, ut_h=ut_h,
                           sphere_residual=sphere, int_ut_sq=int_ut,
                           energy_lhs=energy_lhs, energy_rhs=energy_rhs,
                           u_fields=u_fields, ut_fields=ut_fields)


@dataclass
class ComparisonResult:
    """Two-solution distance series and the fitted growth-bound constants."""

    t: np.ndarray
    dist_h1_sq: np.ndarray
    int_dv_sq: np.ndarray
    lhs: np.ndarray
    c1: float
    c2: float
    initial_dist_h1_sq: float


def comparison_experiment(u10: np.ndarray, u20: np.ndarray, params: LimitParams,
                          basis: NoiseBasis, *, stride: int = 1) -> ComparisonResult:
    """Evolve two initial fields and track |u1-u2|_{H1}^2 + int |v1-v2|_H^2.

    Fits log(LHS(t)) = log(c1 |du0|_{H1}^2) + c2 t by least squares; for
    identical initial data the series is identically zero and the fitted
    constants are NaN.
    """
    if stride < 1:
        raise ParameterError(f"stride must be >= 1, got {stride}")
    grid = params.grid
    n_steps = params.n_steps
    rows = list(range(0, n_steps + 1, stride))
    if rows[-1] != n_steps:
        rows.append(n_steps)
    n_rows = len(rows)

    f1 = _Rk4Flow(u10, params, basis)
    f2 = _Rk4Flow(u20, params, basis)
    t = np.empty(n_rows)
    dist = np.empty(n_rows)
    int_dv = np.empty(n_rows)

    def dv_sq() -> float:
        return norm_l2_sq(grid, f1.ut - f2.ut)

    acc = 0.0
    prev = dv_sq()
    t[0] = 0.0
    dist[0] = h1_seminorm_sq(grid, f1.u - f2.u)
    int_dv[0] = 0.0
    next_row = 1
    for k in range(1, n_steps + 1):
        f1.advance()
        f2.advance()
        cur = dv_sq()
        acc += 0.5 * params.dt * (prev + cur)
        prev = cur
        if next_row < n_rows and rows[next_row] == k:
            t[next_row] = k * params.dt
            dist[next_row] = h1_seminorm_sq(grid, f1.u - f2.u)
            int_dv[next_row] = acc
            next_row += 1

    lhs = dist + int_dv
    d0 = dist[0]
    if d0 > 0.0 and np.all(lhs > 0.0):
        slope, intercept = np.polyfit(t, np.log(lhs), 1)
        c2 = float(slope)
        c1 = float(np.exp(intercept) / d0)
    else:
        c1 = c2 = float("nan")
    return ComparisonResult(t=t, dist_h1_sq=dist, int_dv_sq=int_dv, lhs=lhs,
                            c1=c1, c2=c2, initial_dist_h1_sq=float(d0))
