"""Riemannian geometry induced on densities by a semi-invariant metric.

Densities ``rho`` are positive fields; tangent vectors ``rho_dot`` have zero
integral.  A pressure potential ``p`` is defined up to constants and is
always returned with zero mean.  The density-space inertia operator acts
through its inverse

    Abar(rho)^{-1} p = -d(rho A(rho)^{-1}(rho dp)),

which is symmetric and positive on mean-zero functions, so ``Abar`` itself
is applied by conjugate gradients with one inertia solve per iteration.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dynamics import State, Trajectory, simulate
from .grid import Grid, check_density, check_tangent
from .inertia import InertiaSolver, ModelSpec, apply_A


class DensityGeometryError(ArithmeticError):
    pass


@dataclass(frozen=True)
class TangentDensity:
    """Density velocity: a field with zero integral."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", check_tangent(self.grid, self.values))


@dataclass(frozen=True)
class PressurePotential:
    """Potential modulo constants, stored with zero mean."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        self.grid.check(v)
        object.__setattr__(self, "values", v - self.grid.mean(v))


def _values(f):
    return f.values if isinstance(f, (TangentDensity, PressurePotential)) else np.asarray(f, dtype=float)


def _abar_inv(solver: InertiaSolver, grid: Grid, rho, p):
    return -grid.deriv(rho * solver(rho * grid.deriv(p, 1)), 1)


def apply_Abar_inv(model: ModelSpec, grid: Grid, rho, p, solver: InertiaSolver | None = None) -> np.ndarray:
    """Tangent density produced by the potential ``p``."""
    rho = check_density(grid, rho)
    p = _values(p)
    grid.check(p)
    if solver is None:
        solver = InertiaSolver(model, grid, rho)
    return _abar_inv(solver, grid, rho, p)


def _preconditioner(model: ModelSpec, grid: Grid, rho):
    # Abar^{-1} frozen at the mean density: symbol rho^2 kappa^2 / sum a_i kappa^{2i}
    rho_bar = float(grid.mean(rho))
    a_sym = sum(float(a(rho_bar)) * np.abs(grid.symbol(i)) ** 2
                for i, a in enumerate(model.coefficients.coeffs))
    sym = rho_bar ** 2 * grid.wavenumbers ** 2 / a_sym
    inv = np.zeros_like(sym)
    inv[1:] = 1.0 / sym[1:]

    def apply(r):
        return np.fft.irfft(np.fft.rfft(r) * inv, n=grid.n_points)

    return apply


def solve_Abar(model: ModelSpec, grid: Grid, rho, rho_dot, *, rtol: float = 1e-12,
               solver: InertiaSolver | None = None) -> np.ndarray:
    """Mean-zero potential ``p`` with ``apply_Abar_inv(p) = rho_dot``.

    Preconditioned CG restricted to mean-zero functions, at most ``20 n``
    iterations.
    """
    rho = check_density(grid, rho)
    rhs = check_tangent(grid, _values(rho_dot))
    rhs = rhs - grid.mean(rhs)
    if solver is None:
        solver = InertiaSolver(model, grid, rho)
    precond = _preconditioner(model, grid, rho)
    p = np.zeros(grid.n_points)
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return p
    r = rhs.copy()
    z = precond(r)
    d = z.copy()
    rz = r @ z
    for _ in range(20 * grid.n_points):
        kd = _abar_inv(solver, grid, rho, d)
        dkd = d @ kd
        if not dkd > 0:
            break
        alpha = rz / dkd
        p += alpha * d
        r -= alpha * kd
        r -= r.mean()
        if np.linalg.norm(r) <= rtol * bnorm:
            return p - p.mean()
        z = precond(r)
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
    raise DensityGeometryError("Abar solve failed")


def induced_metric(model: ModelSpec, grid: Grid, rho, rho_dot1, rho_dot2) -> float:
    """``integral of (Abar rho_dot1) rho_dot2``."""
    p = solve_Abar(model, grid, rho, rho_dot1)
    return float(grid.inner(p, check_tangent(grid, _values(rho_dot2))))


def horizontal_lift(model: ModelSpec, grid: Grid, rho, rho_dot) -> np.ndarray:
    """Velocity ``A^{-1}(rho dp)`` with ``-d(rho u) = rho_dot``, orthogonal to the fibre."""
    rho = check_density(grid, rho)
    solver = InertiaSolver(model, grid, rho)
    p = solve_Abar(model, grid, rho, rho_dot, solver=solver)
    return solver(rho * grid.deriv(p, 1))


def horizontality_defect(model: ModelSpec, grid: Grid, rho, u) -> float:
    """Normalized pairing of ``A(rho) u`` with the vertical direction ``1/rho``.

    Velocities ``c/rho`` move no mass, so ``u`` is horizontal exactly when
    ``integral of A(rho) u / rho`` vanishes.
    """
    rho = check_density(grid, rho)
    m = apply_A(model, grid, rho, u)
    scale = grid.norm(m) * grid.norm(1.0 / rho)
    if scale == 0.0:
        return 0.0
    return float(abs(grid.integrate(m / rho)) / scale)


@dataclass
class DensityPath:
    trajectory: Trajectory
    rhos: np.ndarray
    rho_dots: np.ndarray
    defects: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.trajectory.times


def density_geodesic(model: ModelSpec, grid: Grid, rho0, rho_dot0, t_end: float, dt: float,
                     **simulate_kwargs) -> DensityPath:
    """Geodesic on densities from its horizontal lift to the diffeomorphism group.

    Extra keyword arguments go to ``simulate``.  Each snapshot's
    diagnostics carry the horizontality defect of its velocity.
    """
    rho0 = check_density(grid, rho0)
    rho_dot0 = check_tangent(grid, _values(rho_dot0))
    u0 = horizontal_lift(model, grid, rho0, rho_dot0)
    traj = simulate(model, State(0.0, rho0, u0, grid), t_end, dt, **simulate_kwargs)
    defects = []
    for k, (state, rec) in enumerate(zip(traj.states, traj.diagnostics)):
        h = horizontality_defect(model, grid, state.rho, state.u)
        defects.append(h)
        traj.diagnostics[k] = replace(rec, horizontality_defect=h)
    rhos = np.array([s.rho for s in traj.states])
    rho_dots = np.array([-grid.deriv(s.rho * s.u, 1) for s in traj.states])
    return DensityPath(traj, rhos, rho_dots, np.array(defects))
