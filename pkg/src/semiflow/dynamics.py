"""Time integration of the semi-invariant geodesic / Newton equations on the circle.

In one dimension the equations for density ``rho``, velocity ``u`` and
momentum ``m = A(rho) u`` read

    m_t = -u m_x - 2 u_x m + rho B_x,    rho_t = -(rho u)_x,

with ``B = 1/2 sum_i a_i'(rho) (d^i u)^2 - dV/drho``.  Stepping is Eulerian
and fixed-step RK4, either in ``(rho, m)`` (momentum form, one elliptic solve
per stage) or in ``(rho, u)`` (velocity form, the geodesic spray).
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicSpline

from .grid import Grid, check_density
from .inertia import (
    IndefiniteOperatorError,
    InertiaSolver,
    ModelSpec,
    RefreshingSolver,
    apply_A,
    apply_Aprime,
    aprime_star,
)
from .potential import InternalEnergy, PotentialSpec, Quadratic, Zero, potential_eval

log = logging.getLogger(__name__)

__all__ = [
    "InternalEnergy", "PotentialSpec", "Quadratic", "Zero", "potential_eval",
    "State", "DiagnosticsRecord", "Trajectory", "Termination", "GuardFailure",
    "FlowMap", "FlowError", "b_field", "rhs_momentum", "rhs_velocity", "rk4_step",
    "simulate", "spectral_tail", "energy", "reconstruct_flow", "pushforward_density",
]


class Termination(str, enum.Enum):
    COMPLETED = "completed"
    BLOWUP = "blowup_detected"
    DENSITY_FLOOR = "density_floor"


class GuardFailure(RuntimeError):
    def __init__(self, termination: Termination, detail: str):
        super().__init__(f"{termination.value}: {detail}")
        self.termination = termination


class FlowError(ValueError):
    pass


@dataclass(frozen=True)
class State:
    time: float
    rho: np.ndarray
    u: np.ndarray
    grid: Grid

    def __post_init__(self):
        check_density(self.grid, self.rho)
        self.grid.check(self.u)
        if not np.all(np.isfinite(self.u)):
            raise ValueError("velocity has non-finite values")

    def shifted(self, s: int) -> "State":
        """Rotate both fields by ``s`` lattice sites."""
        return replace(self, rho=np.roll(self.rho, s), u=np.roll(self.u, s))


@dataclass(frozen=True)
class DiagnosticsRecord:
    time: float
    energy: float
    mass: float
    min_rho: float
    max_abs_u: float
    horizontality_defect: float | None = None


@dataclass
class Trajectory:
    model: ModelSpec
    grid: Grid
    states: list[State] = field(default_factory=list)
    diagnostics: list[DiagnosticsRecord] = field(default_factory=list)
    termination: Termination = Termination.COMPLETED
    detail: str = ""

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.states])

    @property
    def final(self) -> State:
        return self.states[-1]

    def energy_drift(self) -> float:
        """Max relative energy change; absolute when the initial energy is zero."""
        e = np.array([d.energy for d in self.diagnostics])
        change = float(np.max(np.abs(e - e[0])))
        return change / abs(e[0]) if e[0] != 0 else change

    def mass_drift(self) -> float:
        mass = np.array([d.mass for d in self.diagnostics])
        return float(np.max(np.abs(mass - mass[0])) / abs(mass[0]))


# -- right-hand sides -------------------------------------------------------

def b_field(model: ModelSpec, grid: Grid, rho, u) -> np.ndarray:
    """``B(rho, u) = 1/2 A'(rho)^*(u, u) - dV/drho``."""
    _, dv = potential_eval(model.potential, grid, rho)
    return 0.5 * aprime_star(model, grid, rho, u, u) - dv


def _momentum_rates(model, grid, rho, u, m, dealias=False):
    # batched transforms: this is the inner loop of every integrator stage
    n = grid.n_points
    s1 = grid.symbol(1)
    mask = grid.dealias_mask if dealias else None
    hats = np.fft.rfft(np.stack([rho * u, m, u]), axis=-1)
    mult = np.stack([-s1 if mask is None else -s1 * mask, s1, s1])
    rho_dot, m_x, u_x = np.fft.irfft(hats * mult, n=n, axis=-1)

    _, dv = potential_eval(model.potential, grid, rho)
    b = -dv
    for i, a in enumerate(model.coefficients.coeffs):
        if a.is_constant:
            continue
        du = u if i == 0 else u_x if i == 1 else np.fft.irfft(hats[2] * grid.symbol(i), n=n)
        b = b + 0.5 * a.derivative(rho) * du * du
    b_x = np.fft.irfft(np.fft.rfft(b) * s1, n=n)
    m_dot = -u * m_x - 2.0 * u_x * m + rho * b_x
    if mask is not None:
        m_dot = np.fft.irfft(np.fft.rfft(m_dot) * mask, n=n)
    return rho_dot, m_dot


def rhs_momentum(model: ModelSpec, state: State):
    """``(rho_t, m_t)`` at ``state``."""
    grid = state.grid
    m = apply_A(model, grid, state.rho, state.u)
    return _momentum_rates(model, grid, state.rho, state.u, m)


def _velocity_rates(model, grid, rho, u, solve=None, method="auto", dealias=False):
    m = apply_A(model, grid, rho, u)
    rho_dot, m_dot = _momentum_rates(model, grid, rho, u, m)
    forcing = m_dot + apply_Aprime(model, grid, rho, u, -rho_dot)
    if solve is None:
        u_dot = InertiaSolver(model, grid, rho, method=method)(forcing)
    else:
        u_dot = solve(rho, forcing)
    if dealias:
        return grid.dealias(rho_dot), grid.dealias(u_dot)
    return rho_dot, u_dot


def rhs_velocity(model: ModelSpec, state: State, method: str = "auto"):
    """``(rho_t, u_t)``: the spray in Eulerian form,
    ``u_t = A^{-1}(m_t + A'(rho)(u, (rho u)_x))``.
    """
    return _velocity_rates(model, state.grid, state.rho, state.u, method=method)


# -- time stepping ----------------------------------------------------------

def rk4_step(rhs, y, dt, rho_floor=None):
    """One classical RK4 step of ``y' = rhs(y)`` for a tuple of arrays.

    ``y[0]`` is treated as the density when ``rho_floor`` is given.  Raises
    ``GuardFailure`` when a stage goes non-finite or drops below the floor.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")

    def stage(z):
        if rho_floor is not None and np.min(z[0]) < rho_floor:
            raise GuardFailure(Termination.DENSITY_FLOOR, f"min rho {np.min(z[0]):.3e} below floor")
        try:
            k = rhs(z)
        except IndefiniteOperatorError as exc:
            raise GuardFailure(Termination.DENSITY_FLOOR, str(exc)) from exc
        for part in k:
            if not np.all(np.isfinite(part)):
                raise GuardFailure(Termination.BLOWUP, "non-finite stage values")
        return k

    def axpy(a, k):
        return tuple(yi + a * ki for yi, ki in zip(y, k))

    k1 = stage(y)
    k2 = stage(axpy(0.5 * dt, k1))
    k3 = stage(axpy(0.5 * dt, k2))
    k4 = stage(axpy(dt, k3))
    out = tuple(
        yi + (dt / 6.0) * (a + 2.0 * b + 2.0 * c + d)
        for yi, a, b, c, d in zip(y, k1, k2, k3, k4)
    )
    for part in out:
        if not np.all(np.isfinite(part)):
            raise GuardFailure(Termination.BLOWUP, "non-finite values after step")
    if rho_floor is not None and np.min(out[0]) < rho_floor:
        raise GuardFailure(Termination.DENSITY_FLOOR, f"min rho {np.min(out[0]):.3e} below floor")
    return out


def _spectral_norms(grid: Grid, f) -> tuple[float, float]:
    """L2 norms (in rfft units) of ``f - mean`` and of its modes above n/6."""
    power = np.abs(np.fft.rfft(f))[1:] ** 2
    return float(np.sqrt(np.sum(power))), float(np.sqrt(np.sum(power[grid.n_points // 6:])))


def spectral_tail(grid: Grid, f, reference: float = 0.0) -> float:
    """Share of the L2 norm of ``f - mean`` held by modes above n/6.

    With ``reference`` (a norm in the same units), the share is taken of
    ``max(norm, reference)`` instead.
    """
    total, tail = _spectral_norms(grid, f)
    scale = max(total, reference)
    return tail / scale if scale > 0.0 else 0.0


def energy(model: ModelSpec, state: State) -> float:
    """Kinetic plus potential energy ``1/2 <u, A(rho) u> + V(rho)``."""
    grid = state.grid
    m = apply_A(model, grid, state.rho, state.u)
    v, _ = potential_eval(model.potential, grid, state.rho)
    return 0.5 * float(grid.inner(state.u, m)) + v


def _record(model, state, m=None) -> DiagnosticsRecord:
    grid = state.grid
    if m is None:
        m = apply_A(model, grid, state.rho, state.u)
    v, _ = potential_eval(model.potential, grid, state.rho)
    return DiagnosticsRecord(
        time=state.time,
        energy=0.5 * float(grid.inner(state.u, m)) + v,
        mass=float(grid.integrate(state.rho)),
        min_rho=float(np.min(state.rho)),
        max_abs_u=float(np.max(np.abs(state.u))),
    )


def simulate(
    model: ModelSpec,
    state0: State,
    t_end: float,
    dt: float,
    form: str = "momentum",
    snapshot_every: int = 1,
    *,
    method: str = "auto",
    dealias: bool = True,
    blowup_factor: float = 1e6,
    floor_factor: float = 1e-8,
    resolution_tol: float | None = 1e-2,
) -> Trajectory:
    """Fixed-step RK4 integration from ``state0`` to ``t_end``.

    Snapshots (state + diagnostics) are taken every ``snapshot_every`` steps
    and at the last step.  The run stops early, without recording the
    offending state, when ``max|u|`` exceeds ``blowup_factor * (max|u0| + 1)``
    or values go non-finite (``blowup_detected``), or when ``min rho`` drops
    below ``floor_factor`` times the initial mean density (``density_floor``).

    Gradient blow-up (wave breaking) is flagged as ``blowup_detected`` as
    soon as the upper half of the resolved velocity spectrum carries more
    than ``resolution_tol`` of the largest velocity norm seen so far; pass
    ``None`` to disable.  Using the running peak keeps standing waves, whose
    velocity passes through zero, from tripping the test.
    ``dealias`` applies the 2/3-rule filter to every stage's rates.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_end > state0.time:
        raise ValueError("t_end must exceed the initial time")
    if snapshot_every < 1:
        raise ValueError("snapshot_every must be a positive integer")
    if form not in ("momentum", "velocity"):
        raise ValueError(f"unknown form {form!r}")

    grid = state0.grid
    t0 = state0.time
    span = t_end - t0
    n_steps = max(1, math.ceil(span / dt - 1e-9))
    u_cap = blowup_factor * (float(np.max(np.abs(state0.u))) + 1.0)
    u_peak = _spectral_norms(grid, state0.u)[0]
    rho_floor = floor_factor * float(grid.mean(state0.rho))

    u_max0 = float(np.max(np.abs(state0.u)))
    if u_max0 > 0 and dt > 0.5 * grid.dx / u_max0:
        log.warning("dt=%g exceeds CFL advisory 0.5*dx/max|u| = %g", dt, 0.5 * grid.dx / u_max0)

    solve = RefreshingSolver(model, grid, method=method)

    if form == "momentum":
        def rhs(y):
            rho, m = y
            return _momentum_rates(model, grid, rho, solve(rho, m), m, dealias=dealias)

        y = (state0.rho.copy(), apply_A(model, grid, state0.rho, state0.u))
    else:
        def rhs(y):
            return _velocity_rates(model, grid, y[0], y[1], solve=solve, dealias=dealias)

        y = (state0.rho.copy(), state0.u.copy())

    traj = Trajectory(model=model, grid=grid)
    traj.states.append(state0)
    traj.diagnostics.append(_record(model, state0))

    for step in range(1, n_steps + 1):
        t_prev = t0 + (step - 1) * dt
        t_next = t_end if step == n_steps else t0 + step * dt
        try:
            y = rk4_step(rhs, y, t_next - t_prev, rho_floor=rho_floor)
            rho = y[0]
            if form == "momentum":
                u = solve(rho, y[1])
            else:
                u = y[1]
        except GuardFailure as exc:
            traj.termination = exc.termination
            traj.detail = f"t={t_prev:.6g}: {exc}"
            break
        except IndefiniteOperatorError as exc:
            traj.termination = Termination.DENSITY_FLOOR
            traj.detail = f"t={t_prev:.6g}: {exc}"
            break
        if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > u_cap:
            traj.termination = Termination.BLOWUP
            traj.detail = f"t={t_next:.6g}: max|u| exceeded {u_cap:.3g}"
            break
        if resolution_tol is not None:
            u_total, u_tail = _spectral_norms(grid, u)
            u_peak = max(u_peak, u_total)
            frac = u_tail / u_peak if u_peak > 0.0 else 0.0
            if frac > resolution_tol:
                traj.termination = Termination.BLOWUP
                traj.detail = f"t={t_next:.6g}: loss of spectral resolution (tail {frac:.3g})"
                break
        if step % snapshot_every == 0 or step == n_steps:
            state = State(t_next, rho.copy(), np.asarray(u).copy(), grid)
            traj.states.append(state)
            m = y[1] if form == "momentum" else None
            traj.diagnostics.append(_record(model, state, m))
    if traj.termination is not Termination.COMPLETED:
        log.info("simulation halted: %s", traj.detail)
    return traj


# -- Lagrangian flow --------------------------------------------------------

@dataclass
class FlowMap:
    """Particle positions ``phi(t, x_j)`` (unwrapped) at the snapshot times."""

    grid: Grid
    times: np.ndarray
    positions: np.ndarray

    def displacement(self, index: int) -> np.ndarray:
        return self.positions[index] - self.grid.nodes

    def at_time(self, t: float) -> int:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9 * max(1.0, abs(t)):
            raise KeyError(f"no flow snapshot at t={t}")
        return idx


def _check_monotone(grid: Grid, phi: np.ndarray) -> None:
    gaps = np.diff(np.append(phi, phi[0] + grid.length))
    if np.any(gaps <= 0):
        raise FlowError("flow not injective")


def reconstruct_flow(traj: Trajectory, substeps: int = 4) -> FlowMap:
    """Integrate ``phi_t = u(t, phi)`` from the identity along a trajectory.

    Velocities are interpolated with trigonometric interpolation in space
    and a cubic spline through the snapshots in time.
    """
    if traj.termination is not Termination.COMPLETED:
        raise FlowError("flow reconstruction needs a completed trajectory")
    grid = traj.grid
    times = traj.times
    if len(times) < 2:
        raise FlowError("need at least two snapshots")
    u_snap = np.array([s.u for s in traj.states])
    u_of_t = CubicSpline(times, u_snap, axis=0)

    def vel(t, x):
        return grid.interp(u_of_t(t), x)

    x = grid.nodes.astype(float).copy()
    out = [x.copy()]
    for t_a, t_b in zip(times[:-1], times[1:]):
        h = (t_b - t_a) / substeps
        for j in range(substeps):
            t = t_a + j * h
            k1 = vel(t, x)
            k2 = vel(t + 0.5 * h, x + 0.5 * h * k1)
            k3 = vel(t + 0.5 * h, x + 0.5 * h * k2)
            k4 = vel(t + h, x + h * k3)
            x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        _check_monotone(grid, x)
        out.append(x.copy())
    return FlowMap(grid=grid, times=times.copy(), positions=np.array(out))


def _invert(grid: Grid, disp: np.ndarray, y: np.ndarray, tol: float = 1e-14, maxiter: int = 60):
    ddisp = grid.deriv(disp, 1)
    xi = y - grid.interp(disp, y)
    for _ in range(maxiter):
        resid = xi + grid.interp(disp, xi) - y
        jac = 1.0 + grid.interp(ddisp, xi)
        if np.any(jac <= 0):
            raise FlowError("flow not injective")
        xi = xi - resid / jac
        if np.max(np.abs(resid)) < tol * grid.length:
            return xi
    raise FlowError("inverse flow did not converge")


def pushforward_density(grid: Grid, rho0, phi) -> np.ndarray:
    """Density transported by ``phi``: ``rho(t, phi(x)) * phi_x(x) = rho0(x)``.

    ``phi`` holds the unwrapped images of the grid nodes.
    """
    rho0 = check_density(grid, rho0)
    phi = np.asarray(phi, dtype=float)
    grid.check(phi)
    _check_monotone(grid, phi)
    disp = phi - grid.nodes
    jac = 1.0 + grid.deriv(disp, 1)
    if np.any(jac <= 0):
        raise FlowError("flow not injective")
    xi = _invert(grid, disp, grid.nodes)
    return grid.interp(rho0, xi) / grid.interp(jac, xi)
