"""Named models and the analytic oracles the test-suite leans on."""
from __future__ import annotations

import numpy as np

from .dynamics import State, rhs_velocity
from .grid import Grid
from .inertia import CoefficientSet, ModelSpec
from .polynomial import Polynomial
from .potential import InternalEnergy, Quadratic, Zero

PRESET_NAMES = ("burgers", "epdiff_h1", "shallow_water", "compressible_euler", "sgn")


class PresetError(ValueError):
    pass


def make_preset(name: str, internal_energy=None) -> ModelSpec:
    """Model for one of the named equations.

    ``internal_energy`` (a ``Polynomial`` or ``[(c, p), ...]``) only applies to
    ``compressible_euler`` and defaults to ``e(rho) = rho/2``, which gives
    back the shallow water equations.
    """
    rho = Polynomial.monomial(1.0, 1)
    one = Polynomial.constant(1.0)
    if name == "burgers":
        return ModelSpec(CoefficientSet((rho,)), Zero(), "burgers")
    if name == "epdiff_h1":
        return ModelSpec(CoefficientSet((one, one)), Zero(), "epdiff_h1")
    if name == "shallow_water":
        return ModelSpec(CoefficientSet((rho,)), Quadratic(1.0), "shallow_water")
    if name == "compressible_euler":
        return ModelSpec(CoefficientSet((rho,)), InternalEnergy(internal_energy), "compressible_euler")
    if name == "sgn":
        return ModelSpec(
            CoefficientSet((rho, Polynomial.monomial(1.0 / 3.0, 3))), Quadratic(1.0), "sgn"
        )
    raise PresetError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")


def burgers_characteristics(grid: Grid, u0, t: float, tol: float = 1e-13, maxiter: int = 100):
    """Inviscid Burgers solution by characteristics, valid before breaking.

    Solves ``y = xi + t u0(xi)`` for every node ``y`` by Newton's method and
    returns ``u0(xi)``.
    """
    u0 = np.asarray(u0, dtype=float)
    grid.check(u0)
    if t == 0:
        return u0.copy()
    du0 = grid.deriv(u0, 1)
    steepest = float(np.max(-du0))
    # roundoff in the spectral derivative must not let t = breaking time through
    if t * steepest >= 1.0 - 1e-12:
        raise PresetError("post-breaking time requested")
    y = grid.nodes
    xi = y.copy()
    for _ in range(maxiter):
        resid = xi + t * grid.interp(u0, xi) - y
        xi = xi - resid / (1.0 + t * grid.interp(du0, xi))
        if np.max(np.abs(resid)) <= tol * max(1.0, grid.length):
            return grid.interp(u0, xi)
    raise PresetError("characteristics Newton iteration did not converge")


def displacement_density(grid: Grid, rho0, velocity0, t: float, tol: float = 1e-13, maxiter: int = 100):
    """Density carried by free particles ``x -> x + t v0(x)``.

    ``rho(t, x + t v0(x)) (1 + t v0'(x)) = rho0(x)``; for the Wasserstein
    (Otto) metric ``v0`` is the gradient of the initial potential.
    """
    v0 = np.asarray(velocity0, dtype=float)
    dv0 = grid.deriv(v0, 1)
    y = grid.nodes
    xi = y.copy()
    for _ in range(maxiter):
        resid = xi + t * grid.interp(v0, xi) - y
        xi = xi - resid / (1.0 + t * grid.interp(dv0, xi))
        if np.max(np.abs(resid)) <= tol * max(1.0, grid.length):
            return grid.interp(rho0, xi) / (1.0 + t * grid.interp(dv0, xi))
    raise PresetError("displacement Newton iteration did not converge")


def linearized_matrix(model: ModelSpec, rho_bar: float, grid: Grid, eps: float = 1e-6) -> np.ndarray:
    """Jacobian (2n x 2n) of ``(rho, u) -> (rho_t, u_t)`` at the rest state.

    Built column by column with central differences of the nonlinear
    right-hand side; ordering is ``[rho; u]``.
    """
    if not rho_bar > 0:
        raise PresetError("background density must be positive")
    n = grid.n_points
    base_rho = np.full(n, float(rho_bar))
    base_u = np.zeros(n)

    def f(rho, u):
        r, v = rhs_velocity(model, State(0.0, rho, u, grid))
        return np.concatenate([r, v])

    jac = np.empty((2 * n, 2 * n))
    for j in range(2 * n):
        e = np.zeros(2 * n)
        e[j] = eps
        plus = f(base_rho + e[:n], base_u + e[n:])
        minus = f(base_rho - e[:n], base_u - e[n:])
        jac[:, j] = (plus - minus) / (2.0 * eps)
    return jac


def mode_frequencies(jac: np.ndarray, grid: Grid) -> dict[int, np.ndarray]:
    """Group the Jacobian's eigenvalues by the dominant wavenumber of their eigenvectors."""
    n = grid.n_points
    vals, vecs = np.linalg.eig(jac)
    out: dict[int, list] = {}
    for lam, vec in zip(vals, vecs.T):
        power = np.abs(np.fft.rfft(vec[:n].real)) ** 2 + np.abs(np.fft.rfft(vec[:n].imag)) ** 2
        power += np.abs(np.fft.rfft(vec[n:].real)) ** 2 + np.abs(np.fft.rfft(vec[n:].imag)) ** 2
        out.setdefault(int(np.argmax(power)), []).append(lam)
    return {k: np.array(v) for k, v in sorted(out.items())}
