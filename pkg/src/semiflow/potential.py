"""Potential energy functionals ``V(rho)`` and their variational derivatives."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid
from .polynomial import Polynomial


@dataclass(frozen=True)
class Zero:
    def evaluate(self, grid: Grid, rho):
        return 0.0, np.zeros(grid.n_points)

    def to_dict(self) -> dict:
        return {"variant": "zero"}


@dataclass(frozen=True)
class Quadratic:
    """``V = (c/2) * integral of rho**2``."""

    c: float = 1.0

    def evaluate(self, grid: Grid, rho):
        rho = np.asarray(rho, dtype=float)
        return 0.5 * self.c * float(grid.integrate(rho * rho)), self.c * rho

    def to_dict(self) -> dict:
        return {"variant": "quadratic", "c": self.c}


@dataclass(frozen=True)
class InternalEnergy:
    """``V = integral of e(rho) * rho`` for a polynomial internal energy ``e``."""

    e: object = field(default=None)

    def __post_init__(self):
        e = self.e
        if e is None:
            e = Polynomial.monomial(0.5, 1)
        elif not isinstance(e, Polynomial):
            e = Polynomial(tuple(tuple(t) for t in e))
        object.__setattr__(self, "e", e)

    def evaluate(self, grid: Grid, rho):
        rho = np.asarray(rho, dtype=float)
        value = float(grid.integrate(self.e(rho) * rho))
        return value, self.e(rho) + rho * self.e.derivative(rho)

    def to_dict(self) -> dict:
        return {"variant": "internal_energy", "e": self.e.to_list()}


PotentialSpec = Zero | Quadratic | InternalEnergy


def potential_eval(pot, grid: Grid, rho):
    """Return ``(V(rho), dV/drho)``."""
    grid.check(rho)
    return pot.evaluate(grid, rho)
