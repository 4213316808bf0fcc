"""Uniform periodic grid on the circle with Fourier pseudo-spectral operators.

Fields are plain float arrays whose last axis runs over the grid nodes, so
every operator here also acts column-wise on stacks of fields.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * np.pi


class GridError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Grid:
    """Periodic domain ``[0, length)`` sampled at ``n_points`` uniform nodes."""

    n_points: int
    length: float = TWO_PI
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.n_points
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise GridError("n must be an integer")
        if n % 2:
            raise GridError("n must be even")
        if n < 4:
            raise GridError("n must be at least 4")
        if not np.isfinite(self.length) or self.length <= 0:
            raise GridError("length must be positive")
        object.__setattr__(self, "n_points", int(n))
        object.__setattr__(self, "length", float(self.length))

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return self.n_points == other.n_points and self.length == other.length

    def __hash__(self):
        return hash((self.n_points, self.length))

    @property
    def n(self) -> int:
        return self.n_points

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @cached_property
    def nodes(self) -> np.ndarray:
        x = np.arange(self.n_points) * (self.length / self.n_points)
        x.setflags(write=False)
        return x

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers of the rfft modes, ``2*pi*j/L`` for ``j = 0..n/2``."""
        kappa = TWO_PI / self.length * np.arange(self.n_points // 2 + 1)
        kappa.setflags(write=False)
        return kappa

    def symbol(self, order: int) -> np.ndarray:
        """rfft multiplier ``(i kappa)**order``; Nyquist zeroed for odd orders."""
        if order < 0:
            raise GridError("derivative order must be nonnegative")
        key = ("symbol", order)
        if key not in self._cache:
            s = (1j * self.wavenumbers) ** order
            if order % 2:
                s[-1] = 0.0
            s.setflags(write=False)
            self._cache[key] = s
        return self._cache[key]

    def check(self, *fields: np.ndarray) -> None:
        for f in fields:
            if np.shape(f)[-1:] != (self.n_points,):
                raise GridError(
                    f"field of shape {np.shape(f)} does not live on a grid with {self.n_points} points"
                )

    # -- spectral operators ------------------------------------------------

    def deriv(self, f: np.ndarray, order: int = 1) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        self.check(f)
        if order == 0:
            return f.copy()
        fh = np.fft.rfft(f, axis=-1)
        return np.fft.irfft(fh * self.symbol(order), n=self.n_points, axis=-1)

    def integrate(self, f: np.ndarray) -> float | np.ndarray:
        f = np.asarray(f, dtype=float)
        self.check(f)
        return self.dx * np.sum(f, axis=-1)

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return self.integrate(np.asarray(f) * np.asarray(g))

    def norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.inner(f, f)))

    def mean(self, f: np.ndarray) -> float | np.ndarray:
        return self.integrate(f) / self.length

    def interp(self, f: np.ndarray, xs) -> np.ndarray:
        """Evaluate the trigonometric interpolant of ``f`` at arbitrary points.

        The Nyquist mode contributes a pure cosine, which keeps the
        interpolant real and exact at the nodes.
        """
        f = np.asarray(f, dtype=float)
        self.check(f)
        xs = np.asarray(xs, dtype=float)
        n = self.n_points
        fh = np.fft.rfft(f) / n
        theta = TWO_PI * np.mod(xs, self.length) / self.length
        j = np.arange(1, n // 2)
        phase = np.exp(1j * np.multiply.outer(theta, j))
        out = fh[0].real + 2.0 * (phase @ fh[1:-1]).real
        out = out + fh[-1].real * np.cos((n // 2) * theta)
        return out

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask over rfft modes: keeps mode indices up to n/3."""
        mask = np.zeros(self.n_points // 2 + 1)
        mask[: self.n_points // 3 + 1] = 1.0
        mask.setflags(write=False)
        return mask

    def dealias(self, f: np.ndarray) -> np.ndarray:
        fh = np.fft.rfft(np.asarray(f, dtype=float), axis=-1)
        return np.fft.irfft(fh * self.dealias_mask, n=self.n_points, axis=-1)

    def diff_matrix(self, order: int) -> np.ndarray:
        """Dense matrix of ``deriv(., order)`` acting on nodal values."""
        key = ("dmat", order)
        if key not in self._cache:
            d = self.deriv(np.eye(self.n_points), order).T
            d = np.ascontiguousarray(d)
            d.setflags(write=False)
            self._cache[key] = d
        return self._cache[key]

    def sample(self, func) -> np.ndarray:
        return np.asarray(func(self.nodes), dtype=float) * np.ones(self.n_points)


def make_grid(n: int = 256, length: float = TWO_PI) -> Grid:
    return Grid(n, length)


def check_density(grid: Grid, rho: np.ndarray) -> np.ndarray:
    """Validate a density: finite, strictly positive, positive finite mass."""
    rho = np.asarray(rho, dtype=float)
    grid.check(rho)
    if not np.all(np.isfinite(rho)):
        raise GridError("density has non-finite values")
    if np.min(rho) <= 0:
        raise GridError("density must be strictly positive")
    return rho


def check_tangent(grid: Grid, rho_dot: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    rho_dot = np.asarray(rho_dot, dtype=float)
    grid.check(rho_dot)
    scale = max(1.0, grid.integrate(np.abs(rho_dot)))
    if abs(grid.integrate(rho_dot)) > tol * grid.n_points * scale:
        raise GridError("tangent must have zero mean")
    return rho_dot
