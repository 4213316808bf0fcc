"""Density-dependent inertia operators ``A(rho) = sum_i (d^i)^* a_i(rho) d^i``.

On the circle ``(d^i)^* = (-1)^i d^i``, so applying ``A`` costs two spectral
derivatives per order.  Coefficients are polynomials in ``rho`` with
nonnegative weights, which makes their derivatives exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.linalg.lapack

from .grid import Grid, check_density
from .polynomial import InertiaError, Polynomial
from .potential import PotentialSpec, Zero

DENSITY_GUARD = 1e-10
DIRECT_MAX_N = 2048


class IndefiniteOperatorError(ArithmeticError):
    def __init__(self, detail: str = ""):
        msg = "inertia operator numerically indefinite"
        super().__init__(f"{msg}: {detail}" if detail else msg)


@dataclass(frozen=True)
class CoefficientSet:
    coeffs: tuple[Polynomial, ...]

    def __post_init__(self):
        coeffs = tuple(c if isinstance(c, Polynomial) else Polynomial(tuple(c)) for c in self.coeffs)
        if not coeffs:
            raise InertiaError("at least one coefficient a0 is required")
        if coeffs[0].is_zero and coeffs[-1].is_zero:
            raise InertiaError("one of a0, ak must be nonzero")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_terms(cls, order: int, terms: Iterable[Sequence]) -> "CoefficientSet":
        """Build from ``(i, c, power)`` triples, one per term of ``a_i``."""
        if order < 0:
            raise InertiaError("order must be nonnegative")
        buckets: list[list] = [[] for _ in range(order + 1)]
        for i, c, p in terms:
            if not 0 <= i <= order:
                raise InertiaError(f"term index {i} outside 0..{order}")
            buckets[i].append((c, p))
        return cls(tuple(Polynomial(tuple(b)) for b in buckets))

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def definite(self) -> bool:
        # a nonzero nonneg-weight polynomial is strictly positive for rho > 0
        return not self.coeffs[0].is_zero and not self.coeffs[-1].is_zero

    @property
    def is_constant(self) -> bool:
        return all(c.is_constant for c in self.coeffs)

    def to_terms(self) -> list[list]:
        return [[i, c, p] for i, a in enumerate(self.coeffs) for c, p in a.terms]


@dataclass(frozen=True)
class ModelSpec:
    coefficients: CoefficientSet
    potential: PotentialSpec = field(default_factory=Zero)
    label: str = "custom"

    @property
    def order(self) -> int:
        return self.coefficients.order


def _coeff_values(model: ModelSpec, rho):
    return [a(rho) for a in model.coefficients.coeffs]


def apply_A(model: ModelSpec, grid: Grid, rho, u) -> np.ndarray:
    """Momentum ``m = A(rho) u``; ``u`` may be a stack of fields."""
    grid.check(rho, u)
    u = np.asarray(u, dtype=float)
    m = np.zeros(np.broadcast_shapes(np.shape(rho), u.shape))
    for i, a in enumerate(_coeff_values(model, rho)):
        if not np.any(a):
            continue
        term = grid.deriv(a * grid.deriv(u, i), i)
        m += term if i % 2 == 0 else -term
    return m


def apply_Aprime(model: ModelSpec, grid: Grid, rho, u, sigma) -> np.ndarray:
    """Directional derivative of ``A(rho) u`` in ``rho`` along ``sigma``."""
    grid.check(rho, u, sigma)
    m = np.zeros(grid.n_points)
    for i, a in enumerate(model.coefficients.coeffs):
        if a.is_constant:
            continue
        term = grid.deriv(a.derivative(rho) * sigma * grid.deriv(u, i), i)
        m += term if i % 2 == 0 else -term
    return m


def aprime_star(model: ModelSpec, grid: Grid, rho, u, v) -> np.ndarray:
    """Scalar adjoint ``sum_i a_i'(rho) d^i u d^i v`` of ``apply_Aprime``."""
    grid.check(rho, u, v)
    out = np.zeros(grid.n_points)
    for i, a in enumerate(model.coefficients.coeffs):
        if a.is_constant:
            continue
        out += a.derivative(rho) * grid.deriv(u, i) * grid.deriv(v, i)
    return out


def assemble_A(model: ModelSpec, grid: Grid, rho) -> np.ndarray:
    """Dense symmetric matrix of ``A(rho)`` built from differentiation matrices."""
    grid.check(rho)
    n = grid.n_points
    mat = np.zeros((n, n))
    for i, a in enumerate(_coeff_values(model, rho)):
        if not np.any(a):
            continue
        if i == 0:
            mat[np.diag_indices(n)] += a
            continue
        d = grid.diff_matrix(i)
        # (d^i)^T = (-1)^i d^i, so each term is d^T diag(a) d
        mat += (d.T * a) @ d
    return 0.5 * (mat + mat.T)


def fourier_multiplier(model: ModelSpec, grid: Grid) -> np.ndarray:
    """rfft symbol of ``A`` when every coefficient is constant."""
    if not model.coefficients.is_constant:
        raise InertiaError("fourier_multiplier needs constant coefficients")
    sym = np.zeros(grid.n_points // 2 + 1)
    for i, a in enumerate(model.coefficients.coeffs):
        c = sum(c for c, _ in a.terms)
        sym += c * np.abs(grid.symbol(i)) ** 2
    return sym


def _guard_density(grid: Grid, rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    grid.check(rho)
    if not np.all(np.isfinite(rho)):
        raise IndefiniteOperatorError("non-finite density")
    mean = grid.mean(rho)
    if mean <= 0 or np.min(rho) < DENSITY_GUARD * mean:
        raise IndefiniteOperatorError(f"density too close to zero (min {np.min(rho):.3e})")
    return rho


@dataclass
class InertiaSolver:
    """Reusable inverse of ``A(rho)`` for one fixed density.

    ``method`` is ``"auto"``, ``"direct"`` or ``"cg"``.  In auto mode a
    multiplication operator is divided pointwise, a constant-coefficient
    operator is inverted in Fourier space, and anything else goes through a
    dense Cholesky factorization (CG above ``DIRECT_MAX_N`` points).
    """

    model: ModelSpec
    grid: Grid
    rho: np.ndarray
    method: str = "auto"
    cg_rtol: float = 1e-12
    _kind: str = field(init=False, default="")
    _data: object = field(init=False, default=None, repr=False)

    def __post_init__(self):
        self.rho = _guard_density(self.grid, self.rho)
        coeffs = self.model.coefficients
        method = self.method
        if method == "auto":
            if coeffs.order == 0 or all(a.is_zero for a in coeffs.coeffs[1:]):
                method = "diagonal"
            elif coeffs.is_constant:
                method = "fourier"
            elif self.grid.n_points <= DIRECT_MAX_N:
                method = "direct"
            else:
                method = "cg"
        if method not in ("diagonal", "fourier", "direct", "cg"):
            raise InertiaError(f"unknown solver method {self.method!r}")
        self._kind = method
        if method == "diagonal":
            a0 = coeffs.coeffs[0](self.rho)
            if not np.all(a0 > 0):
                raise IndefiniteOperatorError("a0 vanishes")
            self._data = a0
        elif method == "fourier":
            sym = fourier_multiplier(self.model, self.grid)
            if not np.all(sym > 0):
                raise IndefiniteOperatorError("symbol has a zero mode")
            self._data = sym
        elif method == "direct":
            mat = assemble_A(self.model, self.grid, self.rho)
            try:
                self._data = scipy.linalg.cho_factor(mat, lower=False, check_finite=False)
            except np.linalg.LinAlgError as exc:
                raise IndefiniteOperatorError(str(exc)) from exc

    def __call__(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        self.grid.check(m)
        if self._kind == "diagonal":
            return m / self._data
        if self._kind == "fourier":
            mh = np.fft.rfft(m, axis=-1) / self._data
            return np.fft.irfft(mh, n=self.grid.n_points, axis=-1)
        if self._kind == "direct":
            u = scipy.linalg.cho_solve(self._data, m.T, check_finite=False).T
            if not np.all(np.isfinite(u)):
                raise IndefiniteOperatorError("non-finite solution")
            return u
        return self._cg(m)

    def _cg(self, m: np.ndarray) -> np.ndarray:
        if m.ndim > 1:
            return np.stack([self._cg(row) for row in m])
        grid = self.grid
        # preconditioner: constant-coefficient operator at the mean density
        rho_bar = grid.mean(self.rho)
        sym = np.zeros(grid.n_points // 2 + 1)
        for i, a in enumerate(self.model.coefficients.coeffs):
            sym += float(a(rho_bar)) * np.abs(grid.symbol(i)) ** 2

        def precond(r):
            return np.fft.irfft(np.fft.rfft(r) / sym, n=grid.n_points)

        u = np.zeros_like(m)
        r = m.copy()
        z = precond(r)
        p = z.copy()
        rz = r @ z
        mnorm = np.linalg.norm(m)
        if mnorm == 0:
            return u
        for _ in range(10 * grid.n_points):
            ap = apply_A(self.model, grid, self.rho, p)
            pap = p @ ap
            if not pap > 0:
                raise IndefiniteOperatorError("non-positive curvature in CG")
            alpha = rz / pap
            u += alpha * p
            r -= alpha * ap
            if np.linalg.norm(r) <= self.cg_rtol * mnorm:
                return u
            z = precond(r)
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        raise IndefiniteOperatorError("conjugate gradient did not converge")


class RefreshingSolver:
    """Solves ``A(rho) u = m`` along a sequence of slowly changing densities.

    The inverse of ``A`` at a reference density preconditions CG at the
    current density; the reference is rebuilt once CG needs more than
    ``refresh_after`` iterations (or fails within ``max_iter``).
    Multiplication and constant-coefficient operators bypass this and are
    inverted exactly.
    """

    def __init__(self, model: ModelSpec, grid: Grid, method: str = "auto",
                 rtol: float = 1e-13, max_iter: int = 8, refresh_after: int = 5):
        self.model = model
        self.grid = grid
        self.method = method
        self.rtol = rtol
        self.max_iter = max_iter
        self.refresh_after = refresh_after
        self.refreshes = 0
        self.iterations = 0
        self._stale = False
        self._inv: np.ndarray | None = None
        self._lagged = method in ("auto", "direct") and grid.n_points <= DIRECT_MAX_N and not (
            model.order == 0
            or all(a.is_zero for a in model.coefficients.coeffs[1:])
            or model.coefficients.is_constant
        )

    def _operator(self, rho):
        coeffs = _coeff_values(self.model, rho)
        mats = [self.grid.diff_matrix(i) for i in range(len(coeffs))]

        def op(v):
            out = coeffs[0] * v
            for i in range(1, len(coeffs)):
                d = mats[i]
                # d^T = (-1)^i d
                out = out + d.T @ (coeffs[i] * (d @ v))
            return out

        return op

    def _refresh(self, rho, m) -> np.ndarray:
        mat = assemble_A(self.model, self.grid, rho)
        try:
            factor = scipy.linalg.cho_factor(mat, lower=False, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise IndefiniteOperatorError(str(exc)) from exc
        u = scipy.linalg.cho_solve(factor, m, check_finite=False)
        inv, info = scipy.linalg.lapack.dpotri(factor[0], lower=0)
        if info != 0:
            raise IndefiniteOperatorError("inverse of Cholesky factor failed")
        self._inv = np.triu(inv) + np.triu(inv, 1).T
        self.refreshes += 1
        self._stale = False
        return u

    def __call__(self, rho, m) -> np.ndarray:
        if not self._lagged:
            return InertiaSolver(self.model, self.grid, rho, method=self.method)(m)
        rho = _guard_density(self.grid, rho)
        m = np.asarray(m, dtype=float)
        if self._inv is None or self._stale:
            return self._refresh(rho, m)
        u = self._pcg(rho, m)
        if u is None:
            u = self._refresh(rho, m)
        if not np.all(np.isfinite(u)):
            raise IndefiniteOperatorError("non-finite solution")
        return u

    def _pcg(self, rho, m):
        mnorm = np.linalg.norm(m)
        if mnorm == 0:
            return np.zeros_like(m)
        op = self._operator(rho)
        inv = self._inv
        u = inv @ m
        r = m - op(u)
        z = inv @ r
        p = z
        rz = r @ z
        for it in range(self.max_iter):
            if np.linalg.norm(r) <= self.rtol * mnorm:
                self.iterations += it
                self._stale = it > self.refresh_after
                return u
            ap = op(p)
            pap = p @ ap
            if not pap > 0:
                return None
            alpha = rz / pap
            u = u + alpha * p
            r = r - alpha * ap
            z = inv @ r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
        if np.linalg.norm(r) <= self.rtol * mnorm:
            return u
        return None


def solve_A(model: ModelSpec, grid: Grid, rho, m, method: str = "auto") -> np.ndarray:
    return InertiaSolver(model, grid, rho, method=method)(m)


def check_positive_definite(model: ModelSpec, grid: Grid, rho) -> float:
    """Smallest eigenvalue of the assembled operator (raises if not positive)."""
    rho = check_density(grid, rho)
    lam = float(np.linalg.eigvalsh(assemble_A(model, grid, rho))[0])
    if lam <= 0:
        raise IndefiniteOperatorError(f"smallest eigenvalue {lam:.3e}")
    return lam
