"""Polynomials in the density with nonnegative weights."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class InertiaError(ValueError):
    pass


@dataclass(frozen=True)
class Polynomial:
    """``sum_j c_j * rho**p_j`` with ``c_j >= 0`` and integer ``p_j >= 0``."""

    terms: tuple[tuple[float, int], ...] = ()

    def __post_init__(self):
        merged: dict[int, float] = {}
        for c, p in self.terms:
            c = float(c)
            if not np.isfinite(c) or c < 0:
                raise InertiaError(f"coefficient weights must be finite and nonnegative, got {c}")
            if int(p) != p or p < 0:
                raise InertiaError(f"powers must be nonnegative integers, got {p}")
            if c > 0:
                merged[int(p)] = merged.get(int(p), 0.0) + c
        object.__setattr__(self, "terms", tuple((c, p) for p, c in sorted(merged.items())))

    @classmethod
    def constant(cls, c: float) -> "Polynomial":
        return cls(((c, 0),))

    @classmethod
    def monomial(cls, c: float, p: int) -> "Polynomial":
        return cls(((c, p),))

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_constant(self) -> bool:
        return all(p == 0 for _, p in self.terms)

    def __call__(self, rho):
        rho = np.asarray(rho, dtype=float)
        out = np.zeros_like(rho)
        for c, p in self.terms:
            out = out + c * rho**p
        return out

    def derivative(self, rho):
        rho = np.asarray(rho, dtype=float)
        out = np.zeros_like(rho)
        for c, p in self.terms:
            if p > 0:
                out = out + c * p * rho ** (p - 1)
        return out

    def to_list(self) -> list[list]:
        return [[c, p] for c, p in self.terms]
