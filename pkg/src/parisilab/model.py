"""Mixed p-spin mixtures and the covariance polynomials derived from them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

# configs declaring enormous orders with non-negligible coefficients are rejected
SUMMABILITY_CAP = 1e12


class DomainError(ValueError):
    """Argument outside the domain where a covariance function is defined."""


@dataclass(frozen=True)
class MixtureSpec:
    """Coefficients ``betas[p-1] = beta_p`` of the mixed Hamiltonian.

    ``xi(x) = sum_p beta_p**2 x**p``.  Temperature is absorbed into the betas.
    """

    betas: tuple[float, ...]

    def __post_init__(self):
        betas = tuple(float(b) for b in self.betas)
        if len(betas) < 1:
            raise ValueError("mixture needs p_max >= 1")
        if any(not np.isfinite(b) or b < 0 for b in betas):
            raise ValueError(f"betas must be finite and nonnegative, got {betas}")
        weight = sum(2.0**p * b * b for p, b in enumerate(betas, start=1))
        if weight > SUMMABILITY_CAP:
            raise ValueError(f"sum 2^p beta_p^2 = {weight:.3g} exceeds {SUMMABILITY_CAP:g}")
        object.__setattr__(self, "betas", betas)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "MixtureSpec":
        """Build from ``(p, beta_p)`` pairs as written in run configs."""
        pairs = [(int(p), float(b)) for p, b in pairs]
        if not pairs:
            raise ValueError("empty mixture")
        if any(p < 1 for p, _ in pairs):
            raise ValueError("interaction orders must be >= 1")
        if len({p for p, _ in pairs}) != len(pairs):
            raise ValueError("duplicate interaction order in mixture")
        betas = [0.0] * max(p for p, _ in pairs)
        for p, b in pairs:
            betas[p - 1] = b
        return cls(tuple(betas))

    @classmethod
    def from_squares(cls, squares: dict[int, float]) -> "MixtureSpec":
        """Build from ``{p: beta_p**2}``, the form covariances are usually quoted in."""
        return cls.from_pairs([(p, np.sqrt(s)) for p, s in squares.items()])

    @classmethod
    def zero(cls, p_max: int = 2) -> "MixtureSpec":
        return cls((0.0,) * p_max)

    @property
    def p_max(self) -> int:
        return len(self.betas)

    @property
    def orders(self) -> tuple[int, ...]:
        """Interaction orders with a nonzero coefficient."""
        return tuple(p for p, b in enumerate(self.betas, start=1) if b > 0)

    @property
    def coefficients(self) -> np.ndarray:
        """``beta_p**2`` indexed by ``p-1``."""
        return np.asarray(self.betas) ** 2

    @property
    def is_zero(self) -> bool:
        return not self.orders

    @property
    def even_only(self) -> bool:
        """True if no odd order p >= 3 is present (xi convex on [-1, 1])."""
        return all(p == 1 or p % 2 == 0 for p in self.orders)

    def pairs(self) -> list[tuple[int, float]]:
        return [(p, self.betas[p - 1]) for p in self.orders]


def _check(x, lo: float, hi: float, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    # tolerate roundoff from overlap arithmetic
    if np.any(arr < lo - 1e-12) or np.any(arr > hi + 1e-12) or np.any(np.isnan(arr)):
        raise DomainError(f"{name} requires argument in [{lo}, {hi}], got {x!r}")
    return arr


def _poly(coef: np.ndarray, x: np.ndarray, deriv: int) -> np.ndarray:
    # coef[p-1] multiplies x**p
    full = np.concatenate(([0.0], coef))
    poly = np.polynomial.polynomial.Polynomial(full)
    if deriv:
        poly = poly.deriv(deriv)
    return poly(x)


def _out(value, x):
    return float(value) if np.ndim(x) == 0 else value


def xi(spec: MixtureSpec, x):
    """Covariance function ``sum_p beta_p^2 x^p`` on [-1, 1]."""
    arr = _check(x, -1.0, 1.0, "xi")
    return _out(_poly(spec.coefficients, arr, 0), x)


def xi_prime(spec: MixtureSpec, x):
    arr = _check(x, -1.0, 1.0, "xi_prime")
    return _out(_poly(spec.coefficients, arr, 1), x)


def xi_second(spec: MixtureSpec, x):
    arr = _check(x, -1.0, 1.0, "xi_second")
    return _out(_poly(spec.coefficients, arr, 2), x)


def theta(spec: MixtureSpec, q):
    """``q xi'(q) - xi(q)``; nonnegative and nondecreasing on [0, 1]."""
    arr = _check(q, 0.0, 1.0, "theta")
    return _out(_theta_raw(spec, arr), q)


def _theta_raw(spec: MixtureSpec, x: np.ndarray) -> np.ndarray:
    # sum_p (p-1) beta_p^2 x^p, valid on [-1, 1]; used for overlap matrices
    coef = spec.coefficients * np.arange(spec.p_max)
    return _poly(coef, np.asarray(x, dtype=float), 0)


def theta_overlap(spec: MixtureSpec, r):
    """theta extended to overlaps in [-1, 1] (covariance of the y-field)."""
    arr = _check(r, -1.0, 1.0, "theta_overlap")
    return _out(_theta_raw(spec, arr), r)
