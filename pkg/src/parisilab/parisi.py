"""Finite-level Parisi functional by nested Gauss-Hermite quadrature.

Level ``l`` carries an independent Gaussian ``z_l`` whose variance is the
increment of ``xi'`` between consecutive overlap values.  Working from the
leaves up,

    X_{k+1}(h) = log 2 + log cosh h
    X_l(h)     = (1/m_l) log E exp(m_l X_{l+1}(h + z_l))     (m_0 = 0: plain mean)

and the functional is ``X_0(0)`` minus the theta correction.  The additive
``log 2`` makes the zero mixture evaluate to ``log 2``, the free energy of
``2^N`` free spins.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .model import MixtureSpec, theta, xi_prime

LOG2 = float(np.log(2.0))
M_ZERO = 1e-8  # m below this is treated as the expectation branch
DEFAULT_NODES = 40
MAX_EXACT_LEVELS = 4  # nodes**(k+1) cost
CHUNK = 1 << 22


class QuadratureOverflow(ArithmeticError):
    """A stabilized log-expectation still produced a non-finite value."""


@dataclass(frozen=True)
class RSBParams:
    """Monotone sequences ``0 <= m_1 <= ... <= m_k <= 1`` and ``0 <= q_1 <= ... <= q_k <= 1``."""

    m: tuple[float, ...]
    q: tuple[float, ...]

    def __post_init__(self):
        m = tuple(float(v) for v in self.m)
        q = tuple(float(v) for v in self.q)
        if len(m) != len(q) or not m:
            raise ValueError(f"need k >= 1 with len(m) == len(q), got {len(m)} and {len(q)}")
        for name, seq in (("m", m), ("q", q)):
            ext = (0.0, *seq, 1.0)
            if any(not np.isfinite(v) for v in seq):
                raise ValueError(f"{name} has non-finite entries: {seq}")
            if any(b < a for a, b in zip(ext, ext[1:])):
                raise ValueError(f"{name} must be nondecreasing inside [0, 1], got {seq}")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "q", q)

    @property
    def k(self) -> int:
        return len(self.m)

    @property
    def q_ext(self) -> tuple[float, ...]:
        """``(q_0, ..., q_{k+1}) = (0, q_1, ..., q_k, 1)``."""
        return (0.0, *self.q, 1.0)

    @property
    def m_ext(self) -> tuple[float, ...]:
        """``(m_0, ..., m_k)`` with ``m_0 = 0``."""
        return (0.0, *self.m)

    @classmethod
    def replica_symmetric(cls, q: float = 0.0, m: float = 1.0) -> "RSBParams":
        return cls((m,), (q,))


def duplicate_level(params: RSBParams, j: int, mode: str = "q", value: float | None = None) -> RSBParams:
    """Embed ``params`` in ``k+1`` levels without changing the functional.

    ``mode="q"`` repeats ``q_j`` and inserts a free ``m`` (default ``m_j``) before
    level ``j``; ``mode="m"`` repeats ``m_j`` and inserts a ``q`` between ``q_j``
    and ``q_{j+1}`` (default: ``q_j``).  ``j`` is 1-based.
    """
    k = params.k
    if not 1 <= j <= k:
        raise ValueError(f"level {j} outside 1..{k}")
    m, q = list(params.m), list(params.q)
    if mode == "q":
        lo, hi = params.m_ext[j - 1], m[j - 1]
        new = hi if value is None else float(np.clip(value, lo, hi))
        m.insert(j - 1, new)
        q.insert(j - 1, q[j - 1])
    elif mode == "m":
        lo, hi = q[j - 1], params.q_ext[j + 1]
        new = lo if value is None else float(np.clip(value, lo, hi))
        m.insert(j, m[j - 1])
        q.insert(j, new)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return RSBParams(tuple(m), tuple(q))


@dataclass(frozen=True)
class QuadratureGrid:
    """Gauss-Hermite rule for expectations against the standard normal density."""

    nodes_per_level: int = DEFAULT_NODES
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.nodes_per_level < 1:
            raise ValueError("nodes_per_level must be positive")
        x, w = _hermite(int(self.nodes_per_level))
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "weights", w)

    @property
    def log_weights(self) -> np.ndarray:
        return np.log(self.weights)

    def expect(self, f) -> float:
        """E f(g) for a standard Gaussian g."""
        return float(np.dot(self.weights, f(self.nodes)))


@lru_cache(maxsize=None)
def _hermite(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.hermite_e.hermegauss(n)
    w = w / w.sum()
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def variance_increments(spec: MixtureSpec, params: RSBParams) -> np.ndarray:
    """Variances of ``z_0, ..., z_k``.

    ``z_0`` takes ``xi'(q_1)`` in full (the ``p = 1`` part ``xi'(0)`` belongs to
    the shared root field), so the increments telescope to ``xi'(1)``.
    """
    qe = np.asarray(params.q_ext)
    xp = np.asarray(xi_prime(spec, qe))
    xp[0] = 0.0
    return np.maximum(np.diff(xp), 0.0)


def log_cosh(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - LOG2


def evaluate_X0(spec: MixtureSpec, params: RSBParams, grid: QuadratureGrid | None = None) -> float:
    """``X_0`` of the recursion, including the additive ``log 2``."""
    grid = grid or QuadratureGrid()
    if params.k > MAX_EXACT_LEVELS and grid.nodes_per_level ** (params.k + 1) > 1e9:
        raise ValueError(f"k={params.k} with {grid.nodes_per_level} nodes is too costly for exact quadrature")
    sd = np.sqrt(variance_increments(spec, params))
    m = params.m_ext
    value = _level(0, np.zeros(1), sd, m, grid)[0]
    if not np.isfinite(value):
        raise QuadratureOverflow(f"X_0 is {value} for {params}")
    return float(value)


def _level(l: int, h: np.ndarray, sd: np.ndarray, m: Sequence[float], grid: QuadratureGrid) -> np.ndarray:
    k = len(m) - 1
    if l == k + 1:
        return LOG2 + log_cosh(h)
    if sd[l] == 0.0:
        return _level(l + 1, h, sd, m, grid)
    n = grid.nodes_per_level
    out = np.empty_like(h)
    step = max(1, CHUNK // n)
    for start in range(0, h.size, step):
        hs = h[start : start + step]
        pts = (hs[:, None] + sd[l] * grid.nodes[None, :]).ravel()
        inner = _level(l + 1, pts, sd, m, grid).reshape(hs.size, n)
        if m[l] < M_ZERO:
            res = inner @ grid.weights
        else:
            with np.errstate(over="ignore", invalid="ignore"):
                res = logsumexp(m[l] * inner + grid.log_weights, axis=1) / m[l]
        if not np.all(np.isfinite(res)):
            raise QuadratureOverflow(f"non-finite log-expectation at level {l} (m={m[l]}, sd={sd[l]})")
        out[start : start + step] = res
    return out


def theta_correction(spec: MixtureSpec, params: RSBParams) -> float:
    """``(1/2) sum_j m_j (theta(q_{j+1}) - theta(q_j))``."""
    th = np.asarray(theta(spec, np.asarray(params.q_ext[1:])))
    return 0.5 * float(np.dot(params.m, np.diff(th)))


def evaluate_parisi(spec: MixtureSpec, params: RSBParams, grid: QuadratureGrid | None = None) -> float:
    return evaluate_X0(spec, params, grid) - theta_correction(spec, params)


def format_value(x: float) -> str:
    """Serialization used in result records: 12 significant digits."""
    return f"{x:.12g}"
