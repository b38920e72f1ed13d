"""Minimization of the Parisi functional over (m, q) and over the level count k."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np
from scipy.optimize import minimize

from .model import MixtureSpec
from .parisi import QuadratureGrid, RSBParams, duplicate_level, evaluate_parisi
from .stats import rng_for

K_MAX_GUARD = 6
FLAT_CURVATURE = 1e-8


@dataclass(frozen=True)
class OptimizerOptions:
    k_max: int = 3
    restarts: int = 16
    tolerance: float = 1e-6
    max_iterations: int = 4000
    seed: int = 0
    verbose: bool = False
    search_nodes: int = 20  # quadrature nodes during the simplex search

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if not 1 <= self.k_max <= K_MAX_GUARD:
            raise ValueError(f"k_max must lie in 1..{K_MAX_GUARD}")
        if self.restarts < 1 or self.max_iterations < 1:
            raise ValueError("restarts and max_iterations must be positive")


@dataclass(frozen=True)
class Optimum:
    value: float
    params: RSBParams
    k_used: int
    converged: bool
    evaluations: int
    flat: bool = False
    trace: tuple[tuple[int, float], ...] = field(default=(), repr=False, compare=False)


def to_monotone(u: np.ndarray) -> np.ndarray:
    """Map ``k+1`` free reals to ``0 <= s_1 <= ... <= s_k <= 1`` via normalized cumulative squares."""
    sq = np.asarray(u, dtype=float) ** 2
    total = sq.sum()
    if total == 0.0:
        return np.zeros(len(sq) - 1)
    return np.minimum(np.cumsum(sq[:-1]) / total, 1.0)


def from_monotone(s) -> np.ndarray:
    """A preimage of ``s`` under :func:`to_monotone` (unit total)."""
    ext = np.concatenate(([0.0], np.asarray(s, dtype=float), [1.0]))
    return np.sqrt(np.diff(ext))


def decode(x: np.ndarray, k: int) -> RSBParams:
    return RSBParams(tuple(to_monotone(x[: k + 1])), tuple(to_monotone(x[k + 1 :])))


def encode(params: RSBParams) -> np.ndarray:
    return np.concatenate([from_monotone(params.m), from_monotone(params.q)])


def _random_start(k: int, rng: np.random.Generator) -> RSBParams:
    m = np.sort(rng.uniform(0.0, 1.0, k))
    q = np.sort(rng.uniform(0.0, 1.0, k))
    return RSBParams(tuple(m), tuple(q))


def _candidate_key(value: float, params: RSBParams):
    # merge order: value, then smaller k, then lexicographic parameters
    return (value, params.k, params.m, params.q)


def _flatness(spec: MixtureSpec, params: RSBParams, grid: QuadratureGrid, h: float = 1e-3) -> bool:
    x0 = encode(params)
    f0 = evaluate_parisi(spec, params, grid)
    curv = []
    for i in range(x0.size):
        e = np.zeros_like(x0)
        e[i] = h
        fp = evaluate_parisi(spec, decode(x0 + e, params.k), grid)
        fm = evaluate_parisi(spec, decode(x0 - e, params.k), grid)
        curv.append(abs(fp - 2 * f0 + fm) / h**2)
    return min(curv) < FLAT_CURVATURE


def optimize_at_k(spec: MixtureSpec, k: int, grid: QuadratureGrid | None = None,
                  opts: OptimizerOptions | None = None, starts: list[RSBParams] | None = None,
                  log: TextIO | None = None) -> Optimum:
    """Multi-start Nelder-Mead in the monotone reparameterization at fixed k.

    ``starts`` are tried before the random restarts (used to embed a k-1 optimum).
    """
    grid = grid or QuadratureGrid()
    opts = opts or OptimizerOptions()
    if not 1 <= k <= opts.k_max:
        raise ValueError(f"k={k} outside 1..{opts.k_max}")
    log = log or (sys.stderr if opts.verbose else None)
    rng = rng_for(opts.seed, 20, k)
    inits = list(starts or [])
    inits.append(RSBParams.replica_symmetric() if k == 1 else RSBParams((1.0,) * k, (0.0,) * k))
    while len(inits) < opts.restarts:
        inits.append(_random_start(k, rng))

    search = grid if grid.nodes_per_level <= opts.search_nodes else QuadratureGrid(opts.search_nodes)
    best = {"key": None, "params": None}
    evaluations = 0
    trace = []

    def objective(x, g):
        nonlocal evaluations
        params = decode(x, k)
        val = evaluate_parisi(spec, params, g)
        evaluations += 1
        key = _candidate_key(val, params)
        if g is grid and (best["key"] is None or key < best["key"]):
            best["key"], best["params"] = key, params
        trace.append((evaluations, val))
        if log is not None:
            print(f"iter={evaluations} k={k} value={val:.12g}", file=log)
        return val

    nm = {"xatol": 1e-4, "fatol": opts.tolerance * 1e-2, "maxfev": opts.max_iterations}
    found = []
    for init in inits[: max(opts.restarts, len(starts or []) + 1)]:
        x0 = encode(init)
        objective(x0, grid)
        res = minimize(objective, x0, args=(search,), method="Nelder-Mead", options=nm)
        found.append((res.fun, res.x))
    # polish the best search result on the caller's grid
    _, x_best = min(found, key=lambda t: t[0])
    objective(x_best, grid)
    res = minimize(objective, x_best, args=(grid,), method="Nelder-Mead",
                   options={**nm, "fatol": opts.tolerance * 1e-3})
    converged = bool(res.success)
    params = best["params"]
    value = evaluate_parisi(spec, params, grid)
    return Optimum(value, params, k, converged, evaluations, _flatness(spec, params, grid), tuple(trace))


def optimize_full(spec: MixtureSpec, grid: QuadratureGrid | None = None,
                  opts: OptimizerOptions | None = None, log: TextIO | None = None) -> Optimum:
    """Increase k until the improvement drops below ``opts.tolerance`` or ``k_max`` is hit."""
    grid = grid or QuadratureGrid()
    opts = opts or OptimizerOptions()
    results: list[Optimum] = []
    starts: list[RSBParams] = []
    for k in range(1, opts.k_max + 1):
        res = optimize_at_k(spec, k, grid, opts, starts=starts, log=log)
        if results and res.value > results[-1].value:
            # embedding guarantees the k-1 value is attainable at k
            prev = results[-1]
            embedded = duplicate_level(prev.params, 1, "q")
            res = Optimum(evaluate_parisi(spec, embedded, grid), embedded, k, res.converged,
                          res.evaluations, prev.flat, res.trace)
        results.append(res)
        if len(results) > 1 and results[-2].value - res.value < opts.tolerance:
            break
        starts = [duplicate_level(res.params, j, mode) for j in range(1, k + 1) for mode in ("q", "m")]
    best = min(r.value for r in results)
    chosen = next(r for r in results if r.value <= best + opts.tolerance)
    evaluations = sum(r.evaluations for r in results)
    return Optimum(chosen.value, chosen.params, chosen.k_used, all(r.converged for r in results),
                   evaluations, chosen.flat, chosen.trace)
