"""Overlap-array statistics: Ghirlanda-Guerra gaps, ultrametricity, positivity, discretization.

Every statistic consumes a stack of overlap arrays of shape ``(S, n, n)`` and
treats them identically whether they come from exact Gibbs sampling or from a
cascade.  Arrays drawn from the same disorder (or cascade) are correlated; pass
``groups`` to cluster the standard error by source.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import walsh
from .model import DomainError, MixtureSpec
from .parisi import RSBParams
from .rpc import DEFAULT_M, sample_cascade, sample_overlap_array, sticks_per_node
from .simulator import ENUMERATION_CAP, _check_size, gibbs_log_weights, gibbs_overlap_arrays, sample_disorder
from .stats import Estimate, rng_for

MIN_SAMPLES = 100


class InsufficientSamples(ValueError):
    pass


@dataclass(frozen=True)
class GGQuery:
    """``f`` from a builtin family, ``n`` replicas and power ``p``.

    ``kind`` is ``"one"`` (f = 1), ``"monomial"`` (f = R_{a,b}^r with
    ``entries=((a, b),)``) or ``"product"`` (f = R_{a,b} R_{c,d}).  Replica
    labels are 1-based and must lie in ``1..n``; every builtin has ``|f| <= 1``.
    """

    kind: str = "one"
    n: int = 2
    p: int = 1
    entries: tuple[tuple[int, int], ...] = ()
    r: int = 1

    def __post_init__(self):
        if self.n < 2 or self.p < 1:
            raise ValueError("need n >= 2 and p >= 1")
        want = {"one": 0, "monomial": 1, "product": 2}
        if self.kind not in want:
            raise ValueError(f"unknown query kind {self.kind!r}")
        if len(self.entries) != want[self.kind]:
            raise ValueError(f"{self.kind} query needs {want[self.kind]} entries")
        for a, b in self.entries:
            if not (1 <= a <= self.n and 1 <= b <= self.n and a != b):
                raise ValueError(f"entry ({a}, {b}) must be an off-diagonal pair within 1..{self.n}")
        if self.r < 1:
            raise ValueError("r must be >= 1")

    @classmethod
    def parse(cls, text: str, n: int, p: int) -> "GGQuery":
        """``"1"``, ``"R23"``, ``"R23^2"`` or ``"R12*R34"``."""
        t = text.replace(" ", "")
        if t in ("1", "one"):
            return cls("one", n, p)
        if "*" in t:
            a, b = t.split("*")
            return cls("product", n, p, (_pair(a), _pair(b)))
        base, _, r = t.partition("^")
        return cls("monomial", n, p, (_pair(base),), int(r) if r else 1)

    def label(self) -> str:
        if self.kind == "one":
            return "1"
        terms = [f"R{a}{b}" for a, b in self.entries]
        if self.kind == "monomial":
            return terms[0] + (f"^{self.r}" if self.r > 1 else "")
        return "*".join(terms)

    def f(self, R: np.ndarray) -> np.ndarray:
        """Evaluate on a stack ``(S, m, m)``; returns ``(S,)``."""
        if self.kind == "one":
            return np.ones(R.shape[0])
        vals = [R[:, a - 1, b - 1] for a, b in self.entries]
        if self.kind == "monomial":
            return vals[0] ** self.r
        return vals[0] * vals[1]


def _pair(token: str) -> tuple[int, int]:
    if not (token.startswith("R") and len(token) == 3 and token[1:].isdigit()):
        raise ValueError(f"cannot parse overlap entry {token!r} (expected e.g. R23)")
    return int(token[1]), int(token[2])


def _stack(samples) -> np.ndarray:
    R = np.asarray(samples, dtype=float)
    if R.ndim == 2:
        R = R[None]
    if R.ndim != 3 or R.shape[1] != R.shape[2]:
        raise ValueError("samples must be a stack of square overlap arrays")
    return R


def _cluster_means(X: np.ndarray, groups) -> np.ndarray:
    if groups is None:
        return X
    g = np.asarray(groups)
    _, inv = np.unique(g, return_inverse=True)
    counts = np.bincount(inv)
    return np.stack([np.bincount(inv, weights=col) / counts for col in X.T], axis=1)


@dataclass(frozen=True)
class GGResult:
    phi: float
    stderr: float
    n_samples: int
    query: GGQuery

    def __iter__(self):
        yield self.phi
        yield self.stderr


def gg_statistic(samples, query: GGQuery, groups=None) -> GGResult:
    """Plug-in ``|E f R_{1,n+1}^p - E f E R_{1,2}^p / n - sum_{l=2..n} E f R_{1,l}^p / n|``.

    The standard error is the delta method on the four sample means (clustered
    by ``groups`` when given).
    """
    R = _stack(samples)
    n, p = query.n, query.p
    if R.shape[1] < n + 1:
        raise ValueError(f"arrays of size {R.shape[1]} are too small for n={n} (need n+1)")
    if R.shape[0] < MIN_SAMPLES:
        raise InsufficientSamples(f"{R.shape[0]} arrays < {MIN_SAMPLES}")
    f = query.f(R)
    X = np.stack([
        f * R[:, 0, n] ** p,
        f,
        R[:, 0, 1] ** p,
        f * sum(R[:, 0, l] ** p for l in range(1, n)),
    ], axis=1)
    X = _cluster_means(X, groups)
    if X.shape[0] < 2:
        raise InsufficientSamples("need at least two independent groups")
    a, b, c, d = X.mean(axis=0)
    signed = a - b * c / n - d / n
    grad = np.array([1.0, -c / n, -b / n, -1.0 / n])
    cov = np.atleast_2d(np.cov(X, rowvar=False))
    se = float(np.sqrt(max(grad @ cov @ grad, 0.0) / X.shape[0]))
    return GGResult(float(abs(signed)), se, int(R.shape[0]), query)


def simulator_overlap_arrays(N: int, spec: MixtureSpec, pert: bool, n_disorder: int, n_arrays: int,
                             n_replicas: int, seed=0, cap: int = ENUMERATION_CAP):
    """``n_arrays`` exact-Gibbs overlap arrays for each of ``n_disorder`` draws, with group labels."""
    out = []
    for i in range(n_disorder):
        d = sample_disorder(N, spec, pert, (seed, i))
        out.append(gibbs_overlap_arrays(d, spec, n_arrays, n_replicas, rng_for(seed, 50, i), cap=cap))
    return np.concatenate(out), np.repeat(np.arange(n_disorder), n_arrays)


def rpc_overlap_arrays(params: RSBParams, n_trees: int, n_arrays: int, n_replicas: int, M: int = DEFAULT_M,
                       seed=0):
    """Overlap arrays from ``n_trees`` cascades (``M`` leaves in total each), with group labels."""
    per_node = sticks_per_node(params, M)
    out = []
    for i in range(n_trees):
        tree = sample_cascade(params, max(2, per_node), seed=(seed, i))
        out.extend(sample_overlap_array(tree, n_replicas, seed=(seed, i, j)) for j in range(n_arrays))
    return np.stack(out), np.repeat(np.arange(n_trees), n_arrays)


def ultrametric_mask(R: np.ndarray, atol: float = 1e-12) -> np.ndarray:
    """Per array and index triple: does every relabeling satisfy ``R_12 >= min(R_13, R_23)``?

    All three rotations hold iff the two smallest overlaps of the triple agree.
    Returns ``(S, n_triples)``.
    """
    R = _stack(R)
    trip = np.array(list(combinations(range(R.shape[1]), 3)))
    if trip.size == 0:
        return np.zeros((R.shape[0], 0), dtype=bool)
    i, j, l = trip.T
    v = np.sort(np.stack([R[:, i, j], R[:, i, l], R[:, j, l]], axis=-1), axis=-1)
    return v[..., 1] - v[..., 0] <= atol


def ultrametricity_fraction(samples, groups=None, atol: float = 1e-12) -> Estimate:
    """Fraction of triples passing the rotation-invariant ultrametric test, with stderr over arrays."""
    mask = ultrametric_mask(samples, atol)
    if mask.size < MIN_SAMPLES:
        raise InsufficientSamples(f"{mask.size} triples < {MIN_SAMPLES}")
    per = _cluster_means(mask.mean(axis=1)[:, None], groups)[:, 0]
    if per.size < 2:
        return Estimate(float(mask.mean()), 0.0, int(mask.size))
    e = Estimate.from_samples(per)
    return Estimate(float(mask.mean()), e.stderr, int(mask.size))


def overlap_distribution(log_weights: np.ndarray, N: int) -> np.ndarray:
    """Law of ``R_12`` for two independent replicas; entry ``j`` is ``P(R = 1 - 2j/N)``.

    The pair law depends on ``s xor s'`` only, so the autocorrelation of the
    Gibbs weights comes from one Walsh transform.
    """
    w = np.exp(np.asarray(log_weights) - np.max(log_weights))
    w /= w.sum()
    auto = walsh.fwht(walsh.fwht(w) ** 2) / w.size
    dist = np.bincount(walsh.popcounts(N), weights=auto, minlength=N + 1)
    return np.clip(dist, 0.0, None)


def positivity_probability(N: int, spec: MixtureSpec, pert: bool, epsilon: float, n_samples: int = 200,
                           seed=0, cap: int = ENUMERATION_CAP) -> Estimate:
    """``P(R_12 <= -epsilon)`` for two Gibbs replicas, averaged over ``n_samples`` disorder draws.

    The replica average is exact for each draw; the stderr is over disorder.
    """
    _check_size(N, cap)
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    overlaps = 1.0 - 2.0 * np.arange(N + 1) / N
    hit = overlaps <= -epsilon + 1e-12
    if not hit.any():
        return Estimate(0.0, 0.0, n_samples)
    vals = np.empty(n_samples)
    for i in range(n_samples):
        d = sample_disorder(N, spec, pert, (seed, i))
        vals[i] = overlap_distribution(gibbs_log_weights(d, spec, cap=cap), N)[hit].sum()
    return Estimate.from_samples(vals)


def kappa_discretize(q, k: int):
    """``floor(q k) / k`` on ``[0, 1]`` (so ``kappa(1) = 1``); works entrywise on arrays."""
    if k < 1:
        raise ValueError("k must be >= 1")
    arr = np.asarray(q, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > 1.0) or np.any(np.isnan(arr)):
        raise DomainError(f"kappa_discretize requires q in [0, 1], got {q!r}")
    # absorb roundoff so grid points map to themselves
    out = np.floor(arr * k * (1 + 1e-12)) / k
    return float(out) if np.ndim(q) == 0 else out
