"""Monte Carlo summaries shared by the stochastic modules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n: int

    def __iter__(self):
        # allows ``mean, stderr = estimate``
        yield self.mean
        yield self.stderr

    def within(self, value: float, n_sigma: float = 3.0, other_stderr: float = 0.0) -> bool:
        return abs(self.mean - value) <= n_sigma * np.hypot(self.stderr, other_stderr)

    @classmethod
    def from_samples(cls, values) -> "Estimate":
        v = np.asarray(values, dtype=float).ravel()
        if v.size == 0:
            raise ValueError("no samples")
        se = float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
        return cls(float(v.mean()), se, int(v.size))


def pool(estimates: Iterable[Estimate]) -> Estimate:
    """Combine shard estimates of the same mean (weights by sample count)."""
    ests = list(estimates)
    n = sum(e.n for e in ests)
    mean = sum(e.mean * e.n for e in ests) / n
    # between-shard + within-shard sums of squares
    ss = 0.0
    for e in ests:
        var = e.stderr**2 * e.n
        ss += var * (e.n - 1) + e.n * (e.mean - mean) ** 2
    se = float(np.sqrt(ss / (n - 1) / n)) if n > 1 else 0.0
    return Estimate(float(mean), se, n)


def difference(a: Estimate, b: Estimate) -> Estimate:
    """``a - b`` for independent estimates."""
    return Estimate(a.mean - b.mean, float(np.hypot(a.stderr, b.stderr)), min(a.n, b.n))


def _flatten(seed) -> list[int]:
    if isinstance(seed, (tuple, list)):
        return [v for s in seed for v in _flatten(s)]
    return [int(seed)]


def rng_for(seed, *path: int) -> np.random.Generator:
    """Independent generator for a work unit identified by ``path`` under ``seed``.

    ``seed`` may be an int or a nested tuple of ints (sub-streams of a run seed).
    """
    return np.random.default_rng(np.random.SeedSequence(_flatten(seed), spawn_key=tuple(int(p) for p in path)))
