"""Truncated Ruelle probability cascades and their hierarchical Gaussian fields.

Two samplers live here.  :func:`sample_cascade` is the textbook construction:
Poisson points ``Gamma_i^{-1/zeta_l}`` at every node, the ``M`` largest kept,
multiplied down the tree and normalized at the leaves.  It materializes
``M^k`` leaves and is used for overlap arrays.

The Monte Carlo functionals (:func:`evaluate_X0_rpc`, and the interpolation in
:mod:`parisilab.bounds`) use the equivalent nested stick-breaking form: the
children of a depth ``l-1`` node carry Poisson-Dirichlet ``PD(zeta_l, -zeta_{l-1})``
weights.  After ``M`` sticks the leftover mass is spread over infinitely many
fresh children whose average contribution is a Gaussian moment, so the
remainder enters through its conditional mean and the truncation bias is
``O(1/M)`` instead of ``O(M^{1-1/zeta})``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .model import MixtureSpec
from .parisi import LOG2, RSBParams, variance_increments
from .stats import Estimate, rng_for

ZETA_COLLAPSE = 0.01  # m at or below: single atom per node
ZETA_MAX = 0.99  # m above: rejected for cascade sampling
DEFAULT_M = 512
MIN_STICKS = 4


class CascadeError(ValueError):
    pass


class TruncationWarning(UserWarning):
    """Doubling the number of atoms moved a cascade estimate significantly."""


def cascade_zeta(params: RSBParams) -> tuple[float, ...]:
    """Map ``m`` to cascade parameters: tiny values collapse to 0, values above 0.99 are rejected."""
    zeta = []
    for m in params.m:
        if m > ZETA_MAX:
            raise CascadeError(f"m={m} > {ZETA_MAX}: cascade truncation bias is uncontrolled; use quadrature")
        zeta.append(0.0 if m <= ZETA_COLLAPSE else m)
    return tuple(zeta)


@dataclass(frozen=True)
class CascadeTree:
    params: RSBParams
    M: int
    zeta: tuple[float, ...]
    branching: tuple[int, ...]
    log_weights: np.ndarray  # normalized, one per leaf
    paths: np.ndarray  # (n_leaves, k) child index at each depth

    @property
    def k(self) -> int:
        return self.params.k

    @property
    def n_leaves(self) -> int:
        return self.log_weights.size

    @property
    def leaf_weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def meet_level(self, a, b) -> np.ndarray:
        """``a ^ b``: first depth where the paths differ, ``k+1`` for identical leaves."""
        pa = self.paths[np.asarray(a)]
        pb = self.paths[np.asarray(b)]
        diff = pa != pb
        first = np.argmax(diff, axis=-1) + 1
        return np.where(diff.any(axis=-1), first, self.k + 1)

    def overlap(self, a, b) -> np.ndarray:
        return np.asarray(self.params.q_ext)[self.meet_level(a, b)]


def _leaf_paths(branching: tuple[int, ...]) -> np.ndarray:
    if not branching:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.meshgrid(*[np.arange(b) for b in branching], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def sample_cascade(params: RSBParams, M: int = DEFAULT_M, seed=0) -> CascadeTree:
    """Poisson construction truncated to the ``M`` largest atoms per node."""
    if M < 2:
        raise CascadeError(f"M must be >= 2, got {M}")
    zeta = cascade_zeta(params)
    rng = rng_for(seed, 0)
    branching = tuple(1 if z == 0.0 else int(M) for z in zeta)
    logw = np.zeros(1)
    for z, b in zip(zeta, branching):
        n_nodes = logw.size
        if b == 1:
            continue
        # arrival times of a unit-rate Poisson process, first b per node
        arrivals = np.cumsum(rng.standard_exponential((n_nodes, b)), axis=1)
        logu = -np.log(arrivals) / z
        logw = (logw[:, None] + logu).ravel()
    logw = logw - logsumexp(logw)
    return CascadeTree(params, int(M), zeta, branching, logw, _leaf_paths(branching))


@dataclass(frozen=True)
class LeafField:
    values: np.ndarray  # z_alpha per leaf
    increments: tuple[np.ndarray, ...]  # per depth 0..k, one entry per node at that depth


def sample_field(tree: CascadeTree, spec: MixtureSpec, params: RSBParams | None = None, seed=0) -> LeafField:
    """Gaussian field with ``E z_a z_b = xi'(q_{a ^ b})`` built from per-edge increments."""
    params = params or tree.params
    if params.k != tree.k:
        raise CascadeError("params do not match the tree depth")
    sd = np.sqrt(variance_increments(spec, params))
    rng = rng_for(seed, 1)
    n_leaves = tree.n_leaves
    values = np.zeros(n_leaves)
    incs = []
    n_nodes = 1
    for depth in range(tree.k + 1):
        if depth > 0:
            n_nodes *= tree.branching[depth - 1]
        inc = sd[depth] * rng.standard_normal(n_nodes)
        incs.append(inc)
        # leaves below each depth-`depth` node are contiguous
        values += np.repeat(inc, n_leaves // n_nodes)
    return LeafField(values, tuple(incs))


def sample_overlap_array(tree: CascadeTree, n_replicas: int, seed=0) -> np.ndarray:
    """Overlaps of ``n_replicas`` leaves drawn i.i.d. from the cascade weights."""
    if n_replicas < 2:
        raise ValueError("need at least two replicas")
    rng = rng_for(seed, 2)
    idx = rng.choice(tree.n_leaves, size=n_replicas, p=tree.leaf_weights)
    R = tree.overlap(idx[:, None], idx[None, :])
    np.fill_diagonal(R, 1.0)
    return R


def sample_overlap_arrays(params: RSBParams, n_arrays: int, n_replicas: int, M: int = DEFAULT_M,
                          per_tree: int = 1, seed=0) -> np.ndarray:
    """Stack of overlap arrays, ``per_tree`` draws from each of ``ceil(n_arrays/per_tree)`` cascades."""
    out = []
    t = 0
    while len(out) < n_arrays:
        tree = sample_cascade(params, M, seed=(seed, t))
        for j in range(min(per_tree, n_arrays - len(out))):
            out.append(sample_overlap_array(tree, n_replicas, seed=(seed, t, j)))
        t += 1
    return np.stack(out)


# --- nested stick-breaking engine ------------------------------------------


def _log_gamma(shape, rng: np.random.Generator, size) -> np.ndarray:
    """log of Gamma(shape) variates, stable for small shapes."""
    shape = np.broadcast_to(np.asarray(shape, dtype=float), size)
    small = shape < 1.0
    g = rng.standard_gamma(np.where(small, shape + 1.0, shape), size=size)
    out = np.log(g)
    if np.any(small):
        u = rng.random(size)
        out = np.where(small, out + np.log(u) / np.where(small, shape, 1.0), out)
    return out


@dataclass
class StickCascade:
    """A batch of truncated nested stick-breaking cascades with their fields.

    ``log_sticks[l]`` has shape ``(B, n_l, a_l)`` for the children of the depth-``l``
    nodes, ``log_rest[l]`` the leftover mass ``(B, n_l)``, and ``fields[l]`` the
    accumulated field at depth ``l`` with shape ``(B, n_l, n_sites)``.
    """

    log_sticks: list[np.ndarray]
    log_rest: list[np.ndarray]
    fields: list[np.ndarray]
    rest_var: np.ndarray  # field variance still to come below depth l

    @property
    def k(self) -> int:
        return len(self.log_sticks)


def sample_sticks(params: RSBParams, sd: np.ndarray, atoms: int, batch: int, n_sites: int,
                  rng: np.random.Generator) -> StickCascade:
    zeta = cascade_zeta(params)
    k = params.k
    log_sticks, log_rest, fields = [], [], []
    a = sd[0] * rng.standard_normal((batch, 1, n_sites))
    fields.append(a)
    prev = 0.0
    for l in range(1, k + 1):
        z = zeta[l - 1]
        n_nodes = a.shape[1]
        if z <= prev + 1e-12:
            # PD(z, -z) is a single atom
            ls = np.zeros((batch, n_nodes, 1))
            lr = np.full((batch, n_nodes), -np.inf)
        else:
            j = np.arange(1, atoms + 1)
            size = (batch, n_nodes, atoms)
            lx = _log_gamma(np.broadcast_to(1.0 - z, size), rng, size)
            ly = _log_gamma(np.broadcast_to(-prev + j * z, size), rng, size)
            lsum = np.logaddexp(lx, ly)
            log_v, log_1mv = lx - lsum, ly - lsum
            before = np.cumsum(log_1mv, axis=-1)
            ls = log_v + np.concatenate([np.zeros((batch, n_nodes, 1)), before[..., :-1]], axis=-1)
            lr = before[..., -1]
        prev = z
        b = ls.shape[-1]
        a = np.repeat(a, b, axis=1) + sd[l] * rng.standard_normal((batch, n_nodes * b, n_sites))
        log_sticks.append(ls)
        log_rest.append(lr)
        fields.append(a)
    var = sd**2
    rest_var = np.array([var[l + 1 :].sum() for l in range(k + 1)])
    return StickCascade(log_sticks, log_rest, fields, rest_var)


def cascade_log_sum(c: StickCascade, log_mean: Callable[[np.ndarray, float], np.ndarray]) -> np.ndarray:
    """``log sum_alpha w_alpha G(z_alpha)`` per batch entry.

    ``log_mean(field, v)`` must return ``log E G(field + sqrt(v) g)`` over fresh
    per-site standard normals ``g`` (``v = 0`` gives ``log G`` itself), with
    shape ``field.shape[:-1]``.
    """
    k = c.k
    logv = log_mean(c.fields[k], 0.0)
    for l in range(k - 1, -1, -1):
        ls = c.log_sticks[l]
        B, n, b = ls.shape
        kids = ls + logv.reshape(B, n, b)
        parts = [logsumexp(kids, axis=-1)]
        rest = c.log_rest[l]
        if np.any(np.isfinite(rest)):
            parts.append(rest + log_mean(c.fields[l], c.rest_var[l]))
        logv = np.logaddexp(*parts) if len(parts) == 2 else parts[0]
    return logv[:, 0]


def _log_two_cosh_mean(field: np.ndarray, v: float) -> np.ndarray:
    # E 2 ch(a + sqrt(v) g) = 2 ch(a) e^{v/2}, single site
    a = field[..., 0]
    return np.logaddexp(a, -a) + 0.5 * v


def _x0_samples(spec: MixtureSpec, params: RSBParams, atoms: int, n_samples: int, seed,
                chunk_leaves: int = 1 << 21) -> np.ndarray:
    sd = np.sqrt(variance_increments(spec, params))
    n_leaf = atoms ** sum(1 for z in cascade_zeta(params) if z > 0)
    batch = max(1, min(n_samples, chunk_leaves // max(1, n_leaf)))
    out = []
    for i, start in enumerate(range(0, n_samples, batch)):
        rng = rng_for(seed, 3, atoms, i)
        c = sample_sticks(params, sd, atoms, min(batch, n_samples - start), 1, rng)
        out.append(cascade_log_sum(c, _log_two_cosh_mean))
    return np.concatenate(out)


def sticks_per_node(params: RSBParams, M: int) -> int:
    """Sticks per node so that the active levels hold about ``M`` leaves in total."""
    active = sum(1 for z in cascade_zeta(params) if z > 0)
    if active == 0:
        return 1
    return max(MIN_STICKS, int(round(M ** (1.0 / active))))


def evaluate_X0_rpc(spec: MixtureSpec, params: RSBParams, M: int = DEFAULT_M, n_samples: int = 10_000,
                    seed=0, pilot: int | None = 2000) -> Estimate:
    """Cascade Monte Carlo of ``E log sum_alpha w_alpha 2 ch(z_alpha)``.

    ``M`` is a leaf budget: each active level keeps ``M^(1/k)`` sticks per
    node (at least :data:`MIN_STICKS`).  A pilot run at ``M`` and ``2^k M``
    (doubling the sticks) raises :class:`TruncationWarning` if the two differ
    by more than three combined standard errors.
    """
    if M < 2:
        raise CascadeError(f"M must be >= 2, got {M}")
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    if spec.is_zero:
        return Estimate(LOG2, 0.0, n_samples)
    atoms = sticks_per_node(params, M)
    if pilot and atoms > 1:
        a = Estimate.from_samples(_x0_samples(spec, params, atoms, pilot, (seed, 1)))
        b = Estimate.from_samples(_x0_samples(spec, params, 2 * atoms, pilot, (seed, 2)))
        if abs(a.mean - b.mean) > 3 * math.hypot(a.stderr, b.stderr):
            warnings.warn(f"cascade estimate moved by {a.mean - b.mean:.3g} when doubling {atoms} sticks",
                          TruncationWarning, stacklevel=2)
    return Estimate.from_samples(_x0_samples(spec, params, atoms, n_samples, seed))
