"""Disorder, Hamiltonians, exact enumeration and Gibbs sampling at small N.

Main couplings are dense i.i.d. tensors over ordered index tuples.  The
perturbation couplings are drawn directly in the reduced Walsh basis (see
:mod:`parisilab.walsh`): the coefficient of each index subset is a Gaussian
whose variance counts the tuples collapsing onto it, which is the exact law of
the collapsed dense tensor and keeps order 8 affordable at N = 16.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import walsh
from .model import MixtureSpec, xi
from .parisi import LOG2
from .stats import Estimate, rng_for

ENUMERATION_CAP = 16
COUPLING_BUDGET = 1 << 24  # entries of a dense tensor
PERT_P_MAX = 8
PERT_EXPONENT = 1.0 / 8.0


class CapExceeded(ValueError):
    """System too large for exact enumeration or the coupling budget."""


@dataclass(frozen=True)
class DisorderRealization:
    N: int
    couplings: dict[int, np.ndarray]  # p -> (N,)*p standard Gaussians
    pert: bool = False
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))  # x_p for p = 1..pert_p_max
    pert_coefficients: np.ndarray | None = None  # (pert_p_max, 2^N) reduced couplings

    @property
    def pert_p_max(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class FreeEnergyEstimate:
    mean: float
    stderr: float
    n_disorder: int
    N: int
    pert: bool = False
    minus: bool = False

    def __iter__(self):
        yield self.mean
        yield self.stderr

    @property
    def estimate(self) -> Estimate:
        return Estimate(self.mean, self.stderr, self.n_disorder)


def _check_size(N: int, cap: int = ENUMERATION_CAP):
    if N < 1:
        raise ValueError("N must be >= 1")
    if N > cap:
        raise CapExceeded(f"N={N} exceeds the enumeration cap {cap}")


def sample_disorder(N: int, spec: MixtureSpec, pert: bool = False, seed=0, pert_p_max: int = PERT_P_MAX,
                    budget: int = COUPLING_BUDGET) -> DisorderRealization:
    if N < 1:
        raise ValueError("N must be >= 1")
    for p in spec.orders:
        if N**p > budget:
            raise CapExceeded(f"order {p} tensor at N={N} has {N**p} entries > budget {budget}")
    rng = rng_for(seed, 10)
    couplings = {p: rng.standard_normal((N,) * p) for p in spec.orders}
    if not pert:
        return DisorderRealization(N, couplings)
    if (1 << N) * pert_p_max > budget:
        raise CapExceeded(f"perturbation at N={N} exceeds budget {budget}")
    prng = rng_for(seed, 11)
    x = prng.uniform(1.0, 2.0, size=pert_p_max)
    pc = np.stack([prng.standard_normal(1 << N) * walsh.reduced_scales(N, p) for p in range(1, pert_p_max + 1)])
    return DisorderRealization(N, couplings, True, x, pc)


def _scale(N: int, p: int, minus: bool) -> float:
    return float(N + 1 if minus else N) ** (-(p - 1) / 2)


def _as_configs(d: DisorderRealization, sigma) -> np.ndarray:
    s = np.asarray(sigma)
    if s.shape[-1] != d.N:
        raise ValueError(f"configuration length {s.shape[-1]} != N={d.N}")
    if not np.all(np.abs(s) == 1):
        raise ValueError("spins must be +-1")
    return s.astype(float)


def _pert_walsh(d: DisorderRealization) -> np.ndarray:
    N = d.N
    coef = np.zeros(1 << N)
    for p in range(1, d.pert_p_max + 1):
        coef += 2.0**-p * d.x[p - 1] * _scale(N, p, False) * d.pert_coefficients[p - 1]
    return N**-PERT_EXPONENT * coef


def _tensor_energy(g: np.ndarray, s: np.ndarray) -> np.ndarray:
    # contract one index at a time against each configuration
    t = np.tensordot(s, g, axes=([1], [g.ndim - 1]))  # (n, N, ..., N)
    while t.ndim > 2:
        t = np.einsum("n...i,ni->n...", t, s)
    return np.einsum("ni,ni->n", t, s) if t.ndim == 2 else t


def hamiltonian(d: DisorderRealization, spec: MixtureSpec, sigma, minus: bool = False):
    """``sum_p beta_p H_{N,p}(sigma)`` plus the perturbation when ``d.pert``.

    ``sigma`` is one configuration or a stack of them; ``minus`` switches the
    main scaling to ``(N+1)^{-(p-1)/2}`` (the perturbation keeps size N).
    """
    s = _as_configs(d, sigma)
    single = s.ndim == 1
    s = np.atleast_2d(s)
    out = np.zeros(s.shape[0])
    for p in spec.orders:
        out += spec.betas[p - 1] * _scale(d.N, p, minus) * _tensor_energy(d.couplings[p], s)
    if d.pert:
        chi = walsh.characters(d.N, np.arange(1 << d.N)[None, :], walsh.state_index(s)[:, None])
        out += chi @ _pert_walsh(d)
    return float(out[0]) if single else out


def hamiltonian_minus(d: DisorderRealization, spec: MixtureSpec, sigma):
    return hamiltonian(d, spec, sigma, minus=True)


def main_energies(d: DisorderRealization, spec: MixtureSpec, minus: bool = False,
                  cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Main Hamiltonian (no perturbation) on all ``2^N`` states."""
    _check_size(d.N, cap)
    coef = np.zeros(1 << d.N)
    for p in spec.orders:
        coef += spec.betas[p - 1] * _scale(d.N, p, minus) * walsh.reduce_tensor(d.couplings[p])
    return walsh.fwht(coef)


def perturbation_energies(d: DisorderRealization, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Perturbation Hamiltonian on all states (zeros when it is off)."""
    _check_size(d.N, cap)
    if not d.pert:
        return np.zeros(1 << d.N)
    return walsh.fwht(_pert_walsh(d))


def energies(d: DisorderRealization, spec: MixtureSpec, minus: bool = False, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """Hamiltonian on all ``2^N`` states, indexed as in :func:`parisilab.walsh.spins`."""
    _check_size(d.N, cap)
    coef = np.zeros(1 << d.N)
    for p in spec.orders:
        coef += spec.betas[p - 1] * _scale(d.N, p, minus) * walsh.reduce_tensor(d.couplings[p])
    if d.pert:
        coef += _pert_walsh(d)
    return walsh.fwht(coef)


def gibbs_log_weights(d: DisorderRealization, spec: MixtureSpec, minus: bool = False,
                      cap: int = ENUMERATION_CAP) -> np.ndarray:
    e = energies(d, spec, minus, cap)
    return e - logsumexp(e)


def free_energy_exact(d: DisorderRealization, spec: MixtureSpec, minus: bool = False,
                      cap: int = ENUMERATION_CAP) -> float:
    """``(1/N) log sum_sigma exp H(sigma)`` by enumeration."""
    return float(logsumexp(energies(d, spec, minus, cap)) / d.N)


def free_energy_mc(N: int, spec: MixtureSpec, n_disorder: int, pert: bool = False, minus: bool = False,
                   seed=0, cap: int = ENUMERATION_CAP, pert_p_max: int = PERT_P_MAX) -> FreeEnergyEstimate:
    _check_size(N, cap)
    if n_disorder < 2:
        raise ValueError("n_disorder must be >= 2")
    if spec.is_zero and not pert:
        return FreeEnergyEstimate(LOG2, 0.0, n_disorder, N, pert, minus)
    vals = np.array([
        free_energy_exact(sample_disorder(N, spec, pert, (seed, i), pert_p_max), spec, minus, cap)
        for i in range(n_disorder)
    ])
    est = Estimate.from_samples(vals)
    return FreeEnergyEstimate(est.mean, est.stderr, n_disorder, N, pert, minus)


def overlap_array(configs) -> np.ndarray:
    """``R_{l,l'} = (1/N) sum_i sigma^l_i sigma^{l'}_i`` with an exact unit diagonal."""
    s = np.asarray(configs, dtype=float)
    R = s @ s.T / s.shape[1]
    np.fill_diagonal(R, 1.0)
    return R


def check_overlap_array(R: np.ndarray, N: int | None = None, atol: float = 1e-12) -> None:
    R = np.asarray(R)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ValueError("overlap array must be square")
    if not np.allclose(R, R.T, atol=atol, rtol=0):
        raise ValueError("overlap array not symmetric")
    if not np.all(np.diag(R) == 1.0):
        raise ValueError("overlap array diagonal must be exactly 1")
    if np.any(np.abs(R) > 1 + atol):
        raise ValueError("overlaps outside [-1, 1]")
    if N is not None:
        grid = (R + 1) * N / 2
        if not np.allclose(grid, np.round(grid), atol=1e-9, rtol=0):
            raise ValueError(f"overlaps not on the 2/N grid for N={N}")


def gibbs_overlap_arrays(d: DisorderRealization, spec: MixtureSpec, n_arrays: int, n_replicas: int,
                         rng: np.random.Generator, minus: bool = False, cap: int = ENUMERATION_CAP) -> np.ndarray:
    """``n_arrays`` independent overlap arrays of ``n_replicas`` exact Gibbs draws each."""
    w = np.exp(gibbs_log_weights(d, spec, minus, cap))
    idx = rng.choice(w.size, size=(n_arrays, n_replicas), p=w / w.sum())
    S = walsh.spins(d.N).astype(float)[idx]  # (n_arrays, n, N)
    R = np.einsum("ali,abi->alb", S, S) / d.N
    R[:, np.arange(n_replicas), np.arange(n_replicas)] = 1.0
    return R


def gibbs_sample_replicas(d: DisorderRealization, spec: MixtureSpec, n_replicas: int, seed=0,
                          cap: int = ENUMERATION_CAP) -> np.ndarray:
    if n_replicas < 2:
        raise ValueError("need at least two replicas")
    return gibbs_overlap_arrays(d, spec, 1, n_replicas, rng_for(seed, 12), cap=cap)[0]


def covariance_check_pairs(spec: MixtureSpec, sigma1, sigma2) -> float:
    """Predicted ``E H(sigma1) H(sigma2) = N xi(R_12)``."""
    s1, s2 = np.asarray(sigma1, float), np.asarray(sigma2, float)
    N = s1.size
    return N * xi(spec, float(s1 @ s2) / N)


def restrict(d: DisorderRealization, n: int) -> DisorderRealization:
    """The first ``n`` spins of ``d``: leading sub-blocks of every main tensor (perturbation off)."""
    if d.pert:
        raise ValueError("restriction is defined for the main Hamiltonian only")
    if not 1 <= n <= d.N:
        raise ValueError(f"cannot restrict N={d.N} to {n}")
    return DisorderRealization(n, {p: g[(slice(0, n),) * p].copy() for p, g in d.couplings.items()})


def telescoping_increment(N: int, spec: MixtureSpec, n_disorder: int, seed=0,
                          cap: int = ENUMERATION_CAP) -> Estimate:
    """``(N+1) F_{N+1} - N F_N`` from nested couplings (perturbation off).

    Both sizes share the couplings among the first N spins, which removes most
    of the disorder noise from the difference without changing its mean.
    """
    _check_size(N + 1, cap)
    if n_disorder < 2:
        raise ValueError("n_disorder must be >= 2")
    vals = np.empty(n_disorder)
    for i in range(n_disorder):
        big = sample_disorder(N + 1, spec, False, (seed, i))
        small = restrict(big, N)
        vals[i] = logsumexp(energies(big, spec, cap=cap)) - logsumexp(energies(small, spec, cap=cap))
    return Estimate.from_samples(vals)
