"""Walsh-Hadamard tools for functions on the hypercube {-1, +1}^N.

State ``s`` in ``0 .. 2^N - 1`` encodes ``sigma_i = 1 - 2 * bit_i(s)``; the
character of a subset ``S`` (also a bitmask) is ``(-1)^popcount(S & s)``.
A p-spin coupling tensor collapses onto the characters because ``sigma_i^2 = 1``:
a p-tuple contributes to the subset of indices it hits an odd number of times.
"""

from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np


def spins(N: int) -> np.ndarray:
    """All ``2^N`` configurations as a ``(2^N, N)`` array of +-1."""
    s = np.arange(1 << N)[:, None]
    bits = (s >> np.arange(N)[None, :]) & 1
    return (1 - 2 * bits).astype(np.int8)


def state_index(sigma) -> np.ndarray:
    sigma = np.asarray(sigma)
    bits = (sigma < 0).astype(np.int64)
    return bits @ (1 << np.arange(sigma.shape[-1], dtype=np.int64))


@lru_cache(maxsize=None)
def popcounts(N: int) -> np.ndarray:
    s = np.arange(1 << N)
    out = np.zeros(1 << N, dtype=np.int64)
    for i in range(N):
        out += (s >> i) & 1
    out.flags.writeable = False
    return out


def fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the last axis (length ``2^N``)."""
    a = np.array(a, dtype=float, copy=True)
    n = a.shape[-1]
    if n & (n - 1):
        raise ValueError("length must be a power of two")
    lead = a.shape[:-1]
    h = 1
    while h < n:
        v = a.reshape(*lead, n // (2 * h), 2, h)
        x, y = v[..., 0, :].copy(), v[..., 1, :]
        v[..., 0, :] += y
        v[..., 1, :] = x - y
        h *= 2
    return a


def characters(N: int, subsets, states) -> np.ndarray:
    """``chi_S(sigma_s)`` for broadcast arrays of subset masks and state indices."""
    both = np.bitwise_and(np.asarray(subsets), np.asarray(states))
    par = np.zeros(both.shape, dtype=np.int64)
    for i in range(N):
        par ^= (both >> i) & 1
    return 1 - 2 * par


@lru_cache(maxsize=None)
def word_count(p: int, j: int, N: int) -> int:
    """Number of words of length ``p`` over ``N`` letters whose odd-multiplicity set is a fixed ``j``-subset.

    ``p! [x^p] sinh(x)^j cosh(x)^(N-j)``, expanded into exponentials.
    """
    if j > min(p, N) or (p - j) % 2:
        return 0
    total = 0
    for a in range(j + 1):
        for b in range(N - j + 1):
            total += (-1) ** a * comb(j, a) * comb(N - j, b) * (N - 2 * a - 2 * b) ** p
    assert total % (1 << N) == 0
    return total >> N


def tuple_masks(N: int, p: int) -> np.ndarray:
    """Odd-multiplicity subset of every index tuple, in C order over ``(N,)*p``."""
    mask = np.zeros((1,) * 0, dtype=np.int64)
    for _ in range(p):
        mask = np.bitwise_xor.outer(mask, 1 << np.arange(N, dtype=np.int64))
    return mask.ravel()


def reduce_tensor(g: np.ndarray) -> np.ndarray:
    """Walsh coefficients of ``sigma -> sum g[i_1..i_p] sigma_{i_1}...sigma_{i_p}``."""
    N = g.shape[0] if g.ndim else 0
    p = g.ndim
    return np.bincount(tuple_masks(N, p), weights=g.ravel(), minlength=1 << N)


def reduced_scales(N: int, p: int) -> np.ndarray:
    """Per-subset std of the reduced coefficients of an i.i.d. standard Gaussian p-tensor."""
    counts = np.array([word_count(p, j, N) for j in range(N + 1)], dtype=float)
    return np.sqrt(counts[popcounts(N)])


def power_spectrum(N: int, p: int) -> np.ndarray:
    """Walsh eigenvalues of the matrix ``(R_{s,s'}^p)`` over all states.

    ``R^p = N^{-p} sum_S c(p, |S|) chi_S chi_S^T``, so in the orthogonal Walsh
    basis (columns of norm ``2^{N/2}``) the eigenvalue of ``S`` is
    ``2^N N^{-p} c(p, |S|)``.
    """
    counts = np.array([word_count(p, j, N) for j in range(N + 1)], dtype=float)
    return (1 << N) * counts[popcounts(N)] / float(N) ** p
