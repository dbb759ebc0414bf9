"""Haar-averaged register fidelity under pure dephasing.

With D_mu,nu = v^T K v and v = mu - nu, the average fidelity is

    F = 4^-n  sum_{mu,nu} exp(-D_mu,nu)

Equivalent routes:

* exact sum, grouped by difference vector v in {-1, 0, 1}^n (each v is
  realised by 2^{#zeros(v)} pairs), so the cost is 3^n rather than 4^n;
* Gaussian expectation E[prod_l cos^2 x_l] with x ~ N(0, K/2), sampled;
* weak coupling, det(1 + K)^{-1/2};
* small deviation, 1 - n K_0 / 2;
* closed forms for independent and uniformly coupled qubits.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import gammaln, logsumexp

from .encoding import DecoherenceMatrix

__all__ = [
    "FidelityEstimate",
    "McConfig",
    "Method",
    "fidelity_encoded_asymptote",
    "fidelity_exact_sum",
    "fidelity_haar_exact",
    "fidelity_independent",
    "fidelity_mc",
    "fidelity_small_deviation",
    "fidelity_symmetric",
    "fidelity_symmetric_large_n",
    "fidelity_weak_coupling",
    "haar_moment_exact",
    "haar_moment_mc",
    "haar_moment_reference",
]

MAX_EXACT_N = 14
THREADS_ENV = "ENCODED_REGISTERS_THREADS"
_BLOCK = 1 << 16


class Method(Enum):
    EXACT_SUM = "ExactSum"
    MONTE_CARLO = "MonteCarlo"
    WEAK_COUPLING = "WeakCoupling"
    SMALL_DEVIATION = "SmallDeviation"
    CLOSED_FORM = "ClosedForm"


@dataclass(frozen=True)
class FidelityEstimate:
    value: float
    std_error: float = 0.0
    method: Method = Method.CLOSED_FORM
    extras: dict = field(default_factory=dict)

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class McConfig:
    samples: int = 1_000_000
    seed: int = 0
    eigen_clamp: float = 0.0

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.eigen_clamp < 0:
            raise ValueError("eigen_clamp must be non-negative")


def _matrix(K) -> np.ndarray:
    e = K.entries if isinstance(K, DecoherenceMatrix) else np.asarray(K, dtype=float)
    if e.ndim != 2 or e.shape[0] != e.shape[1]:
        raise ValueError("K must be a square matrix")
    return e


def _ternary(n: int) -> np.ndarray:
    if n == 0:
        return np.zeros((1, 0))
    return np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=n)))


# ---------------------------------------------------------------------------
# exact


def fidelity_exact_sum(K) -> FidelityEstimate:
    """Exact 4^-n sum over all basis pairs, n <= 14."""
    k = _matrix(K)
    n = k.shape[0]
    if n > MAX_EXACT_N:
        raise ValueError(f"exact sum limited to n <= {MAX_EXACT_N}, got n = {n}")
    h = n // 2
    head, tail = _ternary(h), _ternary(n - h)
    q_head = np.einsum("ij,jk,ik->i", head, k[:h, :h], head)
    q_tail = np.einsum("ij,jk,ik->i", tail, k[h:, h:], tail)
    w_head = 2.0 ** np.sum(head == 0, axis=1)
    w_tail = 2.0 ** np.sum(tail == 0, axis=1)
    cross = head @ k[:h, h:] @ tail.T
    terms = np.exp(-(q_head[:, None] + q_tail[None, :] + 2 * cross))
    total = w_head @ terms @ w_tail
    value = float(total / 4.0**n)
    return FidelityEstimate(value, 0.0, Method.EXACT_SUM)


def fidelity_haar_exact(K) -> FidelityEstimate:
    """Haar average without dropping the diagonal moment correction.

    Uses E|u_mu|^2 |u_nu|^2 = (1 + delta)/(d (d + 1)), d = 2^n, which turns
    the 4^-n pair sum F into (d F + 1)/(d + 1).
    """
    f = fidelity_exact_sum(K).value
    d = 2.0 ** _matrix(K).shape[0]
    return FidelityEstimate((d * f + 1) / (d + 1), 0.0, Method.EXACT_SUM)


# ---------------------------------------------------------------------------
# Monte Carlo


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def _sampler(k: np.ndarray, clamp: float) -> np.ndarray:
    norm = np.abs(k).max(initial=0.0)
    lam, vec = np.linalg.eigh(k)
    if lam.size and lam[0] < -1e-8 * norm:
        raise ValueError(f"K is indefinite: smallest eigenvalue {lam[0]:.3g} (norm {norm:.3g})")
    lam = np.maximum(lam, clamp)
    return vec * np.sqrt(lam / 2)


def fidelity_mc(K, cfg: McConfig = McConfig()) -> FidelityEstimate:
    """Monte Carlo estimate of E[prod cos^2 x_l], x ~ N(0, K/2).

    The Gaussian is sampled through the eigendecomposition of K, so rank
    deficient matrices are fine.  Samples are drawn in fixed-size blocks,
    each from its own PCG64 stream spawned from ``cfg.seed``; results do not
    depend on the thread count.
    """
    k = _matrix(K)
    n = k.shape[0]
    root = _sampler(k, cfg.eigen_clamp)
    sizes = [_BLOCK] * (cfg.samples // _BLOCK)
    if cfg.samples % _BLOCK:
        sizes.append(cfg.samples % _BLOCK)
    seeds = np.random.SeedSequence(cfg.seed).spawn(len(sizes))

    def block(args):
        size, seq = args
        z = np.random.Generator(np.random.PCG64(seq)).standard_normal((size, n))
        f = np.prod(np.cos(z @ root.T) ** 2, axis=1)
        m = f.mean()
        return size, m, np.sum((f - m) ** 2)

    jobs = list(zip(sizes, seeds))
    workers = _threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(block, jobs))
    else:
        parts = [block(j) for j in jobs]
    # merge block means and squared deviations in block order (Chan et al. update)
    count, mean, m2 = 0, 0.0, 0.0
    for size, m, s in parts:
        delta = m - mean
        tot = count + size
        mean += delta * size / tot
        m2 += s + delta * delta * count * size / tot
        count = tot
    var = m2 / (count - 1) if count > 1 else 0.0
    return FidelityEstimate(float(mean), float(math.sqrt(var / count)), Method.MONTE_CARLO)


# ---------------------------------------------------------------------------
# approximations


def fidelity_weak_coupling(K) -> FidelityEstimate:
    """det(1 + K)^{-1/2}; relative error of order tr K^2."""
    k = _matrix(K)
    lam = np.linalg.eigvalsh(np.eye(k.shape[0]) + k)
    if lam.size and lam[0] <= 0:
        raise ValueError(f"1 + K is singular or indefinite (smallest eigenvalue {lam[0]:.3g})")
    return FidelityEstimate(float(np.exp(-0.5 * np.sum(np.log(lam)))), 0.0, Method.WEAK_COUPLING)


def fidelity_small_deviation(K) -> FidelityEstimate:
    """1 - n K_0 / 2 with K_0 the (constant) diagonal."""
    k = _matrix(K)
    n = k.shape[0]
    return FidelityEstimate(1 - 0.5 * n * float(k[0, 0]), 0.0, Method.SMALL_DEVIATION)


# ---------------------------------------------------------------------------
# closed forms


def _check(n, kappa):
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    if not kappa >= 0:
        raise ValueError(f"kappa must be non-negative, got {kappa}")


def fidelity_independent(n: int, kappa: float) -> FidelityEstimate:
    """((1 + e^-kappa)/2)^n for K = kappa * identity."""
    _check(n, kappa)
    value = math.exp(n * math.log1p(math.expm1(-kappa) / 2))
    return FidelityEstimate(value, 0.0, Method.CLOSED_FORM)


def fidelity_symmetric_large_n(n: int, kappa: float) -> float:
    """1/sqrt(1 + n kappa), the large-n, small-kappa limit of the uniform case."""
    _check(n, kappa)
    return 1 / math.sqrt(1 + n * kappa)


def fidelity_symmetric(n: int, kappa: float) -> FidelityEstimate:
    """Uniform coupling, K_lm = kappa for all l, m.

    D depends only on the difference of Hamming weights, giving
    4^-n sum_l C(2n, l) exp(-kappa (n - l)^2), evaluated in log space.
    The large-n approximation is reported in ``extras['large_n']``.
    """
    _check(n, kappa)
    l = np.arange(2 * n + 1)
    log_binom = gammaln(2 * n + 1) - gammaln(l + 1) - gammaln(2 * n - l + 1)
    # normalise by the computed total rather than 4^n so gammaln roundoff cancels
    log_f = logsumexp(log_binom - kappa * (n - l) ** 2) - logsumexp(log_binom)
    return FidelityEstimate(float(math.exp(log_f)), 0.0, Method.CLOSED_FORM,
                            {"large_n": fidelity_symmetric_large_n(n, kappa)})


def fidelity_encoded_asymptote(n: int, gamma_a: float) -> FidelityEstimate:
    """Long-time fidelity of n first-order encoded qubits at high temperature.

    The encoded qubits decouple and each saturates at K = gamma a, so this is
    the independent-qubit form evaluated at kappa = gamma a.
    """
    return fidelity_independent(n, gamma_a)


# ---------------------------------------------------------------------------
# Haar moments


def haar_moment_reference(n: int, mu: int, nu: int) -> float:
    """(1 + delta_mu,nu) / 4^n, the moment used to build the 4^-n pair sum."""
    return (1.0 + (mu == nu)) / 4.0**n


def haar_moment_exact(n: int, mu: int, nu: int) -> float:
    """E|u_mu|^2 |u_nu|^2 = (1 + delta)/(d (d + 1)) for Haar-random u in C^d, d = 2^n."""
    d = 2.0**n
    return (1.0 + (mu == nu)) / (d * (d + 1))


def haar_moment_mc(n: int, mu: int, nu: int, samples: int = 200_000, seed: int = 0) -> FidelityEstimate:
    """Monte Carlo estimate of E|u_mu|^2 |u_nu|^2 over Haar-random unit vectors."""
    d = 2**n
    if not (0 <= mu < d and 0 <= nu < d):
        raise ValueError("basis labels out of range")
    rng = np.random.Generator(np.random.PCG64(seed))
    vals = []
    left = samples
    while left > 0:
        size = min(left, max(1, (1 << 22) // d))
        z = rng.standard_normal((size, d)) + 1j * rng.standard_normal((size, d))
        p = np.abs(z) ** 2
        p /= p.sum(axis=1, keepdims=True)
        vals.append(p[:, mu] * p[:, nu])
        left -= size
    v = np.concatenate(vals)
    return FidelityEstimate(float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)), Method.MONTE_CARLO)
