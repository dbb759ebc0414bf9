"""Hierarchically encoded registers.

A logical qubit of order chi is two order-(chi-1) qubits on neighbouring
sites in the states |01> and |10>.  Its effective decoherence function obeys

    K^chi_l(t) = 2 K^{chi-1}_{2l}(t) - K^{chi-1}_{|2l-1|}(t) - K^{chi-1}_{2l+1}(t)

with K^0_l(t) = K(l a, t) the single-pair kernel at distance l a.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz
from scipy.optimize import brentq

from .kernel import BathSpec, ConvergenceError, dilog, k_dispatch, k_finite_limit, k_high_temperature, k_zero_exact

__all__ = [
    "BitString",
    "DecoherenceMatrix",
    "RegisterSpec",
    "crossover_estimate",
    "crossover_time",
    "decoherence_coefficient",
    "decoherence_matrix",
    "difference_vector",
    "effective_k",
    "effective_k_table",
    "k1_asymptote",
    "lift_bitstring",
    "plateau",
    "plateau_limit",
]

KERNELS = ("exact", "limit", "high_temperature")


@dataclass(frozen=True)
class RegisterSpec:
    """n logical qubits of encoding order chi on a chain with spacing a."""

    n: int
    a: float
    chi: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        if not self.a > 0:
            raise ValueError(f"a must be positive, got {self.a}")
        if int(self.chi) != self.chi or self.chi < 0:
            raise ValueError(f"chi must be a non-negative integer, got {self.chi}")

    @property
    def physical_spins(self) -> int:
        return self.n * 2**self.chi

    def positions(self) -> np.ndarray:
        return self.a * np.arange(self.physical_spins)


@dataclass(frozen=True)
class DecoherenceMatrix:
    """Symmetric Toeplitz matrix K_lm = K^chi_{|l-m|}(t) at a fixed time."""

    entries: np.ndarray
    time: float
    register: RegisterSpec | None = None
    bath: BathSpec | None = None

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ValueError("decoherence matrix must be square")
        if not np.allclose(e, e.T, rtol=0, atol=1e-12 * max(1.0, np.abs(e).max(initial=0))):
            raise ValueError("decoherence matrix must be symmetric")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @classmethod
    def from_first_row(cls, row, time: float = float("nan"), register=None, bath=None) -> "DecoherenceMatrix":
        return cls(toeplitz(np.asarray(row, dtype=float)), time, register, bath)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def diagonal(self) -> float:
        return float(self.entries[0, 0])

    @property
    def first_row(self) -> np.ndarray:
        return self.entries[0].copy()

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])


@dataclass(frozen=True)
class BitString:
    """Logical basis label; qubit l is the l-th character of ``format(value, f'0{n}b')``."""

    value: int
    n: int

    def __post_init__(self):
        if self.n < 1 or not 0 <= self.value < 2**self.n:
            raise ValueError(f"{self.value} is not a valid {self.n}-bit string")

    @property
    def bits(self) -> np.ndarray:
        return (self.value >> np.arange(self.n - 1, -1, -1)) & 1

    def __str__(self):
        return format(self.value, f"0{self.n}b")


def _as_bits(mu, n: int) -> np.ndarray:
    if isinstance(mu, BitString):
        if mu.n != n:
            raise ValueError(f"bit string has {mu.n} bits, matrix has dimension {n}")
        return mu.bits
    return BitString(int(mu), n).bits


def difference_vector(mu, nu, n: int) -> np.ndarray:
    """v with v_l = mu_l - nu_l."""
    return _as_bits(mu, n) - _as_bits(nu, n)


def lift_bitstring(mu, n: int) -> int:
    """Map an n-bit logical label to the 2n-bit label of the underlying pairs.

    Logical qubit i occupies sites 2i and 2i+1 with bits (mu_i, 1 - mu_i).
    """
    bits = _as_bits(mu, n)
    out = 0
    for b in bits:
        out = (out << 2) | (int(b) << 1) | (1 - int(b))
    return out


# ---------------------------------------------------------------------------
# effective decoherence functions


def _base_kernel(r, t, bath, kernel, drop_log):
    if kernel == "exact":
        return k_dispatch(r, t, bath)
    if kernel == "high_temperature":
        return k_high_temperature(r, t, bath, drop_log=drop_log)
    if kernel == "limit":
        safe = np.where(r > 0, r, 1.0)
        return np.where(r > 0, k_finite_limit(safe, t, bath), k_zero_exact(t, bath))
    raise ValueError(f"kernel must be one of {KERNELS}, got {kernel!r}")


def effective_k_table(chi: int, offsets: int, t, a: float, bath: BathSpec, *, kernel: str = "exact",
                      drop_log: bool = False) -> np.ndarray:
    """K^chi_l(t) for l = 0 .. offsets-1.

    Shape (offsets,) + shape(t).  The recursion is evaluated bottom-up from
    offsets*2**chi kernel values, so every intermediate (level, offset) pair
    is computed exactly once.
    """
    if chi < 0 or offsets < 1:
        raise ValueError("chi must be >= 0 and offsets >= 1")
    if not a > 0:
        raise ValueError("a must be positive")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    size = offsets * 2**chi
    r = a * np.arange(size).reshape((size,) + (1,) * t.ndim)
    level = np.asarray(_base_kernel(r, t[None, ...], bath, kernel, drop_log), dtype=float)
    level = np.broadcast_to(level, (size,) + t.shape)
    for _ in range(chi):
        size //= 2
        l = np.arange(size)
        level = 2 * level[2 * l] - level[np.abs(2 * l - 1)] - level[2 * l + 1]
    return level


def effective_k(chi: int, l: int, t, a: float, bath: BathSpec, **kw):
    """K^chi_l(t); broadcasts over t."""
    if l < 0:
        raise ValueError("l must be non-negative")
    out = effective_k_table(chi, l + 1, t, a, bath, **kw)[l]
    return out if out.ndim else float(out)


def decoherence_matrix(spec: RegisterSpec, bath: BathSpec, t: float, **kw) -> DecoherenceMatrix:
    """n x n Toeplitz matrix K_lm = K^chi_{|l-m|}(t)."""
    row = effective_k_table(spec.chi, spec.n, float(t), spec.a, bath, **kw)
    return DecoherenceMatrix(toeplitz(row), float(t), spec, bath)


def decoherence_coefficient(mu, nu, K: DecoherenceMatrix) -> float:
    """D_mu,nu = v^T K v with v = mu - nu."""
    v = difference_vector(mu, nu, K.n)
    return float(v @ K.entries @ v)


# ---------------------------------------------------------------------------
# long-time behaviour


def plateau(chi: int, a: float, bath: BathSpec, *, l: int = 0, rtol: float = 1e-6, max_doublings: int = 30,
            **kw) -> float:
    """t -> inf value of K^chi_l(t) for chi >= 1.

    Starts at t = 50 max(a, 1/T) and doubles t until the relative change
    drops below ``rtol``.
    """
    if chi < 1:
        raise ValueError("K^0 grows without bound; the plateau needs chi >= 1")
    temp = bath.temperature
    t = 50 * max(a, 1 / temp) if temp > 0 else 50 * a
    prev = effective_k(chi, l, t, a, bath, **kw)
    for _ in range(max_doublings):
        t *= 2
        cur = effective_k(chi, l, t, a, bath, **kw)
        if abs(cur - prev) <= rtol * abs(cur):
            return cur
        prev = cur
    raise ConvergenceError(f"K^{chi}_{l}(t) did not settle to rtol={rtol} by t={t:g}")


def plateau_limit(chi: int, a: float, bath: BathSpec, *, l: int = 0) -> float:
    """Closed-form plateau of K^chi_l in the large-cutoff limit.

    The term linear in t is common to every distance and cancels in the
    recursion; what remains are the constant offsets of the long-time
    expansions of K(r, t).
    """
    if chi < 1:
        raise ValueError("chi must be >= 1")
    alpha, om, temp = bath.alpha, bath.omega_c, bath.temperature
    r = a * np.arange(1, (l + 1) * 2**chi)
    if temp > 0:
        x = 2 * np.pi * temp * r
        base = (-alpha * np.pi * temp * r / 2 + alpha * np.pi / (12 * temp * r)
                - alpha / (2 * np.pi * temp * r) * dilog(np.exp(-x)))
        level = np.concatenate([[alpha * math.log(om / (2 * np.pi * temp))], base])
    else:
        level = np.concatenate([[alpha * math.log(om)], alpha * (1 - np.log(r))])
    for _ in range(chi):
        size = level.size // 2
        i = np.arange(size)
        level = 2 * level[2 * i] - level[np.abs(2 * i - 1)] - level[2 * i + 1]
    return float(level[l])


def k1_asymptote(a: float, bath: BathSpec, *, high: float = 10.0, low: float = 0.01) -> float:
    """Plateau of K^1_0(t).

    Ta >= ``high``: alpha pi T a + 2 alpha ln(Omega / 2 pi T).
    Ta <= ``low``:  2 alpha ln(Omega a / e).
    Otherwise the recursion is evaluated at long times.
    """
    alpha, om, temp = bath.alpha, bath.omega_c, bath.temperature
    ta = temp * a
    if ta >= high:
        return alpha * np.pi * ta + 2 * alpha * math.log(om / (2 * np.pi * temp))
    if ta <= low:
        return 2 * alpha * (math.log(om * a) - 1)
    return plateau(1, a, bath)


def _k1_minus_k0(t, a, bath):
    # K^1_0 - K^0_0 = K(0,t) - 2K(a,t)
    return float(k_zero_exact(t, bath) - 2 * k_dispatch(a, t, bath))


def crossover_estimate(a: float, bath: BathSpec) -> float:
    """Analytic crossover time: a at high T, (1/pi T) ln(2 pi a^2 Omega T / e^2) at low T."""
    temp = bath.temperature
    if temp * a >= 1:
        return a
    return math.log(2 * np.pi * a * a * bath.omega_c * temp / math.e**2) / (np.pi * temp)


def crossover_time(a: float, bath: BathSpec, *, xtol: float = 1e-12) -> float:
    """Time t_c at which K^1_0(t) = K(0, t).

    Root search on [1e-3 a, 1e3 max(a, 1/T)].
    """
    temp = bath.temperature
    lo = 1e-3 * a
    hi = 1e3 * max(a, 1 / temp) if temp > 0 else 1e3 * a
    f_lo, f_hi = _k1_minus_k0(lo, a, bath), _k1_minus_k0(hi, a, bath)
    if not (f_lo > 0 > f_hi):
        raise ConvergenceError(
            f"no crossover in [{lo:g}, {hi:g}]: K1-K0 = {f_lo:.3g} .. {f_hi:.3g}"
        )
    return brentq(_k1_minus_k0, lo, hi, args=(a, bath), xtol=xtol * a, rtol=1e-14, maxiter=200)
