"""Bloch-Redfield dynamics of two spins coupled to a common bath.

Basis ordering is |s0 s1> -> index 2*s0 + s1.  Z = diag(1, -1), so with the
Zeeman term (eps/2)(Z0 + Z1) the single-spin state |0> is the excited one
and |11> is the two-spin ground state.  u = |0><1| raises, d = |1><0| lowers.

Two generators are provided, both in the interaction picture:

dephasing    R(rho) = sum_ml C(r_ml, t) (Z_m rho Z_l - Z_l Z_m rho) + h.c.
dissipative  R(rho) = sum_ml C-(r_ml, t) (u_m rho d_l - d_l u_m rho)
                           + C+(r_ml, t) (d_m rho u_l - u_l d_m rho) + h.c.

The dephasing correlator is taken from the decoherence function,
Re C = (1/4) dK/dt, which makes the master equation exact for that model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .kernel import BathSpec, k_rate

__all__ = [
    "CorrelatorPair",
    "CorrelatorTable",
    "IntegrationError",
    "Model",
    "PositivityError",
    "RateFit",
    "SpinPairSpec",
    "TwoSpinState",
    "asymptotic_rate",
    "bose_occupation",
    "correlator_numeric",
    "correlator_pm",
    "evolve",
    "rate_from_trajectory",
    "redfield_rhs_dephasing",
    "redfield_rhs_dissipative",
    "subspace_fidelity",
]


class IntegrationError(RuntimeError):
    """The ODE integrator failed (e.g. step size underflow)."""


class PositivityError(RuntimeError):
    """The density matrix acquired an eigenvalue below the positivity tolerance."""


class Model(Enum):
    DEPHASING = "Dephasing"
    DISSIPATIVE = "Dissipative"


@dataclass(frozen=True)
class SpinPairSpec:
    epsilon: float
    a: float
    bath: BathSpec

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.a >= 0:
            raise ValueError(f"a must be non-negative, got {self.a}")

    @property
    def p(self) -> float:
        return self.epsilon * self.a


# ---------------------------------------------------------------------------
# states

_I2 = np.eye(2)
_Z = np.diag([1.0, -1.0])
_U = np.array([[0.0, 1.0], [0.0, 0.0]])
_D = _U.T
_ON = {0: lambda op: np.kron(op, _I2), 1: lambda op: np.kron(_I2, op)}
Z_OPS = [_ON[l](_Z) for l in (0, 1)]
U_OPS = [_ON[l](_U) for l in (0, 1)]
D_OPS = [_ON[l](_D) for l in (0, 1)]

PSI_ANTISYMMETRIC = np.array([0, 1, -1, 0]) / math.sqrt(2)
PSI_SYMMETRIC = np.array([0, 1, 1, 0]) / math.sqrt(2)


@dataclass(frozen=True)
class TwoSpinState:
    rho: np.ndarray

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError("a two-spin state is a 4x4 matrix")
        if np.abs(rho - rho.conj().T).max() > 1e-10:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho) - 1) > 1e-10:
            raise ValueError(f"trace is {np.trace(rho).real:.12g}, expected 1")
        lam = np.linalg.eigvalsh(rho)
        if lam[0] < -1e-8:
            raise ValueError(f"density matrix has eigenvalue {lam[0]:.3g}")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def _trusted(cls, rho) -> "TwoSpinState":
        obj = object.__new__(cls)
        rho = np.array(rho, dtype=complex)
        rho.setflags(write=False)
        object.__setattr__(obj, "rho", rho)
        return obj

    @classmethod
    def from_ket(cls, psi) -> "TwoSpinState":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def antisymmetric(cls) -> "TwoSpinState":
        return cls.from_ket(PSI_ANTISYMMETRIC)

    @classmethod
    def symmetric(cls) -> "TwoSpinState":
        return cls.from_ket(PSI_SYMMETRIC)

    @classmethod
    def basis(cls, index: int) -> "TwoSpinState":
        psi = np.zeros(4)
        psi[index] = 1
        return cls.from_ket(psi)

    @classmethod
    def maximally_mixed(cls) -> "TwoSpinState":
        return cls(np.eye(4) / 4)

    @classmethod
    def random(cls, rng: np.random.Generator, rank: int = 4) -> "TwoSpinState":
        g = rng.standard_normal((4, rank)) + 1j * rng.standard_normal((4, rank))
        rho = g @ g.conj().T
        return cls(rho / np.trace(rho).real)


# ---------------------------------------------------------------------------
# correlators


class CorrelatorPair(NamedTuple):
    c_minus: complex
    c_plus: complex


def bose_occupation(epsilon: float, T: float) -> float:
    """n(eps) = 1/(exp(eps/T) - 1); zero at T = 0."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if T < 0:
        raise ValueError("T must be non-negative")
    if T == 0:
        return 0.0
    x = epsilon / T
    return math.exp(-x) / -math.expm1(-x)


def correlator_pm(r: float, t: float, spec: SpinPairSpec) -> CorrelatorPair:
    """Long-time real parts of the absorption (-) and emission (+) correlators.

    C-(0) = alpha pi n(eps), C+(0) = alpha pi (n(eps) + 1); at distance r > 0
    both acquire the factor sin(eps r)/(eps r) and vanish before t = r.
    """
    bath = spec.bath
    n = bose_occupation(spec.epsilon, bath.temperature)
    base = np.pi * bath.alpha
    if r == 0:
        factor = 1.0
    elif t < r:
        factor = 0.0
    else:
        factor = math.sin(spec.epsilon * r) / (spec.epsilon * r)
    return CorrelatorPair(factor * base * n, factor * base * (n + 1))


def _reactive_kernel(r, s, omega):
    # odd part of the bath correlator, in units of alpha
    if r == 0:
        return 2 * omega**3 * s / (1 + (omega * s) ** 2) ** 2
    lam = lambda x: omega / (1 + (omega * x) ** 2)  # noqa: E731
    return (lam(s - r) - lam(s + r)) / (2 * r)


def _piece_integrals(r, t0, t1, spec):
    """Integrals over [t0, t1] of sin/cos(eps s) times dK/dt and the odd kernel."""
    eps, bath = spec.epsilon, spec.bath
    pts = [r] if t0 < r < t1 else None
    kw = dict(limit=200, epsabs=1e-14, epsrel=1e-10, points=pts)
    rate = lambda s: float(k_rate(r, s, bath))  # noqa: E731
    odd = lambda s: _reactive_kernel(r, s, bath.omega_c)  # noqa: E731
    return np.array([
        integrate.quad(lambda s: math.sin(eps * s) * rate(s), t0, t1, **kw)[0],
        integrate.quad(lambda s: math.cos(eps * s) * rate(s), t0, t1, **kw)[0],
        integrate.quad(lambda s: math.sin(eps * s) * odd(s), t0, t1, **kw)[0],
        integrate.quad(lambda s: math.cos(eps * s) * odd(s), t0, t1, **kw)[0],
    ])


def _assemble(r, t, spec, cumulative, include_imag):
    eps, alpha = spec.epsilon, spec.bath.alpha
    kp = float(k_rate(r, t, spec.bath))
    s_k, c_k, s_v, c_v = cumulative
    real = math.cos(eps * t) * kp / eps + s_k
    out = []
    for sign in (-1, 1):
        re = real + sign * alpha / eps * s_v
        im = sign * (math.sin(eps * t) * kp / eps - c_k) - alpha / eps * c_v if include_imag else 0.0
        out.append(complex(re, im))
    return CorrelatorPair(*out)


def correlator_numeric(r: float, t: float, spec: SpinPairSpec, *, include_imag: bool = False) -> CorrelatorPair:
    """Finite-time correlators integrated from the bath spectral density.

    Uses the same normalisation as ``correlator_pm``, so both agree once
    T t >> 1 and t > r + several 1/Omega.
    """
    if t <= 0:
        return CorrelatorPair(0j, 0j)
    return _assemble(r, t, spec, _piece_integrals(r, 0.0, t, spec), include_imag)


class CorrelatorTable:
    """Numerical correlators at distance r tabulated on [0, t_max].

    Nodes cluster around t = r where the finite-distance correlator switches
    on over a time 1/Omega; between nodes a shape-preserving cubic is used,
    separately on [0, r] and [r, t_max].
    """

    def __init__(self, r: float, t_max: float, spec: SpinPairSpec, *, nodes: int = 400,
                 include_imag: bool = False):
        self.r = r
        width = 1 / spec.bath.omega_c
        grid = set(np.linspace(0, t_max, nodes))
        if 0 < r < t_max:
            offsets = width * np.geomspace(1e-2, max(t_max / width, 1e-1), nodes // 2)
            grid |= {x for x in r + offsets if x < t_max} | {x for x in r - offsets if x > 0} | {r}
        grid = np.array(sorted(grid))
        cum = np.zeros((grid.size, 4))
        for i in range(1, grid.size):
            cum[i] = cum[i - 1] + _piece_integrals(r, grid[i - 1], grid[i], spec)
        vals = np.array([_assemble(r, t, spec, c, include_imag) for t, c in zip(grid, cum)])
        self._pieces = []
        cut = np.searchsorted(grid, r) if 0 < r < t_max else grid.size
        for sl in (slice(0, cut + 1), slice(cut, None)):
            g = grid[sl]
            if g.size >= 2:
                self._pieces.append((g[0], g[-1], PchipInterpolator(g, vals[sl].real),
                                     PchipInterpolator(g, vals[sl].imag)))

    def __call__(self, t: float) -> CorrelatorPair:
        lo, hi, re, im = self._pieces[0] if t <= self._pieces[0][1] else self._pieces[-1]
        if t < 0 or t > self._pieces[-1][1] * (1 + 1e-12):
            raise ValueError(f"t={t:g} outside the tabulated range")
        v = re(t) + 1j * im(t)
        return CorrelatorPair(complex(v[0]), complex(v[1]))


# ---------------------------------------------------------------------------
# generators

_T16 = np.arange(16).reshape(4, 4).T.ravel()  # vec(X) -> vec(X^T)


def _superop(left, right):
    # matrix of rho -> left @ rho @ right acting on row-major vec(rho)
    return np.kron(left, right.T)


def _pair_superops(a_ops, b_ops):
    """S_ml(rho) = a_m rho b_l - b_l a_m rho, grouped by |m - l|."""
    same = sum(_superop(a_ops[m], b_ops[m]) - _superop(b_ops[m] @ a_ops[m], np.eye(4)) for m in (0, 1))
    cross = sum(_superop(a_ops[m], b_ops[l]) - _superop(b_ops[l] @ a_ops[m], np.eye(4))
                for m, l in ((0, 1), (1, 0)))
    return same, cross


_DEPH = _pair_superops(Z_OPS, Z_OPS)
_ABS = _pair_superops(U_OPS, D_OPS)
_EMI = _pair_superops(D_OPS, U_OPS)


def _apply(generator, rho):
    v = generator @ np.asarray(rho, dtype=complex).ravel()
    out = v + v.conj()[_T16]
    return out.reshape(4, 4)


def _rho_of(rho):
    return rho.rho if isinstance(rho, TwoSpinState) else np.asarray(rho, dtype=complex)


def _dephasing_generator(t, spec):
    c0, ca = k_rate(np.array([0.0, spec.a]), t, spec.bath) / 4
    if spec.a == 0:
        ca = c0
    return c0 * _DEPH[0] + ca * _DEPH[1]


def _dissipative_generator(t, spec, corr=None):
    if corr is None:
        z, f = correlator_pm(0.0, t, spec), correlator_pm(spec.a, t, spec)
    else:
        z, f = corr(0.0, t), corr(spec.a, t)
    return z.c_minus * _ABS[0] + f.c_minus * _ABS[1] + z.c_plus * _EMI[0] + f.c_plus * _EMI[1]


def redfield_rhs_dephasing(rho, t: float, spec: SpinPairSpec) -> np.ndarray:
    """d rho/dt for Z-coupled spins with Re C = (1/4) dK/dt."""
    return _apply(_dephasing_generator(t, spec), _rho_of(rho))


def redfield_rhs_dissipative(rho, t: float, spec: SpinPairSpec, *, correlators=None) -> np.ndarray:
    """d rho/dt for X-coupled spins in rotating-wave approximation.

    ``correlators`` is an optional callable (r, t) -> CorrelatorPair; by
    default the long-time closed forms of ``correlator_pm`` are used.
    """
    return _apply(_dissipative_generator(t, spec, correlators), _rho_of(rho))


# ---------------------------------------------------------------------------
# integration


def _numeric_correlators(spec, t_max, include_imag):
    tables = {0.0: CorrelatorTable(0.0, t_max, spec, include_imag=include_imag)}
    if spec.a > 0:
        tables[spec.a] = CorrelatorTable(spec.a, t_max, spec, include_imag=include_imag)
    return lambda r, t: tables[r](t) if r in tables else tables[0.0](t)


def evolve(rho0, t_grid: Sequence[float], spec: SpinPairSpec, model: Model | str = Model.DISSIPATIVE, *,
           numeric_correlators: bool = False, include_imag: bool = False, rtol: float = 1e-10,
           atol: float = 1e-12, positivity_tol: float = 1e-6) -> list[TwoSpinState]:
    """Integrate d rho/dt = R_t(rho) and return the states on ``t_grid``.

    ``t_grid`` must start at 0.  The integration is split at t = a, where
    the cross-spin correlator switches on, and 20/Omega either side of it.  Trace and Hermiticity are
    checked on output; an eigenvalue below ``-positivity_tol`` raises
    PositivityError.
    """
    model = Model(model) if isinstance(model, str) else model
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 1 or t_grid[0] != 0:
        raise ValueError("t_grid must be a 1-d array starting at 0")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    rho0 = rho0 if isinstance(rho0, TwoSpinState) else TwoSpinState(rho0)
    t_end = float(t_grid[-1])

    if model is Model.DEPHASING:
        gen = lambda t: _dephasing_generator(t, spec)  # noqa: E731
    else:
        corr = _numeric_correlators(spec, t_end, include_imag) if numeric_correlators else None
        gen = lambda t: _dissipative_generator(t, spec, corr)  # noqa: E731

    def rhs(t, y):
        v = y[:16] + 1j * y[16:]
        w = gen(t) @ v
        w = w + w.conj()[_T16]
        return np.concatenate([w.real, w.imag])

    # the cross correlator switches on over ~1/Omega around t = a; give that
    # ramp its own pieces so the stepper cannot stride across it
    ramp = 20.0 / spec.bath.omega_c
    inner = {spec.a - ramp, spec.a, spec.a + ramp} if spec.a > 0 else set()
    breaks = [0.0, *sorted(b for b in inner if 0 < b < t_end), t_end]
    y = np.concatenate([rho0.rho.real.ravel(), rho0.rho.imag.ravel()])
    out = [y]
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        inside = t_grid[(t_grid > lo) & (t_grid <= hi)]
        if hi <= lo:
            continue
        sol = integrate.solve_ivp(rhs, (lo, hi), y, method="DOP853", t_eval=inside if inside.size else None,
                                  rtol=rtol, atol=atol, dense_output=True)
        if not sol.success:
            raise IntegrationError(f"integration failed on [{lo:g}, {hi:g}]: {sol.message}")
        if inside.size:
            out.extend(sol.y.T)
        y = sol.sol(hi)

    states = []
    for t, yy in zip(t_grid, out):
        rho = (yy[:16] + 1j * yy[16:]).reshape(4, 4)
        if abs(np.trace(rho) - 1) > 1e-8:
            raise IntegrationError(f"trace drifted to {np.trace(rho).real:.12g} at t={t:g}")
        lam = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
        if lam[0] < -positivity_tol:
            raise PositivityError(f"eigenvalue {lam[0]:.3g} at t={t:g}; the Redfield generator left the "
                                  "physical state space (check eps t >> 1 and weak coupling)")
        states.append(TwoSpinState._trusted(rho))
    return states


def subspace_fidelity(states) -> list[float]:
    """<psi0| rho |psi0> with psi0 = (|01> - |10>)/sqrt(2)."""
    psi = PSI_ANTISYMMETRIC
    return [float((psi @ _rho_of(s) @ psi).real) for s in states]


def state_fidelity(states, psi) -> list[float]:
    psi = np.asarray(psi, dtype=complex)
    return [float((psi.conj() @ _rho_of(s) @ psi).real) for s in states]


# ---------------------------------------------------------------------------
# rates


def asymptotic_rate(spec: SpinPairSpec) -> tuple[float, float]:
    """(gamma0, gamma1): single-spin rate and decay rate of the antisymmetric pair."""
    n = bose_occupation(spec.epsilon, spec.bath.temperature)
    gamma0 = 2 * np.pi * spec.bath.alpha * (n + 0.5)
    p = spec.p
    sinc = 1.0 if p == 0 else math.sin(p) / p
    return gamma0, 2 * (1 - sinc) * gamma0


class RateFit(NamedTuple):
    rate: float
    residual: float


def rate_from_trajectory(times, fidelities, *, t_min: float = -np.inf, t_max: float = np.inf,
                         min_samples: int = 10) -> RateFit:
    """Decay rate -d ln F/dt from a least-squares line over [t_min, t_max].

    ``residual`` is the root-mean-square deviation of ln F from the line.
    """
    t = np.asarray(times, dtype=float)
    f = np.asarray(fidelities, dtype=float)
    sel = (t >= t_min) & (t <= t_max)
    if sel.sum() < min_samples:
        raise ValueError(f"fit window holds {sel.sum()} samples, need at least {min_samples}")
    if np.any(f[sel] <= 0):
        raise ValueError("fidelities must be positive to fit ln F")
    x, y = t[sel], np.log(f[sel])
    slope, icpt = np.polyfit(x, y, 1)
    res = y - (slope * x + icpt)
    return RateFit(float(-slope), float(np.sqrt(np.mean(res**2))))
