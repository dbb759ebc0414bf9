"""Decoherence function K(r, t) of an ohmic bosonic bath.

For a pair of spins at distance ``r`` the decoherence function is

    K(r, t) = alpha * int_0^inf dw (1 - cos wt)/w * coth(w/2T)
                     * sin(wr)/(wr) * exp(-w/Omega)

Natural units (c = hbar = k_B = 1) are used throughout, so lengths,
times and inverse energies share one dimension.

Several evaluation routes are provided:

* ``k_zero_exact``   -- closed form at r = 0 (log-gamma).
* ``k_finite_exact`` -- closed form at r > 0 with the cutoff kept
  (Hurwitz zeta derivative); exact for every r > 0.
* ``k_finite_limit`` -- the Omega -> inf closed form built from
  dilogarithms; accurate to O(1/(Omega r)).
* ``k_high_temperature`` -- the piecewise linear/quadratic high-T form.
* ``k_quadrature``   -- direct oscillatory quadrature of the integral,
  used as the independent oracle and below the finite-distance threshold.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np
from scipy import integrate
from scipy.special import bernoulli, loggamma, psi, spence

__all__ = [
    "BathSpec",
    "ConvergenceError",
    "QuadResult",
    "Regime",
    "dilog",
    "k_dispatch",
    "k_finite_exact",
    "k_finite_limit",
    "k_high_temperature",
    "k_quadrature",
    "k_rate",
    "k_zero_exact",
    "log_abs_gamma_ratio",
    "select_regime",
]

DEFAULT_THRESHOLD = 10.0


class ConvergenceError(RuntimeError):
    """Raised when a numerical integration does not reach its tolerance."""


@dataclass(frozen=True)
class BathSpec:
    """Ohmic-family bath, J(w) = alpha * w**s * exp(-w/omega_c)."""

    alpha: float
    omega_c: float
    temperature: float
    s: float = 1.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.omega_c > 0:
            raise ValueError(f"omega_c must be positive, got {self.omega_c}")
        if not self.temperature >= 0:
            raise ValueError(f"temperature must be non-negative, got {self.temperature}")
        if not self.s >= 0:
            raise ValueError(f"s must be non-negative, got {self.s}")

    def require_ohmic(self) -> None:
        if self.s != 1:
            raise ValueError(f"closed forms are only valid for an ohmic bath (s=1), got s={self.s}")


class Regime(Enum):
    ZERO_DISTANCE_EXACT = "ZeroDistanceExact"
    FINITE_DISTANCE_EXACT = "FiniteDistanceExact"
    HIGH_TEMPERATURE = "HighTemperature"
    QUADRATURE = "Quadrature"


class QuadResult(NamedTuple):
    value: float
    abserr: float


# ---------------------------------------------------------------------------
# special functions


_DILOG_J = np.arange(1.0, 64.0)


def dilog(x):
    """Dilogarithm Li2(x) = sum_j x**j / j**2 on 0 <= x <= 1."""
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)) or np.any(np.isnan(x)):
        raise ValueError("dilog is only defined here for 0 <= x <= 1")
    # spence(1 - x) loses relative accuracy as x -> 0 through the rounding of
    # 1 - x; below 1/2 the power series converges quickly instead
    small = x < 0.5
    xs = np.where(small, x, 0.0)[..., None]
    series = np.sum(xs ** _DILOG_J / _DILOG_J**2, axis=-1)
    out = np.where(small, series, spence(1.0 - np.where(small, 0.5, x)))
    return out if out.ndim else float(out)


def log_abs_gamma_ratio(a, b):
    """Return ln|Gamma(a)| - ln|Gamma(a - i b)| for real a > 0."""
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ValueError("a must be positive")
    b = np.asarray(b, dtype=float)
    out = loggamma(a + 0j).real - loggamma(a - 1j * b).real
    return out if out.ndim else float(out)


_BERNOULLI = bernoulli(24)


def _zeta_prime_m1(z):
    """d/ds zeta(s, z) at s = -1 for complex z with Re z > 0.

    Upward recurrence to |z| >= 20, then the large-|z| asymptotic series.
    """
    z = np.asarray(z, dtype=complex)
    shift = np.maximum(0, np.ceil(20.0 - np.abs(z))).astype(int)
    acc = np.zeros_like(z)
    for k in range(int(shift.max()) if shift.size else 0):
        w = z + k
        acc -= np.where(k < shift, w * np.log(np.where(k < shift, w, 1.0)), 0.0)
    w = z + shift
    lw = np.log(w)
    val = 1.0 / 12 - w * w / 4 + (w * w / 2 - w / 2 + 1.0 / 12) * lw
    winv2 = 1.0 / (w * w)
    p = winv2
    for k in range(1, 11):
        val -= _BERNOULLI[2 * k + 2] / ((2 * k + 2) * (2 * k + 1) * (2 * k)) * p
        p = p * winv2
    return val + acc


# ---------------------------------------------------------------------------
# closed forms


def k_zero_exact(t, bath: BathSpec):
    """Zero-distance decoherence function K(0, t).

    K(0,t) = 2 alpha ln|Gamma(T/Omega) / Gamma(T/Omega - i t T)|
             - (alpha/2) ln(1 + t**2 Omega**2)

    At T = 0 only the vacuum term (alpha/2) ln(1 + t**2 Omega**2) remains.
    """
    bath.require_ohmic()
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    alpha, om, temp = bath.alpha, bath.omega_c, bath.temperature
    vac = 0.5 * alpha * np.log1p((t * om) ** 2)
    if temp == 0:
        out = vac
    else:
        out = 2 * alpha * log_abs_gamma_ratio(temp / om, t * temp) - vac
        out = np.where(t == 0, 0.0, out)
    return out if np.ndim(out) else float(out)


def _antiderivative(u, bath: BathSpec):
    """F(u) with r K(r,t) = F(r+t)/2 + F(r-t)/2 - F(r), up to terms linear in u."""
    alpha, om, temp = bath.alpha, bath.omega_c, bath.temperature
    u = np.asarray(u, dtype=float)
    if temp == 0:
        w = u + 1j / om
        return alpha * (w * np.log(-1j * w)).real
    x = temp / om
    return (
        2 * alpha / temp * _zeta_prime_m1(x - 1j * temp * u).imag
        - 0.5 * alpha * u * np.log1p((u * om) ** 2)
        - alpha / om * np.arctan(u * om)
    )


def _antiderivative_slope(u, bath: BathSpec):
    """dF/du up to an additive constant."""
    alpha, om, temp = bath.alpha, bath.omega_c, bath.temperature
    u = np.asarray(u, dtype=float)
    if temp == 0:
        return 0.5 * alpha * np.log1p((u * om) ** 2)
    return -2 * alpha * loggamma(temp / om - 1j * temp * u).real - 0.5 * alpha * np.log1p((u * om) ** 2)


def _antiderivative_curvature(u, bath: BathSpec):
    """d^2F/du^2, free of the cancellation in second differences of F."""
    alpha, om, temp = bath.alpha, bath.omega_c, bath.temperature
    u = np.asarray(u, dtype=float)
    lorentz = alpha * u * om**2 / (1 + (u * om) ** 2)
    if temp == 0:
        return lorentz
    return -2 * alpha * temp * psi(temp / om - 1j * temp * u).imag - lorentz


# second differences of F at t < r/4 go through the curvature on these nodes
_NEAR_FIELD = 0.25
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


def _second_difference_near(r, t, bath):
    # F(r+t)/2 + F(r-t)/2 - F(r) = (1/2) int_0^t (t - s) [F''(r+s) + F''(r-s)] ds
    s = 0.5 * t[:, None] * (_GL_X + 1)
    curv = _antiderivative_curvature(r[:, None] + s, bath) + _antiderivative_curvature(r[:, None] - s, bath)
    return 0.25 * t * (((t[:, None] - s) * curv) @ _GL_W)


def _check_threshold(r, bath, threshold):
    if np.any(r * bath.omega_c < threshold):
        raise ValueError(
            f"finite-distance closed form needs r >= {threshold}/omega_c; "
            "use k_zero_exact or k_quadrature below that"
        )


def k_finite_exact(r, t, bath: BathSpec, *, threshold: float = DEFAULT_THRESHOLD):
    """Finite-distance decoherence function K(r, t) for r >= threshold/Omega.

    Exact in the cutoff: the sinc factor is written as a distance average of
    cos(w s), which turns K(r, t) into a combination of antiderivatives of the
    zero-distance log-gamma form, i.e. of zeta'(-1, T/Omega - i T u).
    Broadcasts over ``r`` and ``t``.
    """
    bath.require_ohmic()
    r, t = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    _check_threshold(r, bath, threshold)
    F = lambda u: _antiderivative(u, bath)  # noqa: E731
    out = (0.5 * F(r + t) + 0.5 * F(r - t) - F(r)) / r
    near = (t > 0) & (t < _NEAR_FIELD * r)
    if np.any(near):
        out = np.array(out, dtype=float)
        out[near] = _second_difference_near(r[near], t[near], bath) / r[near]
    out = np.where(t == 0, 0.0, out)
    return out if out.ndim else float(out)


def k_finite_limit(r, t, bath: BathSpec):
    """Omega -> inf closed form of K(r, t) for r > 0 (contour integration).

    With f(s) = Li2(exp(-2 pi T s)):

    r < t:  alpha pi T (t - r/2 + 1/(12 T**2 r))
            + alpha/(4 pi T r) [f(t+r) - f(t-r) - 2 f(r)]
    r > t:  alpha pi T t**2/(2r) + alpha/(4 pi T r) [f(t+r) + f(r-t) - 2 f(r)]

    At T = 0 the limit is (alpha/r)[(r+t)ln(r+t)/2 + (r-t)ln|r-t|/2 - r ln r].
    Relative error against the full kernel is O(1/(Omega r)).
    """
    bath.require_ohmic()
    r, t = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
    if np.any(r <= 0):
        raise ValueError("r must be positive")
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    alpha, temp = bath.alpha, bath.temperature
    if temp == 0:
        xlogx = lambda v: np.where(v > 0, v * np.log(np.where(v > 0, v, 1.0)), 0.0)  # noqa: E731
        out = alpha / r * (0.5 * xlogx(r + t) + 0.5 * np.sign(r - t) * xlogx(np.abs(r - t)) - xlogx(r))
        return out if out.ndim else float(out)
    f = lambda s: dilog(np.exp(-2 * np.pi * temp * s))  # noqa: E731
    pref = alpha / (4 * np.pi * temp * r)
    d = np.abs(t - r)
    inside = alpha * np.pi * temp * (t - r / 2 + 1 / (12 * temp**2 * r)) + pref * (f(t + r) - f(d) - 2 * f(r))
    outside = alpha * np.pi * temp * t**2 / (2 * r) + pref * (f(t + r) + f(d) - 2 * f(r))
    out = np.where(r < t, inside, outside)
    return out if out.ndim else float(out)


def k_high_temperature(r, t, bath: BathSpec, *, drop_log: bool = False):
    """High-temperature approximation of K(r, t).

    alpha pi T t + alpha ln(Omega / 2 pi T)   for r = 0
    alpha pi T (t - r/2)                        for 0 < r < t
    alpha pi T t**2 / (2 r)                     for r >= t

    Valid for t, r, |t - r| >> 1/T; not enforced.  ``drop_log`` omits the
    logarithmic offset of the zero-distance branch.
    """
    bath.require_ohmic()
    r, t = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
    alpha, om, temp = bath.alpha, bath.omega_c, bath.temperature
    if temp <= 0:
        raise ValueError("the high-temperature form needs T > 0")
    gamma = alpha * np.pi * temp
    offset = 0.0 if drop_log else alpha * np.log(om / (2 * np.pi * temp))
    safe_r = np.where(r > 0, r, 1.0)
    out = np.where(
        r == 0,
        gamma * t + offset,
        np.where(r < t, gamma * (t - r / 2), gamma * t**2 / (2 * safe_r)),
    )
    out = np.where(t == 0, 0.0, out)
    return out if out.ndim else float(out)


def k_rate(r, t, bath: BathSpec):
    """Time derivative dK(r, t)/dt from the closed forms, any r >= 0.

    Four times the real part of the integrated bath correlator, which is
    what a dephasing master equation needs.
    """
    bath.require_ohmic()
    r, t = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
    alpha, om, temp = bath.alpha, bath.omega_c, bath.temperature
    vac = alpha * t * om**2 / (1 + (t * om) ** 2)
    if temp == 0:
        zero = vac
    else:
        zero = -2 * alpha * temp * psi(temp / om - 1j * temp * t).imag - vac
    safe_r = np.where(r > 0, r, 1.0)
    dF = lambda u: _antiderivative_slope(u, bath)  # noqa: E731
    finite = (0.5 * dF(safe_r + t) - 0.5 * dF(safe_r - t)) / safe_r
    out = np.where(r == 0, zero, finite)
    out = np.where(t == 0, 0.0, out)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# quadrature oracle

_SUPPORT = 60.0  # exp(-60) ~ 1e-26: integrand negligible beyond 60 Omega
_PANEL_CYCLES = 16 * np.pi  # eight periods


def _quad(func, a, b, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(func, a, b, **kw)
        except integrate.IntegrationWarning as exc:
            raise ConvergenceError(str(exc).splitlines()[0]) from exc
    return val, err


def _logquad(func, a, b, epsrel):
    """Integral of a non-oscillating function over [a, b], substituting w = e^u."""
    if b <= a:
        return 0.0, 0.0
    return _quad(lambda u: func(math.exp(u)) * math.exp(u), math.log(a), math.log(b), limit=400, epsabs=0, epsrel=epsrel)


def _qawf(g, w, k, kind, epsabs, stop):
    # QAWF only honours an absolute tolerance; it cannot beat round-off on the
    # L1 mass of the (positive) amplitude, and is relaxed stepwise if the
    # cycle extrapolation stalls
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        mass = integrate.quad(lambda u: g(math.exp(u)) * math.exp(u), math.log(w), math.log(max(stop, 2 * w)),
                              limit=100, epsrel=1e-3)[0]
    epsabs = max(epsabs, 100 * np.finfo(float).eps * mass)
    for attempt in range(4):
        try:
            return _quad(g, w, np.inf, weight=kind, wvar=k, epsabs=epsabs * 10**attempt, limlst=200)
        except ConvergenceError:
            if attempt == 3:
                raise


def _fourier_tail(g, w1, k, kind, stop, epsabs, epsrel):
    """Integral over [w1, inf) of g(w) * sin/cos(k w) for smooth decaying g."""
    if k == 0:
        if kind == "sin":
            return 0.0, 0.0
        return _logquad(g, w1, stop, epsrel)
    if k * w1 >= np.pi:
        return _qawf(g, w1, k, kind, epsabs, stop)
    w2 = _PANEL_CYCLES / k
    trig = np.sin if kind == "sin" else np.cos
    v1, e1 = _logquad(lambda w: g(w) * trig(k * w), w1, min(w2, stop), epsrel)
    if w2 >= stop:
        return v1, e1
    v2, e2 = _qawf(g, w2, k, kind, epsabs, stop)
    return v1 + v2, e1 + e2


def k_quadrature(r: float, t: float, bath: BathSpec, *, epsrel: float = 1e-10) -> QuadResult:
    """Direct numerical quadrature of the frequency integral for K(r, t).

    The low-frequency panel (eight periods of the fastest oscillation) is
    integrated adaptively.  Above it the oscillating factors are handed to
    QUADPACK's Fourier routines (QAWO on finite ranges, QAWF with cycle
    extrapolation on [w, inf)).  When r and t differ by more than a factor 50
    the slower factor is kept in the amplitude to avoid cancellation between
    product-to-sum terms.

    Returns ``QuadResult(value, abserr)``; raises ConvergenceError if any
    panel fails to converge.
    """
    r, t = float(r), float(t)
    if r < 0 or t < 0:
        raise ValueError("r and t must be non-negative")
    if t == 0:
        return QuadResult(0.0, 0.0)
    alpha, om, temp = bath.alpha, bath.omega_c, bath.temperature
    stop = _SUPPORT * om

    def bath_factor(w):
        th = 1.0 if temp == 0 else 1.0 / math.tanh(w / (2 * temp))
        return th * math.exp(-w / om)

    def full(w):
        if w == 0:
            return temp * t * t
        s = math.sin(w * r) / (w * r) if r > 0 else 1.0
        return 2 * math.sin(w * t / 2) ** 2 / w * bath_factor(w) * s

    fast = max(r, t)
    w1 = min(_PANEL_CYCLES / fast, stop)
    # piecewise over geometric breakpoints: a single adaptive call can
    # misjudge convergence when the thermal scale is far below w1
    edges = {0.0, w1, *(w1 / 8.0 ** j for j in range(1, 9))}
    edges |= {p for p in (temp, om) if 0 < p < w1}
    edges = sorted(edges)
    rough = abs(integrate.quad(full, 0.0, w1, points=edges[1:-1], limit=500)[0])
    # when sinc(w r) cancels most of the panel, the round-off floor is set by
    # the L1 mass of the integrand, not by the net value
    mass = integrate.quad(lambda w: abs(full(w)), 0.0, w1, points=edges[1:-1], limit=500)[0]
    floor = 100 * np.finfo(float).eps * mass
    low, err = 0.0, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        v, e = _quad(full, a, b, limit=200, epsabs=max(1e-2 * epsrel * rough, floor), epsrel=epsrel)
        low, err = low + v, err + e
    scale = max(abs(low), 1e-300)
    epsabs = 1e-4 * epsrel * scale
    total, errs = low, [err]

    def add(coef, res):
        nonlocal total
        total += coef * res[0]
        errs.append(abs(coef) * res[1])

    if w1 < stop:
        if r == 0:
            g = lambda w: bath_factor(w) / w  # noqa: E731
            add(1.0, _logquad(g, w1, stop, epsrel))
            add(-1.0, _fourier_tail(g, w1, t, "cos", stop, epsabs, epsrel))
        elif r < t / 50:
            w2 = min(_PANEL_CYCLES / r, stop)
            amp = lambda w: bath_factor(w) * math.sin(w * r) / (w * w * r)  # noqa: E731
            add(1.0, _logquad(amp, w1, w2, epsrel))
            add(-1.0, _quad(amp, w1, w2, weight="cos", wvar=t, limit=2000, epsabs=epsabs, epsrel=epsrel))
            if w2 < stop:
                g = lambda w: bath_factor(w) / (w * w * r)  # noqa: E731
                add(1.0, _fourier_tail(g, w2, r, "sin", stop, epsabs, epsrel))
                add(-0.5, _fourier_tail(g, w2, t + r, "sin", stop, epsabs, epsrel))
                add(0.5, _fourier_tail(g, w2, t - r, "sin", stop, epsabs, epsrel))
        elif t < r / 50:
            w2 = min(_PANEL_CYCLES / t, stop)
            amp = lambda w: 2 * math.sin(w * t / 2) ** 2 * bath_factor(w) / (w * w * r)  # noqa: E731
            add(1.0, _quad(amp, w1, w2, weight="sin", wvar=r, limit=2000, epsabs=epsabs, epsrel=epsrel))
            if w2 < stop:
                g = lambda w: bath_factor(w) / (w * w * r)  # noqa: E731
                add(1.0, _fourier_tail(g, w2, r, "sin", stop, epsabs, epsrel))
                add(-0.5, _fourier_tail(g, w2, r + t, "sin", stop, epsabs, epsrel))
                add(-0.5, _fourier_tail(g, w2, r - t, "sin", stop, epsabs, epsrel))
        else:
            g = lambda w: bath_factor(w) / (w * w * r)  # noqa: E731
            add(1.0, _fourier_tail(g, w1, r, "sin", stop, epsabs, epsrel))
            add(-0.5, _fourier_tail(g, w1, r + t, "sin", stop, epsabs, epsrel))
            add(-0.5 * np.sign(r - t), _fourier_tail(g, w1, abs(r - t), "sin", stop, epsabs, epsrel))
    return QuadResult(alpha * total, alpha * sum(errs))


# ---------------------------------------------------------------------------
# dispatch


def select_regime(r: float, bath: BathSpec, *, threshold: float = DEFAULT_THRESHOLD) -> Regime:
    if r < 0:
        raise ValueError("r must be non-negative")
    if r == 0:
        return Regime.ZERO_DISTANCE_EXACT
    if r * bath.omega_c >= threshold:
        return Regime.FINITE_DISTANCE_EXACT
    return Regime.QUADRATURE


def k_dispatch(r, t, bath: BathSpec, *, threshold: float = DEFAULT_THRESHOLD):
    """K(r, t) through the most accurate available route; broadcasts."""
    r, t = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(t, dtype=float))
    if np.any(r < 0) or np.any(t < 0):
        raise ValueError("r and t must be non-negative")
    out = np.empty(r.shape)
    zero = r == 0
    finite = r * bath.omega_c >= threshold
    near = ~zero & ~finite
    if zero.any():
        out[zero] = k_zero_exact(t[zero], bath)
    if finite.any():
        out[finite] = k_finite_exact(r[finite], t[finite], bath, threshold=threshold)
    for idx in np.ndindex(r.shape):
        if near[idx]:
            out[idx] = k_quadrature(r[idx], t[idx], bath).value
    return out if out.ndim else float(out)
