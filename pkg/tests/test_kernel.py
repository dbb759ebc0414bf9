import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from encoded_registers.kernel import (
    BathSpec,
    ConvergenceError,
    Regime,
    dilog,
    k_dispatch,
    k_finite_exact,
    k_finite_limit,
    k_high_temperature,
    k_quadrature,
    k_rate,
    k_zero_exact,
    log_abs_gamma_ratio,
    select_regime,
)

# K(r, t) for alpha = 1, Omega = 1e6, from 40-digit mpmath evaluation of
# the cutoff-exact distance average of the zero-distance form
FROZEN = [
    # r, t, T, K
    (1e-5, 1.0, 1.0, 13.66268258693063),
    (1e-5, 30.0, 2.0, 198.3253538139853),
    # t << r, where the second difference of the antiderivative cancels
    (4.6095326995416706, 1.801049324583247e-4, 0.09510894659261601, 1.1942154074405695e-09),
    (0.1649479604473794, 3.4117206507202957e-4, 0.06895301270136077, 2.139972110685619e-06),
]


def test_bath_validation():
    with pytest.raises(ValueError):
        BathSpec(0.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        BathSpec(1.0, -1.0, 1.0)
    with pytest.raises(ValueError):
        BathSpec(1.0, 1.0, -0.1)
    with pytest.raises(ValueError):
        k_zero_exact(1.0, BathSpec(1.0, 10.0, 1.0, s=0.5))
    with pytest.raises(ValueError):
        k_finite_exact(1.0, 1.0, BathSpec(1.0, 10.0, 1.0, s=3))


# ---------------------------------------------------------------------------
# special functions


def test_dilog_endpoints():
    assert dilog(0.0) == 0.0
    assert dilog(1.0) == pytest.approx(math.pi**2 / 6, rel=1e-15)


def test_dilog_half_against_series_and_identity():
    series = math.fsum(0.5**j / j**2 for j in range(1, 80))
    identity = math.pi**2 / 12 - math.log(2) ** 2 / 2
    assert dilog(0.5) == pytest.approx(series, rel=1e-14)
    assert dilog(0.5) == pytest.approx(identity, rel=1e-14)


def test_dilog_reflection_identity():
    x = np.linspace(0.01, 0.99, 50)
    lhs = dilog(x) + dilog(1 - x)
    rhs = math.pi**2 / 6 - np.log(x) * np.log(1 - x)
    assert np.max(np.abs(lhs - rhs)) < 1e-11


def test_dilog_domain():
    for bad in (-0.1, 1.1, float("nan")):
        with pytest.raises(ValueError):
            dilog(bad)


@given(st.floats(0.0, 1.0))
def test_dilog_matches_mpmath(x):
    assert dilog(x) == pytest.approx(float(mpmath.polylog(2, x)), rel=1e-12, abs=1e-300)


def test_log_abs_gamma_ratio_trivial():
    assert log_abs_gamma_ratio(1.0, 0.0) == 0.0
    assert log_abs_gamma_ratio(0.5, 0.0) == 0.0


@pytest.mark.parametrize("a,b", [(0.001, 1.0), (1e-6, 3.0), (2.5, 40.0), (0.3, -7.0)])
def test_log_abs_gamma_ratio_against_mpmath(a, b):
    mpmath.mp.dps = 40
    ref = mpmath.log(abs(mpmath.gamma(a))) - mpmath.log(abs(mpmath.gamma(mpmath.mpc(a, -b))))
    assert log_abs_gamma_ratio(a, b) == pytest.approx(float(ref), rel=1e-10)


# ---------------------------------------------------------------------------
# zero distance


def test_zero_distance_vanishes_at_t0():
    assert k_zero_exact(0.0, BathSpec(1.0, 1e3, 1.0)) == 0.0


def test_zero_distance_zero_temperature():
    bath = BathSpec(0.7, 50.0, 0.0)
    t = np.array([0.1, 1.0, 10.0])
    assert np.allclose(k_zero_exact(t, bath), 0.35 * np.log1p((50 * t) ** 2), rtol=1e-15)


def test_zero_distance_small_and_large_time_limits():
    bath = BathSpec(1.0, 1e3, 1.0)
    t = 1e-2
    assert k_zero_exact(t, bath) == pytest.approx(0.5 * math.log1p((t * 1e3) ** 2), rel=1e-2)
    t = 100.0
    large = math.pi * t + math.log(1e3 / (2 * math.pi))
    assert k_zero_exact(t, bath) == pytest.approx(large, rel=1e-2)


def test_zero_distance_against_quadrature_example():
    bath = BathSpec(1.0, 1000.0, 1.0)
    q = k_quadrature(0.0, 1.0, bath)
    assert k_zero_exact(1.0, bath) == pytest.approx(q.value, rel=1e-6)
    assert q.abserr < 1e-8 * q.value


def test_zero_distance_against_thermal_split():
    # the vacuum part integrates in closed form; the thermal part decays on the scale T
    from scipy import integrate

    for t, temp in [(0.0015, 1.36), (0.03, 0.05), (3.0, 2.0)]:
        om = 1e6
        f = lambda w: (1 / math.tanh(w / (2 * temp)) - 1) * 2 * math.sin(w * t / 2) ** 2 / w * math.exp(-w / om)
        thermal = integrate.quad(f, 0, 200 * temp, limit=1000, epsabs=0, epsrel=1e-13)[0]
        ref = thermal + 0.5 * math.log1p((t * om) ** 2)
        assert k_zero_exact(t, BathSpec(1.0, om, temp)) == pytest.approx(ref, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3), st.floats(-2, 1), st.floats(1, 5))
def test_zero_distance_nonnegative_and_monotone(log_t, log_temp, log_om):
    bath = BathSpec(1.0, 10**log_om, 10**log_temp)
    t = 10**log_t * np.array([1.0, 1.01, 1.5, 3.0])
    k = k_zero_exact(t, bath)
    assert np.all(k >= 0)
    assert np.all(np.diff(k) >= -1e-12 * k[-1])


# ---------------------------------------------------------------------------
# finite distance


@pytest.mark.parametrize("r,t,temp,ref", FROZEN)
def test_finite_frozen_values(r, t, temp, ref):
    bath = BathSpec(1.0, 1e6, temp)
    assert k_finite_exact(r, t, bath) == pytest.approx(ref, rel=1e-9)
    assert k_quadrature(r, t, bath).value == pytest.approx(ref, rel=1e-7)


def test_finite_vanishes_at_t0():
    bath = BathSpec(1.0, 1e4, 3.0)
    assert k_finite_exact(0.2, 0.0, bath) == 0.0
    assert k_finite_limit(0.2, 0.0, bath) == 0.0


def test_finite_rejects_below_threshold():
    bath = BathSpec(1.0, 1e3, 1.0)
    with pytest.raises(ValueError):
        k_finite_exact(5e-3, 1.0, bath)
    assert k_finite_exact(5e-3, 1.0, bath, threshold=1.0) > 0


@pytest.mark.parametrize("r,t,temp,om", [(1.0, 5.0, 5.0, 1e6), (1.0, 0.5, 5.0, 1e4), (0.3, 0.31, 0.2, 1e5)])
def test_finite_against_quadrature(r, t, temp, om):
    bath = BathSpec(1.0, om, temp)
    q = k_quadrature(r, t, bath)
    assert k_finite_exact(r, t, bath) == pytest.approx(q.value, rel=1e-8)


def test_finite_zero_temperature_against_quadrature():
    bath = BathSpec(1.0, 1e3, 0.0)
    for r, t in [(0.1, 1.0), (1.0, 0.4), (0.5, 0.5)]:
        assert k_finite_exact(r, t, bath) == pytest.approx(k_quadrature(r, t, bath).value, rel=1e-8)


def test_near_field_switch_is_continuous():
    for temp in (0.0, 2.0):
        bath = BathSpec(1.0, 1e6, temp)
        lo, hi = k_finite_exact(1.0, 0.25 * (1 - 1e-9), bath), k_finite_exact(1.0, 0.25 * (1 + 1e-9), bath)
        assert abs(hi - lo) < 5e-9 * hi  # K ~ t^2 moves by 4e-9 across the step


def test_near_field_vectorised():
    bath = BathSpec(1.0, 1e6, 0.3)
    r, t = np.array([1.0, 2.0, 5.0, 1.0]), np.array([0.01, 0.2, 0.05, 3.0])
    vec = k_finite_exact(r, t, bath)
    for i in range(4):
        assert vec[i] == pytest.approx(k_quadrature(r[i], t[i], bath).value, rel=1e-9)


def test_continuity_at_light_cone():
    bath = BathSpec(1.0, 1e4, 2.0)
    for r in (0.1, 1.0, 7.0):
        d = 1e-6 * r
        lo, hi = k_finite_exact(r, r - d, bath), k_finite_exact(r, r + d, bath)
        mid = k_finite_exact(r, r, bath)
        assert abs(hi - lo) < 1e-8 * mid + 2 * d * float(k_rate(r, r, bath))


def test_limit_form_continuity_and_cutoff_convergence():
    bath = BathSpec(1.0, 1e8, 2.0)
    r = 1.0
    lo, hi = k_finite_limit(r, r * (1 - 1e-9), bath), k_finite_limit(r, r * (1 + 1e-9), bath)
    assert abs(hi - lo) < 1e-7 * hi
    # the large-cutoff form differs from the exact one by O(1/(Omega r))
    for om in (1e4, 1e6):
        b = BathSpec(1.0, om, 2.0)
        for t in (0.3, 3.0):
            rel = abs(k_finite_limit(r, t, b) / k_finite_exact(r, t, b) - 1)
            assert rel < 1.0 / (om * r)


def test_far_field_limit():
    bath = BathSpec(1.0, 1e6, 5.0)
    r, t = 30.0, 1.0
    assert k_finite_exact(r, t, bath) == pytest.approx(math.pi * 5 * t**2 / (2 * r), rel=1e-2)


@settings(max_examples=40, deadline=None)
@given(st.floats(20, 400), st.floats(20, 400), st.floats(0.5, 5))
def test_high_temperature_matches_exact(tr, tdiff, temp):
    # T r >= 20 and T |t - r| >= 20, both orderings; dilogarithms are ~e^-125
    bath = BathSpec(0.1, 1e7, temp)
    r = tr / temp
    for t in (r + tdiff / temp, max(r - tdiff / temp, 0.0)):
        if t <= 0 or abs(t - r) * temp < 20:
            continue
        exact = k_finite_exact(r, t, bath)
        approx = k_high_temperature(r, t, bath)
        if t > r:
            # the constant inside the light cone that the linear form omits
            approx += 0.1 * math.pi / (12 * temp * r)
        assert abs(exact - approx) <= 1e-5 * exact


def test_high_temperature_branches():
    bath = BathSpec(0.1, 1e4, 5.0)
    g = 0.1 * math.pi * 5
    assert k_high_temperature(0.0, 2.0, bath) == pytest.approx(g * 2 + 0.1 * math.log(1e4 / (10 * math.pi)))
    assert k_high_temperature(0.0, 2.0, bath, drop_log=True) == pytest.approx(g * 2)
    assert k_high_temperature(3.0, 3.0, bath) == pytest.approx(g * 1.5)
    assert k_high_temperature(2.0, 10.0, bath) == pytest.approx(g * 9)
    assert k_high_temperature(10.0, 2.0, bath) == pytest.approx(g * 4 / 20)


def test_high_temperature_example_against_exact():
    bath = BathSpec(0.1, 1e6, 5.0)
    exact = k_finite_exact(2.0, 10.0, bath)
    # dropped terms: pi alpha/(12 T r) and the dilogarithms, ~ alpha/(T r)
    assert abs(k_high_temperature(2.0, 10.0, bath) - exact) < 0.1 / (5 * 2)


# ---------------------------------------------------------------------------
# derivative


def test_rate_against_finite_differences():
    h = 1e-5
    for temp in (0.0, 0.7):
        bath = BathSpec(0.3, 50.0, temp)
        for r in (0.0, 0.5, 2.0):
            for t in (0.3, 1.0, 3.0):
                fd = (k_dispatch(r, t + h, bath) - k_dispatch(r, t - h, bath)) / (2 * h)
                assert float(k_rate(r, t, bath)) == pytest.approx(fd, rel=1e-7, abs=1e-9)


def test_rate_vanishes_at_t0():
    bath = BathSpec(1.0, 100.0, 1.0)
    assert np.all(k_rate(np.array([0.0, 1.0]), 0.0, bath) == 0)


# ---------------------------------------------------------------------------
# quadrature and dispatch


def test_quadrature_t0():
    q = k_quadrature(1.0, 0.0, BathSpec(1.0, 10.0, 1.0))
    assert q.value == 0.0 and q.abserr == 0.0


@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
def test_quadrature_reports_failure(monkeypatch):
    import warnings

    from scipy import integrate

    real_quad = integrate.quad

    def stalling_quad(*args, **kw):
        warnings.warn("The maximum number of subdivisions has been achieved.", integrate.IntegrationWarning)
        return real_quad(*args, **kw)

    monkeypatch.setattr(integrate, "quad", stalling_quad)
    with pytest.raises(ConvergenceError, match="subdivisions"):
        k_quadrature(1.0, 1.0, BathSpec(1.0, 1e6, 1.0))


def test_dispatch_regimes():
    bath = BathSpec(1.0, 1e3, 1.0)
    assert select_regime(0.0, bath) is Regime.ZERO_DISTANCE_EXACT
    assert select_regime(20 / 1e3, bath) is Regime.FINITE_DISTANCE_EXACT
    assert select_regime(2 / 1e3, bath) is Regime.QUADRATURE
    assert k_dispatch(0.0, 1.5, bath) == k_zero_exact(1.5, bath)
    assert k_dispatch(0.02, 1.5, bath) == k_finite_exact(0.02, 1.5, bath)
    assert k_dispatch(0.002, 1.5, bath) == k_quadrature(0.002, 1.5, bath).value


def test_dispatch_continuous_across_threshold():
    bath = BathSpec(1.0, 1e3, 1.0)
    r = 10 / 1e3
    below = k_dispatch(r * (1 - 1e-9), 1.0, bath)
    above = k_dispatch(r, 1.0, bath)
    assert below == pytest.approx(above, rel=1e-5)


def test_dispatch_broadcasts():
    bath = BathSpec(1.0, 1e3, 1.0)
    out = k_dispatch(np.array([[0.0], [0.005], [1.0]]), np.array([0.5, 2.0]), bath)
    assert out.shape == (3, 2)
    assert out[2, 1] == k_finite_exact(1.0, 2.0, bath)
