import json
import math
import pathlib

import mpmath as mp
import numpy as np
import pytest
import sympy as sp
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import integrate

from fracheat import subspace as ss
from fracheat.errors import ConstantUndefinedError, DomainError
from fracheat.fracops import SampledFunction, TimeGrid, telegraph_apply
from fracheat.solutions import (
    BarenblattParams,
    Prop21Solution,
    Prop23Solution,
    TelegraphParams,
    WaveSolution,
    barenblatt_eval,
    prop21_eval,
    prop21_space,
    prop21_time,
    prop23_bracket,
    prop23_constant,
    prop23_eval,
    prop23_residual,
    prop23_source,
    prop23_valid,
    real_power,
    scan_validity,
    wave_constant,
    wave_eval,
    wave_positivity_constraint,
    wave_residual,
    wave_stated_constraint,
    wave_valid,
)

GOLDEN = json.loads((pathlib.Path(__file__).parent / "data" / "golden.json").read_text())


def test_real_power():
    assert real_power(-8.0, 1.0 / 3.0) == pytest.approx(-2.0)
    assert real_power(-8.0, 2.0 / 3.0) == pytest.approx(4.0)
    assert np.allclose(real_power(np.array([4.0, 9.0]), 0.5), [2.0, 3.0])
    with pytest.raises(DomainError):
        real_power(-1.0, 0.5)


# {{{ separable solution


def _sep(nu=0.5, gamma=1.0, lam=1.0, C1=1.0, C2=1.0):
    return Prop21Solution(TelegraphParams(gamma, lam, nu), C1, C2)


def test_prop21_initial_datum():
    s = _sep(C2=2.0)
    xs = np.linspace(0.0, 3.0, 7)
    assert np.allclose(prop21_eval(s, xs, 0.0), 2.0 * (xs + 2.0) ** 0.5, rtol=1e-15)


def test_prop21_exponential_limit():
    s = _sep(nu=1.0)
    assert prop21_eval(s, 0.0, 1.0) == pytest.approx(1.6321205588285577, abs=1e-15)
    assert prop21_eval(s, 0.0, 1.0) == pytest.approx((1 - math.exp(-1)) + 1, abs=1e-15)


def test_prop21_half_order_value():
    # cross-check against a direct 200-term series summation
    with mp.workdps(30):
        series = mp.fsum((-1) ** k * mp.rgamma(0.5 * k + 2) for k in range(200))
    expected = math.sqrt(2.0) * (float(series) + 1.0)
    assert prop21_eval(_sep(), 1.0, 1.0) == pytest.approx(expected, abs=1e-14)
    assert prop21_eval(_sep(), 1.0, 1.0) == pytest.approx(2.2004636140532616, abs=1e-14)


def test_prop21_golden():
    for r in GOLDEN["separable"]:
        s = _sep(r["nu"], r["gamma"], r["lam"], r["C1"], r["C2"])
        assert prop21_eval(s, r["x"], r["t"]) == pytest.approx(r["value"], rel=1e-13, abs=1e-14)


def test_prop21_domain():
    with pytest.raises(DomainError):
        prop21_eval(_sep(C2=1.0), -2.0, 0.5)
    with pytest.raises(DomainError):
        prop21_eval(_sep(), 0.0, -1.0)
    # odd denominator: 1/(1+gamma) = 1/3 extends to negative bases
    assert prop21_eval(_sep(gamma=2.0, C2=1.0), -9.0, 0.0) == pytest.approx(-2.0)
    with pytest.raises(DomainError):
        TelegraphParams(1.0, 1.0, 1.5)
    with pytest.raises(DomainError):
        TelegraphParams(-1.0, 1.0, 0.5)


@pytest.mark.parametrize("nu", [0.25, 0.5, 0.75])
def test_prop21_growth(nu):
    t = np.linspace(0.0, 5.0, 501)
    f = prop21_time(_sep(nu=nu), t)
    assert np.all(np.diff(f) > 0.0)


@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0, 3.0])
def test_prop21_space_factor_annihilated(gamma):
    g = sp.nsimplify(gamma)
    C = sp.Symbol("C")
    out = ss.apply_F(ss.PowerExpr.term(C, C, 1 / (1 + g)), g)
    assert out.terms == ()


@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_prop21_time_factor_ode(lam):
    # the time factor solves the flux-form telegraph ODE
    nu = 0.5
    s = _sep(nu=nu, lam=lam, C1=1.5, C2=0.5)
    errors = []
    for n in (500, 1000, 2000):
        g = TimeGrid.graded(1.0, n, 2.0 / nu)
        r = telegraph_apply(SampledFunction.sample(lambda t: prop21_time(s, t), g), lam, nu,
                            initial_slope=s.C1)
        errors.append(np.max(np.abs(r.values[g.nodes >= 0.1])))
    assert errors[0] > errors[1] > errors[2]
    assert errors[-1] <= 5e-2


def test_prop21_space_factor():
    s = Prop21Solution(TelegraphParams(1.0), 1.0, 1.0, shift=3.0)
    assert prop21_space(s, 1.0) == pytest.approx(2.0)


# }}}


# {{{ self-similar power solution


def test_prop23_zero_at_origin():
    s = Prop23Solution(TelegraphParams(2.5, 1.0, 0.5))
    assert prop23_eval(s, 0.0, 0.7) == 0.0
    assert prop23_source(s.params, 0.0, 0.7) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.2, 3.0), st.floats(0.2, 3.0), st.floats(0.2, 5.0))
def test_prop23_homogeneity(a, x, t, k):
    p = TelegraphParams(2.5, 1.3, 0.5)
    s = Prop23Solution(p)
    g = p.gamma
    assert prop23_eval(s, a * x, t) == pytest.approx(a ** (2 / g) * prop23_eval(s, x, t), rel=1e-13)
    assert prop23_source(p, x, k * t) == pytest.approx(
        k ** (-2.0 - (2.0 - p.nu) / g) * prop23_source(p, x, t), rel=1e-13)


def test_prop23_constants_golden():
    for r in GOLDEN["power_constant"]:
        p = TelegraphParams(r["gamma"], r["lam"], r["nu"])
        assert prop23_bracket(p) == pytest.approx(r["bracket"], rel=1e-13)
        assert prop23_constant(p) == pytest.approx(r["C"], rel=1e-13)


def test_prop23_validity_matches_gamma_sign():
    # gamma=2, nu=0.5: beta = -3/4, the bracket is Gamma(1/4)/Gamma(-5/4) / ...
    p = TelegraphParams(2.0, 1.0, 0.5)
    with mp.workdps(30):
        sign = mp.sign(mp.gamma(0.25) / mp.gamma(-1.25))
    assert (prop23_bracket(p) > 0) == (sign > 0)
    # 1/gamma = 1/2 has an even denominator, so only a positive bracket is real
    assert prop23_valid(p) == (sign > 0)


def test_prop23_invalid_raises():
    p = TelegraphParams(0.5, 1.0, 0.5)  # Gamma(beta + 1) = Gamma(-2): a pole
    assert not prop23_valid(p)
    with pytest.raises(ConstantUndefinedError):
        Prop23Solution(p).C
    with pytest.raises(ConstantUndefinedError):
        prop23_source(p, 1.0, 1.0)


@settings(max_examples=150, deadline=None)
@given(st.floats(0.2, 6.0), st.floats(0.1, 3.0), st.floats(0.05, 0.95))
def test_prop23_residual_vanishes(gamma, lam, nu):
    p = TelegraphParams(gamma, lam, nu)
    assume(prop23_valid(p))
    report = prop23_residual(p)
    assert report.relative <= 1e-10


def test_prop23_residual_flags_continuation():
    assert prop23_residual(TelegraphParams(1.0, 1.0, 0.5)).continued
    assert not prop23_residual(TelegraphParams(5.0, 1.0, 0.5)).continued


# }}}


# {{{ wave-type solution


def test_wave_basics():
    s = WaveSolution(2.0, 0.5)
    assert wave_eval(s, 0.0, 1.0) == 0.0
    assert s.beta == pytest.approx(-0.75)
    for r in GOLDEN["wave_constant"]:
        assert wave_constant(r["gamma"], r["nu"]) == pytest.approx(r["K"], rel=1e-13)


def test_wave_constraints():
    assert wave_stated_constraint(1.2, 0.5) and not wave_positivity_constraint(1.2, 0.5)
    assert wave_positivity_constraint(0.3, 0.4) and not wave_stated_constraint(0.3, 0.4)


def test_scan_validity_sign_consistency():
    gammas = np.linspace(0.15, 3.0, 20)
    nus = np.linspace(0.05, 0.95, 10)
    rows = scan_validity(gammas, nus)
    assert len(rows) == 200
    with mp.workdps(30):
        for r in rows:
            beta = -(1 + r.nu) / r.gamma
            try:
                ref = mp.gamma(1 + beta) * mp.rgamma(beta - r.nu)
            except ValueError:
                assert math.isnan(r.K)
                continue
            assert r.K_positive == bool(ref > 0)
            assert r.real == wave_valid(r.gamma, r.nu)


@settings(max_examples=150, deadline=None)
@given(st.floats(0.2, 6.0), st.floats(0.05, 0.95))
def test_wave_residual_vanishes(gamma, nu):
    assume(wave_valid(gamma, nu))
    assert wave_residual(WaveSolution(gamma, nu)).relative <= 1e-10


def test_wave_invalid():
    # gamma = 2, nu = 0.9: K < 0 and 1/2 has an even denominator
    assert wave_constant(2.0, 0.9) < 0 or wave_valid(2.0, 0.9)
    bad = [(g, n) for g in (1.5, 2.0, 2.5) for n in (0.1, 0.5, 0.9) if not wave_valid(g, n)]
    assert bad
    g, n = bad[0]
    with pytest.raises(ConstantUndefinedError):
        wave_eval(WaveSolution(g, n), 1.0, 1.0)


# }}}


# {{{ Barenblatt


def test_barenblatt_constants():
    p = BarenblattParams(1.0)
    assert p.r0 == pytest.approx(0.75, rel=1e-15)
    assert p.t0 == pytest.approx(3.0 / 32.0, rel=1e-15)
    assert p.scale(p.t0) == pytest.approx(1.0)


@pytest.mark.parametrize("m", [0.5, 1.0, 2.0])
def test_barenblatt_support_and_mass(m):
    p = BarenblattParams(m)
    masses = []
    for t in (p.t0, 3.0 * p.t0, 10.0 * p.t0):
        edge = p.front(t)
        assert barenblatt_eval(p, 1.01 * edge, t) == 0.0
        assert barenblatt_eval(p, -1.01 * edge, t) == 0.0
        value, _ = integrate.quad(lambda v: barenblatt_eval(p, v, t), -edge, edge,
                                  epsabs=1e-14, epsrel=1e-13, limit=200)
        masses.append(value)
    assert max(masses) - min(masses) <= 1e-10
    if m == 1.0:
        assert masses[0] == pytest.approx(1.0, abs=1e-12)


def test_barenblatt_continuous_at_edge():
    p = BarenblattParams(1.0)
    t = 0.5
    edge = p.front(t)
    assert barenblatt_eval(p, edge * (1 - 1e-9), t) == pytest.approx(0.0, abs=1e-8)


# }}}
