import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from sp1d.errors import (
    NoDefaultMajorant,
    NonPositiveArgument,
    NotIntegrableAtInfinity,
    OutOfRange,
)
from sp1d.nonlinearity import (
    A_eval,
    B_default,
    DiffusionSpec,
    Psi1_eval,
    Psi_eval,
    Psi_inverse,
    a_eval,
    check_gex1,
    derive,
    verify_majorant,
)

S = DiffusionSpec
BUILTIN = [S.inverse(), S.power(0.0), S.power(0.5), S.power(1.0), S.power(1.5), S.power(2.0),
           S.power(3.0), S.log(0.5), S.log(1.0), S.log(1.5), S.log(2.0)]
IDS = [s.label() for s in BUILTIN]


def quad_log(g, lo, hi):
    """int_lo^hi g(w) dw with s = log w; an oracle independent of the package tables."""
    if lo == hi:
        return 0.0
    sign = 1.0 if hi > lo else -1.0
    a, b = sorted((math.log(lo), math.log(hi)))
    val = integrate.quad(lambda s: g(math.exp(s)) * math.exp(s), a, b, epsabs=0, epsrel=1e-13, limit=400)[0]
    return sign * val


def a_ref(spec, r):
    if spec.family == "inverse":
        return 1.0 / r
    if spec.family == "power":
        return (1.0 + r) ** -spec.p
    return 1.0 / ((1.0 + r) * math.log1p(r) ** spec.alpha)


def test_a_examples():
    assert a_eval(S.power(1), 1.0) == pytest.approx(0.5)
    assert a_eval(S.inverse(), 2.0) == pytest.approx(0.5)
    assert a_eval(S.log(1), math.e - 1) == pytest.approx(1 / math.e, rel=1e-14)
    with pytest.raises(NonPositiveArgument):
        a_eval(S.power(1), 0.0)


def test_A_examples():
    oracle = -integrate.quad(lambda s: (1 + s) ** -2.0, 1.0, np.inf, epsrel=1e-12)[0]
    assert A_eval(S.power(2), 1.0) == pytest.approx(oracle, rel=1e-10)
    assert oracle == pytest.approx(-0.5, rel=1e-10)
    r = math.e - 1
    # t = log(1+s) turns the tail into int dt / t^2
    oracle = -integrate.quad(lambda t: t**-2.0, math.log1p(r), np.inf, epsrel=1e-12)[0]
    assert A_eval(S.log(2), r) == pytest.approx(oracle, rel=1e-10)
    assert oracle == pytest.approx(-1.0, rel=1e-10)
    with pytest.raises(NotIntegrableAtInfinity):
        A_eval(S.power(1), 3.0)


def test_psi_examples():
    assert Psi_eval(S.inverse(), 1.0) == 0.0
    assert Psi_eval(S.inverse(), math.e) == pytest.approx(1.0)
    oracle = integrate.quad(lambda r: (1 + 1 / r) ** -2.0 / r**2, 1.0, 2.0, epsrel=1e-13)[0]
    assert oracle == pytest.approx(1 / 6, rel=1e-12)
    assert Psi_eval(S.power(2), 2.0) == pytest.approx(oracle, rel=1e-12)
    oracle = integrate.quad(lambda r: 1.0, 1.0, 2.0)[0]
    assert Psi1_eval(S.inverse(), 2.0) == pytest.approx(oracle)


def test_psi_inverse_examples():
    for spec in BUILTIN:
        assert Psi_inverse(spec, 0.0) == pytest.approx(1.0, abs=1e-12)
    assert Psi_inverse(S.inverse(), 1.0) == pytest.approx(math.e, rel=1e-14)
    lo, hi = S.power(2).Psi_range()
    assert (lo, hi) == pytest.approx((-0.5, 0.5))
    with pytest.raises(OutOfRange):
        Psi_inverse(S.power(2), 0.6)


@pytest.mark.parametrize("spec", BUILTIN, ids=IDS)
def test_substitution_identity_against_quadrature(spec):
    for r in np.logspace(-4, 4, 25):
        oracle = quad_log(lambda w: a_ref(spec, w), 1.0 / r, 1.0)
        assert spec.Psi(r) == pytest.approx(oracle, abs=1e-9, rel=1e-10)


@pytest.mark.parametrize("spec", BUILTIN, ids=IDS)
def test_psi1_against_quadrature(spec):
    for r in np.logspace(-4, 4, 25):
        oracle = quad_log(lambda s: a_ref(spec, 1 / s) / s, 1.0, r)
        assert spec.Psi1(r) == pytest.approx(oracle, abs=1e-9, rel=1e-10)


@pytest.mark.parametrize("spec", BUILTIN, ids=IDS)
def test_derivative_consistency(spec):
    r = np.logspace(-3, 3, 40)
    h = 1e-5 * r

    def fd_close(F, exact):
        fd = (F(r + h) - F(r - h)) / (2 * h)
        # central differences of O(|F|) numbers lose |F| * eps / h to rounding
        roundoff = 20 * np.finfo(float).eps * np.abs(F(r)) / h
        assert np.all(np.abs(fd - exact) <= 1e-6 * np.abs(exact) + roundoff)

    fd_close(spec.Psi, spec.dPsi(r))
    np.testing.assert_allclose(spec.dPsi(r), np.array([a_ref(spec, 1 / x) / x**2 for x in r]), rtol=1e-12)
    fd_close(spec.Psi1, r * spec.dPsi(r))


@settings(max_examples=200, deadline=None)
@given(st.sampled_from(BUILTIN), st.floats(-9, 9), st.floats(1e-3, 3))
def test_psi_strictly_increasing_and_round_trip(spec, logr, gap):
    r1 = math.exp(logr)
    r2 = r1 * (1 + gap)
    assert spec.Psi(r1) < spec.Psi(r2)
    back = float(spec.Psi_inv(spec.Psi(r1)))
    assert abs(back - r1) <= 1e-8 * max(1.0, r1)


def test_custom_family_uses_quadrature():
    ref = S.power(1.5)
    custom = S.custom(lambda r: (1.0 + np.asarray(r)) ** -1.5)
    r = np.logspace(-3, 3, 20)
    np.testing.assert_allclose(custom.Psi(r), ref.Psi(r), atol=1e-10)
    np.testing.assert_allclose(custom.Psi1(r), ref.Psi1(r), atol=1e-10)
    np.testing.assert_allclose(custom.A(r), ref.A(r), rtol=1e-9)
    z = ref.Psi(r)
    np.testing.assert_allclose(custom.Psi_inv(z), r, rtol=1e-8)
    assert custom.a_in_L1_infinity and custom.a_in_L1_zero


def test_integrability_flags():
    assert not S.power(1).a_in_L1_infinity and S.power(1.5).a_in_L1_infinity
    assert S.log(2).a_in_L1_infinity and not S.log(1).a_in_L1_infinity
    assert not S.inverse().a_in_L1_zero and not S.log(1).a_in_L1_zero


def test_gex1():
    assert check_gex1(S.inverse(), 1.0) == pytest.approx(1.0, abs=1e-6)
    for M in (0.5, 1.0, 3.0):
        assert check_gex1(S.power(1), M) <= 1.0
    assert math.isfinite(check_gex1(S.power(0), 2.0))


def test_majorant_power2():
    B, beta = B_default(S.power(2))
    r = np.logspace(-6, 8, 50)
    np.testing.assert_allclose(B(r), r / (1 + r), rtol=1e-14)
    np.testing.assert_allclose(-r * S.power(2).A(r), B(r), rtol=1e-12)
    assert beta(1e6) < 1e-5
    rep = verify_majorant(S.power(2))
    assert rep.verified and rep.max_ratio == pytest.approx(1.0, abs=1e-10)
    for spec in (S.power(1.5), S.log(1.5), S.log(2)):
        assert verify_majorant(spec).verified
    with pytest.raises(NoDefaultMajorant):
        B_default(S.power(1))


def test_derive_bundle():
    d = derive(S.power(2))
    assert d.Bmaj is not None and d.Aint is not None and d.a_in_L1_infinity
    d = derive(S.power(1))
    assert d.Bmaj is None and d.Aint is None
