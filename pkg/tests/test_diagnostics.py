import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import integrate

from sp1d.config import ScenarioConfig
from sp1d.diagnostics import (
    Lambda_M,
    bump_initial_data,
    check_lab1,
    check_prop23,
    constraint_shift,
    energy_E,
    energy_E1,
    envelope,
    lyapunov_L,
    lyapunov_L1,
    stability_L1,
    theta_M,
    virial_Lq,
    virial_monotonicity,
)
from sp1d.errors import BadExponent, GridMismatch, NoMajorant, NoRoot, WrongFamily
from sp1d.nonlinearity import DiffusionSpec
from sp1d.numerics import GridField
from sp1d.primal import primal_run
from sp1d.records import RunRecord
from sp1d.transform import u_to_f
from sp1d.transformed import TransformedState, transformed_run, transformed_step

S = DiffusionSpec


def test_L_trivial():
    for M in (0.5, 2.0):
        assert lyapunov_L(GridField(np.full(32, 1 / M), M)) == pytest.approx(-M * math.log(M))
    assert lyapunov_L(GridField(np.ones(16), 1.0)) == 0.0
    with pytest.raises(WrongFamily):
        lyapunov_L(GridField(np.ones(16), 1.0), S.power(1))


def test_L_against_quadrature():
    N, M = 512, 1.0
    g = lambda y: math.log1p(0.1 * math.cos(math.pi * y / M)) - math.log(M)
    dg = lambda y: -0.1 * math.pi / M * math.sin(math.pi * y / M) / (1 + 0.1 * math.cos(math.pi * y / M))
    oracle = integrate.quad(lambda y: 0.5 * dg(y) ** 2 + g(y), 0, M, epsabs=1e-14, epsrel=1e-14)[0]
    # cell averages of f sampled at centres; both discretizations are O(h^2)
    y = (np.arange(N) + 0.5) * (M / N)
    f = GridField((1 + 0.1 * np.cos(np.pi * y / M)) / M, M)
    assert lyapunov_L(f) == pytest.approx(oracle, abs=1e-6)


def test_L1_examples():
    for M in (0.5, 1.0, 2.0):
        f = GridField(np.full(16, 1 / M), M)
        spec = S.inverse()
        assert lyapunov_L1(f, spec) == pytest.approx(M * (-math.log(M) - 1 + M), abs=1e-13)
        for spec in (S.power(0.5), S.log(1.5)):
            expect = M * (spec.Psi(1 / M) - M * spec.Psi1(1 / M))
            assert lyapunov_L1(f, spec) == pytest.approx(float(expect), abs=1e-12)


def test_L1_minus_L_identity():
    M = 1.7
    rng = np.random.default_rng(5)
    v = rng.uniform(0.3, 2, 64)
    f = GridField(v / (M * v.mean()), M)
    assert f.integral() == pytest.approx(1.0)
    diff = lyapunov_L1(f, S.inverse()) - lyapunov_L(f)
    assert diff == pytest.approx(-M * (1 - M), abs=1e-12)


def test_prop23_trivial():
    M = 2.0
    g = GridField(np.full(16, -math.log(M)), M)
    assert energy_E(g) == pytest.approx(-M * math.log(M))
    rep = check_prop23(g, M)
    assert rep.passed and rep.checked == 2
    assert rep.details["shift"] == pytest.approx(0.0, abs=1e-15)
    rep = check_prop23(GridField(np.zeros(16), 1.0), 1.0)
    assert rep.details["l1"] == 0.0 and rep.details["rhs_l1"] == pytest.approx(2.0)


def test_lab1_trivial():
    for M in (0.5, 1.0, 2.0):
        spec = S.power(1)
        h = GridField(np.full(32, float(spec.Psi(1 / M))), M)
        assert constraint_shift(h, spec) == pytest.approx(0.0, abs=1e-10)
        rep = check_lab1(h, spec, M)
        assert rep.passed
        assert rep.details["E1"] == pytest.approx(M * min(0.0, float(spec.Psi(1 / M))), abs=1e-9)
    rep = check_lab1(GridField(np.zeros(16), 1.0), S.inverse(), 1.0)
    assert rep.passed and energy_E1(GridField(np.zeros(16), 1.0)) == 0.0


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.integers(8, 128), elements=st.floats(-5, 5)), st.sampled_from([0.5, 1.0, 2.0]))
def test_prop23_property(vals, M):
    assert check_prop23(GridField(vals, M), M).passed


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.integers(8, 128), elements=st.floats(-3, 3)), st.sampled_from([0.5, 1.0, 2.0]),
       st.sampled_from([S.inverse(), S.power(1), S.log(1)]))
def test_lab1_property(vals, M, spec):
    h = GridField(vals, M)
    rep = check_lab1(h, spec, M)
    assert rep.passed
    shifted = h.values + rep.details["shift"]
    assert h.h * spec.Psi_inv(shifted).sum() == pytest.approx(1.0, abs=1e-10)


def test_envelope():
    sig, Sig = envelope(0.0, 0.3, 1.0, 2.0)
    assert sig == pytest.approx(0.3) and Sig == pytest.approx(2.0)
    for t in (0.0, 1.0, 7.0):
        assert envelope(t, 1.5, 1.5, 1.5)[0] == pytest.approx(1.5)
    assert envelope(1.0, 0.5, 1.0, 1.0)[0] == pytest.approx(1 / (1 + math.e), rel=1e-14)
    assert envelope(0.6, 0.5, 1.0, 2.0)[1] is None


def _run_pair(eps):
    f0 = u_to_f(bump_initial_data(1.0, 0.3, 0.2, 64), 64)
    cfg = ScenarioConfig().replace(T=0.5, sample_interval=0.05, snapshot_interval=0.05)
    f1 = f0
    if eps:
        g = f0.values + eps * np.cos(np.pi * f0.centers)
        f1 = f0.with_values(g / (g.sum() * f0.h))
    return transformed_run(f0, S.inverse(), cfg), transformed_run(f1, S.inverse(), cfg)


def test_stability_identical_and_perturbed():
    a, b = _run_pair(0.0)
    rep = stability_L1(a, b)
    assert rep.passed and rep.checked == 11
    a, b = _run_pair(1e-3)
    assert stability_L1(a, b).passed


def test_stability_grid_mismatch():
    f1 = GridField(np.ones(16), 1.0)
    f2 = GridField(np.ones(32), 1.0)
    r1, r2 = RunRecord(), RunRecord()
    r1.snapshots.append((0.0, f1))
    r2.snapshots.append((0.0, f2))
    with pytest.raises(GridMismatch):
        stability_L1(r1, r2)


def test_virial_Lq():
    for M in (1.0, 2.0):
        u = GridField(np.full(1024, M), 1.0)
        assert virial_Lq(u, 3) == pytest.approx(M**3 / 12, rel=1e-5)
    # mass piling up at x = 1 sends L_q / (M^3/12) to zero
    ratios = []
    for d in (1e-2, 1e-3, 1e-4):
        u = bump_initial_data(1.0, 1e-6, d, 65536)
        ratios.append(virial_Lq(u, 3) / (1 / 12))
    assert ratios[0] > ratios[1] > ratios[2] and ratios[2] < 1e-3
    with pytest.raises(BadExponent):
        virial_Lq(u, 2)


def _lambda_oracle(r):
    r = mp.mpf(r)
    return r + mp.mpf(2) ** (-mp.mpf(1) / 3) * (12 * r / (12 * r + 1)) ** (mp.mpf(1) / 3) - mp.mpf(1) / 12


def test_lambda_and_theta_power2():
    mp.mp.dps = 40
    spec = S.power(2)
    for r in (1e-9, 1e-6, 1e-4, 0.01, 0.5):
        assert Lambda_M(r, 3, 1.0, spec) == pytest.approx(float(_lambda_oracle(r)), rel=1e-12, abs=1e-15)
    assert Lambda_M(1e-300, 3, 1.0, spec) == pytest.approx(-1 / 12)
    oracle = float(mp.findroot(_lambda_oracle, (mp.mpf("1e-5"), mp.mpf("1e-3")), solver="anderson"))
    theta = theta_M(3, 1.0, spec)
    assert theta == pytest.approx(oracle, rel=1e-10)
    assert theta == pytest.approx(9.6e-5, rel=0.01)
    assert abs(Lambda_M(theta, 3, 1.0, spec)) <= 1e-12


def test_theta_errors():
    with pytest.raises(NoMajorant):
        theta_M(3, 1.0, S.power(1))
    # log(alpha=2) stays positive far below double range: the root is near exp(-7000)
    with pytest.raises(NoRoot):
        theta_M(3, 1.0, S.log(2))


def test_lambda_positive_at_steady_state():
    for spec in (S.power(1.5), S.power(2), S.log(2)):
        for M in (0.5, 1.0, 2.0):
            steady = M**3 / 12
            assert Lambda_M(steady, 3, M, spec) >= 0


def test_virial_monotonicity_steady():
    u0 = GridField(np.full(64, 1.0), 1.0)
    out = primal_run(u0, S.power(2), ScenarioConfig().replace(T=2.0, sample_interval=0.01))
    rep = virial_monotonicity(out, 3, S.power(2), h=u0.h)
    assert rep.samples == 201 and not rep.violations
    with pytest.raises(NoMajorant):
        virial_monotonicity(out, 3, S.power(1))


def test_bump():
    for m0, d in ((0.05, 0.02), (0.5, 0.3), (1.0, 0.1)):
        u = bump_initial_data(1.0, m0, d, 256)
        assert u.mean() == pytest.approx(1.0, rel=1e-14)
        assert np.all(u.values > 0)
    np.testing.assert_allclose(bump_initial_data(2.0, 2.0, 0.1, 64).values, 2.0)
    Lq = [virial_Lq(bump_initial_data(1.0, 0.05, d, 4096), 3) for d in (0.2, 0.1, 0.05, 0.02)]
    assert all(a > b for a, b in zip(Lq, Lq[1:]))
    theta = theta_M(3, 1.0, S.power(2))
    d = 0.02
    while virial_Lq(bump_initial_data(1.0, 0.05, d, 16384), 3) >= theta:
        d /= 2
    assert d > 1e-4


def test_lyapunov_dissipation_identity():
    # dL/dt + int f |d_t log f|^2 = 0 along an InverseR run, checked with shrinking dt
    N = 512
    y = (np.arange(N) + 0.5) / N
    v = 1 + 0.3 * np.cos(np.pi * y)
    state = TransformedState(0.0, GridField(v / v.mean(), 1.0))
    rel = []
    for dt in (1e-6, 2.5e-7):
        f0 = state.f
        f1 = transformed_step(state, S.inverse(), dt).f
        dL = (lyapunov_L(f1) - lyapunov_L(f0)) / dt
        fm = 0.5 * (f0.values + f1.values)
        diss = f0.h * np.sum(fm * ((np.log(f1.values) - np.log(f0.values)) / dt) ** 2)
        rel.append(abs(dL + diss) / diss)
    assert rel[-1] <= 1e-2 and rel[-1] < rel[0]


def test_h1_envelope_inverse():
    f0 = u_to_f(bump_initial_data(1.0, 0.05, 0.05, 256), 256)
    cfg = ScenarioConfig().replace(T=5.0, sample_interval=0.05, snapshot_interval=0.5)
    out = transformed_run(f0, S.inverse(), cfg)

    def h1(f):
        g = np.log(f.values)
        return math.sqrt(f.h * np.sum(g**2) + np.sum(np.diff(g) ** 2) / f.h)

    g0 = GridField(np.log(f0.values), 1.0)
    bound = 10 * (1 + h1(f0) + abs(energy_E(g0)))
    assert max(h1(f) for _, f in out.series.snapshots) <= bound
