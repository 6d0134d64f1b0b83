import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adsmc.closed_loop import run_siso
from adsmc.dsmc import (
    SisoDsmc,
    SisoDsmcState,
    adapt_alpha,
    equivalent_control_2nd,
    first_order_control,
    gao_reaching_step,
    lyapunov_diag,
    sat,
    sliding_variable,
    switching_control,
)
from adsmc.errors import (
    ConfigError,
    InvalidBetaError,
    NumericOverflowError,
    ReachingGainError,
    SingularGainError,
)
from adsmc.oracles import random_scalar_plant
from adsmc.plant import AffinePlant, euler_step

small = st.floats(-100, 100)


def test_sliding_variable():
    assert sliding_variable(3.0, 3.0) == 0
    assert sliding_variable(5.0, 3.0) == 2.0


@given(a=small, b=small)
def test_sliding_variable_antisymmetric(a, b):
    assert sliding_variable(a, b) == -sliding_variable(b, a)


def test_equivalent_control_on_manifold_driftless():
    ctl = SisoDsmcState(beta=0.5, T=0.1)
    assert equivalent_control_2nd(0.0, 2.0, 1.0, 1.0, 0.0, ctl, 0.1) == 0.0


def test_equivalent_control_gain_linearity():
    ctl = SisoDsmcState(beta=0.3, T=0.05, alpha_hat=1.2)
    u1 = equivalent_control_2nd(0.7, 1.5, 2.0, 1.4, 0.4, ctl, 0.05)
    u2 = equivalent_control_2nd(0.7, 3.0, 2.0, 1.4, 0.4, ctl, 0.05)
    assert u2 == pytest.approx(u1 / 2, rel=1e-15)


def test_equivalent_control_places_next_surface():
    rng = np.random.default_rng(11)
    for _ in range(100):
        p = random_scalar_plant(rng)
        alpha = float(p.alpha_true[0])
        beta = rng.uniform(0.05, 0.95)
        ctl = SisoDsmcState(beta=beta, T=p.T, alpha_hat=alpha)
        x, xd, xdn = rng.normal(size=3)
        f, g = p.f(np.array([x]))[0], p.g(np.array([x]))[0]
        u = equivalent_control_2nd(f, g, x, xdn, x - xd, ctl, p.T)
        x1 = euler_step(p, [x], [u])[0]
        assert x1 - xdn == pytest.approx(-beta * (x - xd), abs=1e-12 * max(1, abs(x)))


def test_equivalent_control_errors():
    ctl = SisoDsmcState(beta=0.5, T=0.1)
    with pytest.raises(SingularGainError):
        equivalent_control_2nd(1.0, 0.0, 0.0, 0.0, 0.0, ctl, 0.1)
    with pytest.raises(NumericOverflowError):
        equivalent_control_2nd(math.inf, 1.0, 0.0, 0.0, 0.0, ctl, 0.1)


def test_switching_branches():
    assert switching_control(2.0, 0.0, 0.0, 0.5, 0.1) == 0.0
    assert switching_control(2.0, 1.0, 1.0, 0.5, 0.1) == -2.0
    assert switching_control(-2.0, -1.0, 0.0, 0.5, 0.1) == 2.0
    assert switching_control(0.0, 5.0, 1.0, 0.5, 0.1) == 0.0
    assert switching_control(1.0, 0.02, 0.0, 0.5, 0.1) == pytest.approx(-0.2)


@given(mu=st.floats(-10, 10), s=small, sp=small, beta=st.floats(0.01, 0.99),
       phi=st.floats(1e-6, 10))
def test_switching_bounded(mu, s, sp, beta, phi):
    assert abs(switching_control(mu, s, sp, beta, phi)) <= abs(mu)


def test_sat():
    assert sat(3.0) == 1.0 and sat(-3.0) == -1.0 and sat(0.25) == 0.25
    np.testing.assert_array_equal(sat(np.array([-2.0, 0.5, 2.0])), [-1.0, 0.5, 1.0])


def test_adapt_alpha_trivial_and_deadband():
    assert adapt_alpha(1.3, 0.0, 5.0, 2.0, 0.1) == 1.3
    assert adapt_alpha(1.3, 2.0, 0.0, 2.0, 0.1) == 1.3
    assert adapt_alpha(1.3, 2.0, 1e-12, 2.0, 0.1, deadband=1e-9) == 1.3
    assert adapt_alpha(1.0, 2.0, 3.0, 4.0, 0.1) == pytest.approx(1.0 + 0.1 * 2 * 3 / 4)


def test_adaptation_matches_recurrence_and_converges():
    T, beta, rho, alpha = 0.02, 0.5, 0.05, 1.0
    p = AffinePlant(lambda x: x, lambda x: np.array([1.0]), [alpha], T)
    loop = SisoDsmc(SisoDsmcState(beta=beta, T=T, rho_alpha=rho, alpha_hat=0.5))
    n = 2000
    xd = 1.0 + 0.5 * np.sin(2.0 * T * np.arange(n + 1))
    tr = run_siso(p, loop, 1.2, xd)
    # independent recurrence of plant, control law and estimate
    x, ah = 1.2, 0.5
    for k in range(n):
        assert tr.alpha_hat[k] == pytest.approx(ah, rel=1e-12)
        s = x - xd[k]
        u = -(T * ah * x + x - xd[k + 1] + beta * s) / T
        ah = ah + T * s * x / rho
        x = x + T * (alpha * x + u)
    assert abs(tr.alpha_err[-1]) < 1e-5


def test_first_order_control():
    ctl = SisoDsmcState(beta=0.5, T=0.1, order=1, phi=0.1)
    assert first_order_control(0.0, 2.0, 1.0, 1.0, 0.0, ctl, 0.1, 0.0) == 0.0
    u = first_order_control(0.4, 2.0, 1.0, 0.3, 0.7, ctl, 0.1, 0.0)
    assert u == pytest.approx(-(0.1 * 0.4 + 1.0 - 0.3) / 0.2)
    rng = np.random.default_rng(5)
    for _ in range(50):
        p = random_scalar_plant(rng)
        ctl = SisoDsmcState(beta=0.5, T=p.T, order=1, alpha_hat=float(p.alpha_true[0]))
        x, xd, xdn = rng.normal(size=3)
        u = first_order_control(p.f(np.array([x]))[0], p.g(np.array([x]))[0], x, xdn,
                                x - xd, ctl, p.T, 0.0)
        assert euler_step(p, [x], [u])[0] == pytest.approx(xdn, abs=1e-12)


def test_gao_examples():
    assert gao_reaching_step(0.0, 1.0, 0.0, 0.1) == 0.0
    T = 0.1
    assert gao_reaching_step(1.0, 0.5 / T, 0.0, T) == pytest.approx(0.5)
    with pytest.raises(ReachingGainError):
        gao_reaching_step(1.0, 20.0, 0.0, 0.1)


@given(T=st.floats(0.001, 0.5), tl=st.floats(0.01, 0.99), eps=st.floats(0, 5),
       k=st.floats(1.001, 100), sign=st.sampled_from([-1, 1]))
def test_gao_monotone_outside_band(T, tl, eps, k, sign):
    lam = tl / T
    s = sign * k * max(T * eps / (1 - T * lam), 1e-9)
    assert abs(gao_reaching_step(s, lam, eps, T)) < abs(s)


def test_lyapunov_examples():
    d = lyapunov_diag(0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 1.0)
    assert d.V == 0 and d.dV_pred == 0
    d = lyapunov_diag(1.0, -0.5, 0.25, 0.0, 0.0, 0.5, 1.0)
    assert d.dV_pred == pytest.approx(-0.28125, abs=1e-15)
    assert d.dV_expanded == pytest.approx(d.dV_pred, abs=1e-12)


@given(beta=st.floats(1e-6, 1 - 1e-6), s=small)
def test_lyapunov_prediction_non_positive(beta, s):
    assert lyapunov_diag(s, -beta * s, beta**2 * s, 0, 0, beta, 1.0).dV_pred <= 0


def test_two_step_contraction_and_monotone_decrease():
    rng = np.random.default_rng(8)
    for _ in range(20):
        p = random_scalar_plant(rng)
        beta = rng.uniform(0.05, 0.95)
        loop = SisoDsmc(SisoDsmcState(beta=beta, T=p.T, alpha_hat=float(p.alpha_true[0]),
                                      adapt=False))
        tr = run_siso(p, loop, 2.0, np.sin(p.T * np.arange(201)))
        assert tr.contraction_residual().max() <= 1e-6
        s = np.abs(tr.s)
        assert np.all(s[2:] <= s[:-2] + 1e-12)


def test_validation_gates():
    with pytest.raises(InvalidBetaError):
        SisoDsmcState(beta=0.0, T=0.1)
    with pytest.raises(InvalidBetaError):
        SisoDsmcState(beta=1.0, T=0.1)
    with pytest.raises(ReachingGainError):
        SisoDsmcState(beta=0.5, T=0.1, lam=10.0)
    with pytest.raises(ConfigError):
        SisoDsmcState(beta=0.5, T=0.1, rho_alpha=0.0)
    with pytest.raises(ConfigError):
        SisoDsmcState(beta=0.5, T=0.1, phi=-1.0)
    # first-order loops ignore beta
    SisoDsmcState(beta=2.0, T=0.1, order=1)


def test_all_violations_reported():
    with pytest.raises(ConfigError) as exc:
        SisoDsmcState(beta=1.5, T=0.1, rho_alpha=-1.0, phi=0.0)
    assert len(exc.value.violations) == 3


def test_loop_first_step_has_no_switching_kick():
    loop = SisoDsmc(SisoDsmcState(beta=0.5, T=0.1, phi=1.0))
    out = loop.step(1.0, 0.0, 0.0, 0.0, 1.0, mu_u=1.0)
    # s_prev starts at the first measured s, so the history term is (1 + beta) s
    assert out.u_sw == pytest.approx(-1.0)
    assert loop.state.s_prev == 1.0
