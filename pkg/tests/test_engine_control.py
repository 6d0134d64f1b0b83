import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adsmc.dsmc import adapt_alpha
from adsmc.engine_control import (
    ADAPTATION_LAWS,
    MA,
    MDOTF,
    OMEGA,
    TEXH,
    ActuatorLimits,
    EngineController,
    adapt_ma,
    adapt_mdotf,
    adapt_omega,
    adapt_texh,
    afr,
    engine_step_controllers,
)
from adsmc.errors import ConfigError, DomainError
from adsmc.harness import parse_config, run_scenario
from adsmc.plant import EngineParams, EngineState, engine_dynamics, mdot_ao

P = EngineParams()
states = st.builds(EngineState, st.floats(300, 900), st.floats(1e-5, 3e-3), st.floats(1e-3, 2e-2),
                   st.floats(50, 500))


def test_afr_definition():
    st_ = EngineState(650.0, 1.0, 5e-3, 150.0)
    ao = mdot_ao(st_, P)
    assert afr(EngineState(650.0, ao / 14.6, 5e-3, 150.0), P) == pytest.approx(14.6, rel=1e-14)
    assert afr(EngineState(650.0, 2 * ao / 14.6, 5e-3, 150.0), P) == pytest.approx(7.3, rel=1e-14)


@given(s=states)
def test_afr_identity(s):
    assert afr(s, P) * s.mdot_f - mdot_ao(s, P) == pytest.approx(0.0, abs=1e-12 * mdot_ao(s, P))


def test_afr_below_deadband():
    with pytest.raises(DomainError):
        afr(EngineState(650.0, 0.0, 5e-3, 150.0), P)


def test_controller_holds_last_afr():
    ctl = EngineController("second-order-siso", P, 0.08, rho=(1e4, 1e-6, 1e-6, 1e4))
    refs = (650.0, 14.6, 150.0)
    first = ctl.step(EngineState(650.0, 5e-4, 5e-3, 150.0), refs, refs)
    held = ctl.step(EngineState(650.0, 0.0, 5e-3, 150.0), refs, refs)
    assert not first.afr_held and held.afr_held
    assert held.afr_meas == first.afr_meas


@given(s=states, ah=st.floats(0.3, 2), err=st.floats(-5, 5), rho=st.floats(1e-3, 1e3))
def test_printed_laws(s, ah, err, rho):
    T = 0.08
    te = 2 * math.pi / s.omega_e
    assert adapt_texh(ah, err, s, P, rho, T) == pytest.approx(
        ah + T * err * (600 - s.T_exh) / (te * rho), rel=1e-12)
    assert adapt_mdotf(ah, err, s, P, rho, T) == pytest.approx(
        ah - T * err * s.mdot_f / (P.tau_f * rho), rel=1e-12)
    assert adapt_omega(ah, err, s, P, rho, T) == pytest.approx(
        ah - T * err * (0.4 * s.omega_e + 100) / (P.J * rho), rel=1e-12)
    assert adapt_ma(ah, err, s, P, rho, T) == pytest.approx(
        ah - T * err * mdot_ao(s, P) / rho, rel=1e-12)


@given(s=states)
def test_laws_frozen_without_error(s):
    for law in ADAPTATION_LAWS:
        assert law(1.25, 0.0, s, P, 1.0, 0.08) == 1.25


@given(s=states, err=st.floats(-1, 1))
def test_each_law_binds_its_own_channel_drift(s, err):
    f, _ = engine_dynamics(s, P)
    for i, law in enumerate(ADAPTATION_LAWS):
        assert law(1.0, err, s, P, 2.0, 0.08) == adapt_alpha(1.0, err, f[i], 2.0, 0.08)
    assert ADAPTATION_LAWS[TEXH] is adapt_texh
    assert ADAPTATION_LAWS[MDOTF] is adapt_mdotf
    assert ADAPTATION_LAWS[MA] is adapt_ma
    assert ADAPTATION_LAWS[OMEGA] is adapt_omega


def test_on_reference_commands_cancel_drift():
    T = 0.08
    w = 150.0
    m_a = (0.4 * w + 100) / 30000
    ao = mdot_ao(EngineState(600.0, 0.0, m_a, w), P)
    meas = EngineState(600.0, ao / 14.6, m_a, w)
    f, g = engine_dynamics(meas, P)
    ctl = EngineController("second-order-siso", P, T, adapt=False, m_ad0=m_a,
                           limits=ActuatorLimits(lo=(-1e9,) * 4, hi=(1e9,) * 4))
    out = ctl.step(meas, (600.0, 14.6, w), (600.0, 14.6, w))
    np.testing.assert_array_equal(out.u_sw, np.zeros(4))
    np.testing.assert_allclose(out.s, np.zeros(4), atol=1e-15)
    np.testing.assert_allclose(out.inputs.as_array(), -f / g, rtol=1e-12, atol=1e-18)


def test_sliding_vector_order():
    ctl = EngineController("second-order-siso", P, 0.08, rho=(1e4, 1e-6, 1e-6, 1e4), m_ad0=5e-3)
    meas = EngineState(655.0, 5e-4, 6e-3, 160.0)
    out = ctl.step(meas, (650.0, 14.0, 150.0), (650.0, 14.0, 150.0))
    assert out.sliding.s1 == pytest.approx(5.0)
    assert out.sliding.s2 == pytest.approx(afr(meas, P) - 14.0)
    assert out.sliding.s3 == pytest.approx(6e-3 - 5e-3)
    assert out.sliding.s4 == pytest.approx(10.0)


@pytest.mark.parametrize("mode", ["second-order-siso", "second-order-mimo", "first-order-siso"])
def test_synthetic_air_mass_chaining(mode):
    ctl = EngineController(mode, P, 0.08, rho=(3.6e4, 1.65e-6, 1.2e-6, 1.7e4), m_ad0=5e-3)
    meas = EngineState(640.0, 5e-4, 5e-3, 150.0)
    prev = None
    for k in range(5):
        w_d = 150.0 + 5 * k
        out = ctl.step(meas, (650.0, 14.6, w_d), (650.0, 14.6, w_d + 5))
        if prev is not None:
            assert out.x_d[MA] == prev.inputs.m_ad
        prev = out


def test_mode_equivalence_step_for_step():
    base = {"horizon": 8.0, "transient_cut": 1.0, "alpha_true": [1.3, 0.7, 1.2, 0.8]}
    a = run_scenario(parse_config({**base, "mode": "second-order-siso"})).data
    b = run_scenario(parse_config({**base, "mode": "second-order-mimo"})).data
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


def test_clamps_counted_and_freeze_adaptation():
    lim = ActuatorLimits(lo=(-40.0, 0.0, 0.0, 0.0), hi=(60.0, 0.004, 1e-6, 0.03))
    ctl = EngineController("second-order-siso", P, 0.08, rho=(1e4, 1e-6, 1e-6, 1e4), limits=lim,
                           m_ad0=5e-3)
    meas = EngineState(650.0, 5e-4, 5e-3, 150.0)
    refs = (650.0, 14.6, 150.0)
    first = ctl.step(meas, refs, refs)
    assert first.clamped >= 1 and first.inputs.mdot_ai == 1e-6
    a_before = ctl.alpha_hat[MA]
    ctl.step(EngineState(650.0, 5e-4, 7e-3, 150.0), refs, refs)
    assert ctl.alpha_hat[MA] == a_before


def test_functional_entry_point():
    ctl = EngineController("second-order-siso", P, 0.08)
    out = engine_step_controllers(EngineState(650.0, 5e-4, 5e-3, 150.0), (650.0, 14.6, 150.0),
                                  (650.0, 14.6, 150.0), ctl)
    assert out.mdot_fc >= 0 and out.mdot_ai >= 0
    with pytest.raises(ConfigError):
        engine_step_controllers(EngineState(650.0, 5e-4, 5e-3, 150.0), (650.0, 14.6, 150.0),
                                (650.0, 14.6, 150.0), ctl, T=0.02)


def test_invalid_mode_and_coupling():
    with pytest.raises(ConfigError):
        EngineController("third-order", P, 0.08)
    with pytest.raises(ConfigError):
        EngineController("second-order-mimo", P, 0.08, coupling={(1, 1): 0.1})
