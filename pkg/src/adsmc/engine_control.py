"""Engine-specific wiring of the SISO and MIMO controllers.

Controller channels follow the plant order (T_exh, mdot_f, m_a, omega_e) and
drive the inputs (spark timing, fuel command, throttle air flow, synthetic
air-mass command).  The speed loop's synthetic command m_a,d at cycle ``k``
becomes the air-mass loop's reference at cycle ``k+1``.

The AFR loop is run on the fuel-flow channel: the desired fuel flow is
``mdot_ao / AFR_d`` so the generic law sees a fuel-flow error, while the
reported sliding value ``s2`` is the AFR error itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .adc import AdcChannel, predict_mu
from .dsmc import SisoDsmc, SisoDsmcState, adapt_alpha
from .errors import ConfigError, DomainError
from .mimo import MimoDsmc, MimoDsmcState, SurfaceDynamics, mimo_control
from .plant import EngineParams, EngineState, engine_dynamics, mdot_ao, tau_e

MODES = ("first-order-siso", "second-order-siso", "second-order-mimo")

# channel indices in plant order
TEXH, MDOTF, MA, OMEGA = range(4)


class EngineSlidingVector(NamedTuple):
    """Tracking errors in the printed order: T_exh, AFR, m_a, omega_e."""

    s1: float
    s2: float
    s3: float
    s4: float


class EngineControlInputs(NamedTuple):
    delta: float
    mdot_fc: float
    mdot_ai: float
    m_ad: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


def afr(state: EngineState, params: EngineParams) -> float:
    """Air-fuel ratio ``mdot_ao/mdot_f``; raises below the fuel-flow dead-band."""
    if state.mdot_f <= params.mdot_f_deadband:
        raise DomainError(f"fuel flow {state.mdot_f} below dead-band, AFR undefined")
    return mdot_ao(state, params) / state.mdot_f


# The four printed update laws.  Each is the generic law with its channel's
# drift; signs come from the drift itself.

def adapt_texh(alpha_hat, s, state: EngineState, params: EngineParams, rho, T, deadband=0.0):
    drift = (params.exh_target_gain * params.afi_value(state) - state.T_exh) / tau_e(state.omega_e)
    return adapt_alpha(alpha_hat, s, drift, rho, T, deadband)


def adapt_mdotf(alpha_hat, s, state: EngineState, params: EngineParams, rho, T, deadband=0.0):
    return adapt_alpha(alpha_hat, s, -state.mdot_f / params.tau_f, rho, T, deadband)


def adapt_omega(alpha_hat, s, state: EngineState, params: EngineParams, rho, T, deadband=0.0):
    loss = params.friction_slope * state.omega_e + params.friction_offset
    return adapt_alpha(alpha_hat, s, -loss / params.J, rho, T, deadband)


def adapt_ma(alpha_hat, s, state: EngineState, params: EngineParams, rho, T, deadband=0.0):
    return adapt_alpha(alpha_hat, s, -mdot_ao(state, params), rho, T, deadband)


ADAPTATION_LAWS = (adapt_texh, adapt_mdotf, adapt_ma, adapt_omega)


@dataclass(frozen=True)
class ActuatorLimits:
    """Clamp ranges for (delta, mdot_fc, mdot_ai, m_ad)."""

    lo: tuple[float, float, float, float] = (-40.0, 0.0, 0.0, 0.0)
    hi: tuple[float, float, float, float] = (60.0, 0.004, 0.05, 0.03)


def _channel_models(meas: EngineState, params: EngineParams):
    """Per-channel scalar ``(f_i(v), g_i(v))`` with the other states frozen."""
    te = tau_e(meas.omega_e)
    afi = params.afi_value(meas)
    eta = params.eta_vol(meas.m_a, meas.omega_e)
    w = meas.omega_e
    return (
        (lambda v: (params.exh_target_gain * afi - v) / te, lambda v: params.spark_gain / te),
        (lambda v: -v / params.tau_f, lambda v: 1.0 / params.tau_f),
        (lambda v: -params.k1 * eta * v * w, lambda v: 1.0),
        (lambda v: -(params.friction_slope * v + params.friction_offset) / params.J,
         lambda v: params.torque_gain / params.J),
    )


class EngineStep(NamedTuple):
    inputs: EngineControlInputs
    sliding: EngineSlidingVector
    s: np.ndarray
    xi: np.ndarray
    u_eq: np.ndarray
    u_sw: np.ndarray
    mu_state: np.ndarray
    mu_u: np.ndarray
    alpha_hat: np.ndarray
    x_d: np.ndarray
    afr_meas: float
    afr_held: bool
    clamped: int


@dataclass
class EngineController:
    """All engine loops for one scenario mode.

    ``beta`` and ``rho`` are per-channel in plant order.  ``coupling`` maps
    ``(row, col)`` to off-diagonal entries of the MIMO gain matrix and is
    ignored by the SISO modes.  ``adc_states`` supply the quantization step
    and hold interval used when predicting the switching gains; ``None``
    disables the switching term.

    With ``freeze_on_clamp`` a channel skips its estimate update on the
    cycle after its command was clamped, since the error it sees was caused
    by the actuator limit rather than by model uncertainty.
    """

    mode: str
    params: EngineParams
    T: float
    beta: Sequence[float] = (0.5, 0.5, 0.5, 0.5)
    rho: Sequence[float] = (1.0, 1.0, 1.0, 1.0)
    alpha_hat0: Sequence[float] = (1.0, 1.0, 1.0, 1.0)
    coupling: dict = field(default_factory=dict)
    adapt: bool = True
    phi_scale: float = 2.0
    deadband: float = 1e-9
    limits: ActuatorLimits = field(default_factory=ActuatorLimits)
    adc_states: Sequence[AdcChannel] | None = None
    m_ad0: float | None = None
    freeze_on_clamp: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        self.beta = tuple(float(b) for b in self.beta)
        self.rho = tuple(float(r) for r in self.rho)
        order = 1 if self.mode == "first-order-siso" else 2
        self.loops = None
        self.mimo = None
        if self.mode == "second-order-mimo":
            B = np.diag(self.beta)
            for (i, j), v in self.coupling.items():
                if i == j:
                    raise ConfigError("coupling entries must be off-diagonal")
                B[i, j] = v
            self.mimo = MimoDsmc(MimoDsmcState(
                beta_mat=B,
                gamma_mat=np.diag(np.sqrt(self.rho)),
                T=self.T,
                a_hat=np.array(self.alpha_hat0, dtype=float),
                phi_scale=self.phi_scale,
                deadband=self.deadband,
                adapt=self.adapt,
            ))
        else:
            self.loops = [
                SisoDsmc(SisoDsmcState(
                    beta=self.beta[i], T=self.T, rho_alpha=self.rho[i],
                    alpha_hat=float(self.alpha_hat0[i]), phi_scale=self.phi_scale,
                    deadband=self.deadband, adapt=self.adapt, order=order,
                ))
                for i in range(4)
            ]
        self.m_ad_prev = self.m_ad0
        self.last_afr = math.nan
        self.clamp_count = 0
        self._was_clamped = np.zeros(4, dtype=bool)
        self._now_clamped = np.zeros(4, dtype=bool)

    @property
    def order(self) -> int:
        return 1 if self.mode == "first-order-siso" else 2

    @property
    def alpha_hat(self) -> np.ndarray:
        if self.mimo is not None:
            return self.mimo.state.a_hat.copy()
        return np.array([lp.state.alpha_hat for lp in self.loops])

    def _mu(self, meas, x, x_d, x_d_next, alpha_hat, beta_diag):
        mu_state = np.zeros(4)
        mu_u = np.zeros(4)
        if self.adc_states is None:
            return mu_state, mu_u
        models = _channel_models(meas, self.params)
        for i in range(4):
            f_i, g_i = models[i]
            b = beta_diag[i] if self.order == 2 else 0.0
            bound = predict_mu(f_i, g_i, alpha_hat[i], self.adc_states[i], x[i], b, self.T,
                               x_d=x_d[i], x_d_next=x_d_next[i])
            mu_state[i] = bound.mu_state
            mu_u[i] = bound.mu_u
        return mu_state, mu_u

    def _clamp(self, i, v):
        lo, hi = self.limits.lo[i], self.limits.hi[i]
        if v < lo or v > hi:
            self.clamp_count += 1
            self._now_clamped[i] = True
            return min(max(v, lo), hi)
        return v

    def _adapt_mask(self) -> np.ndarray:
        if not self.freeze_on_clamp:
            return np.ones(4, dtype=bool)
        return ~self._was_clamped

    def step(self, meas: EngineState, refs, refs_next) -> EngineStep:
        """One control cycle.

        ``refs``/``refs_next`` are ``(T_exh_d, AFR_d, omega_d)`` at ``k`` and
        ``k+1``.
        """
        p = self.params
        T = self.T
        f, g = engine_dynamics(meas, p)
        x = meas.as_array()
        ao = -f[MA]
        try:
            afr_m = afr(meas, p)
            self.last_afr = afr_m
            held = False
        except DomainError:
            afr_m = self.last_afr
            held = True
        texh_d, afr_d, w_d = refs
        texh_dn, afr_dn, w_dn = refs_next
        if self.m_ad_prev is None:
            self.m_ad_prev = meas.m_a
        x_d = np.array([texh_d, ao / afr_d, self.m_ad_prev, w_d])
        x_d_next = np.array([texh_dn, ao / afr_dn, self.m_ad_prev, w_dn])
        alpha_hat = self.alpha_hat
        clamps_before = self.clamp_count
        self._now_clamped[:] = False
        mask = self._adapt_mask()

        if self.mimo is not None:
            beta_diag = np.diag(self.mimo.state.beta_mat)
            mu_state, mu_u = self._mu(meas, x, x_d, x_d_next, alpha_hat, beta_diag)
            # Row OMEGA of the solve never depends on the m_a reference, so a
            # first pass yields m_a,d(k) and the second pass uses it.
            st = self.mimo.state
            s_now = x - x_d
            s_prev = s_now if st.s_prev is None else st.s_prev
            sd = SurfaceDynamics.from_channels(f, g, x_d, x_d_next, T)
            first = mimo_control(sd, s_now, s_prev, st,
                                 mu_u if self.adc_states else np.zeros(4), T, mu_state)
            m_ad = self._clamp(OMEGA, first[OMEGA])
            x_d_next[MA] = m_ad
            mu_state, mu_u = self._mu(meas, x, x_d, x_d_next, alpha_hat, beta_diag)
            res = self.mimo.step(x, x_d, x_d_next, f, g, mu_u if self.adc_states else None,
                                 mu_state, adapt_mask=mask)
            u = res.u.copy()
            u_eq, u_sw, s, xi = res.u_eq, res.u_sw, res.s, res.xi
        else:
            beta_diag = np.array(self.beta)
            u = np.zeros(4)
            u_eq = np.zeros(4)
            u_sw = np.zeros(4)
            s = np.zeros(4)
            xi = np.zeros(4)
            mu_state, mu_u = self._mu(meas, x, x_d, x_d_next, alpha_hat, beta_diag)
            for i in (OMEGA, TEXH, MDOTF, MA):
                if i == MA:
                    x_d_next[MA] = m_ad
                    ms, mu = self._mu(meas, x, x_d, x_d_next, alpha_hat, beta_diag)
                    mu_state[MA], mu_u[MA] = ms[MA], mu[MA]
                self.loops[i].state.adapt = self.adapt and bool(mask[i])
                cs = self.loops[i].step(x[i], x_d[i], x_d_next[i], f[i], g[i],
                                        mu_u[i], mu_state[i])
                u[i], u_eq[i], u_sw[i], s[i], xi[i] = cs.u, cs.u_eq, cs.u_sw, cs.s, cs.xi
                if i == OMEGA:
                    m_ad = self._clamp(OMEGA, u[OMEGA])

        u[OMEGA] = m_ad
        for i in (TEXH, MDOTF, MA):
            u[i] = self._clamp(i, u[i])
        sliding = EngineSlidingVector(
            s1=s[TEXH],
            s2=afr_m - afr_d,
            s3=s[MA],
            s4=s[OMEGA],
        )
        self.m_ad_prev = m_ad
        self._was_clamped = self._now_clamped.copy()
        return EngineStep(
            inputs=EngineControlInputs(*u),
            sliding=sliding,
            s=s,
            xi=xi,
            u_eq=u_eq,
            u_sw=u_sw,
            mu_state=mu_state,
            mu_u=mu_u,
            alpha_hat=alpha_hat,
            x_d=x_d,
            afr_meas=afr_m,
            afr_held=held,
            clamped=self.clamp_count - clamps_before,
        )


def engine_step_controllers(meas: EngineState, refs, refs_next, controller: EngineController,
                            T: float | None = None) -> EngineControlInputs:
    """Functional entry point: one cycle of ``controller``, returning actuator commands."""
    if T is not None and not math.isclose(T, controller.T):
        raise ConfigError(f"controller period {controller.T} differs from T={T}")
    return controller.step(meas, refs, refs_next).inputs
