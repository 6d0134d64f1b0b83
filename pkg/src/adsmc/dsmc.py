"""Single-channel discrete sliding-mode controllers.

Two controllers share one state object:

* the adaptive second-order law, which drives ``s(k+1) = -beta*s(k)`` through
  the equivalent control and adds a saturated switching term built from the
  measurable history ``s(k) + beta*s(k-1)``;
* the first-order baseline, which aims ``s(k+1) = 0`` and switches on ``s(k)``.

Both estimate the channel's multiplicative uncertainty online with
``alpha_hat(k+1) = alpha_hat(k) + T*s(k)*f(x(k))/rho_alpha``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    ConfigError,
    InvalidBetaError,
    NumericOverflowError,
    ReachingGainError,
    SingularGainError,
)


def sat(z):
    """Unit saturation, elementwise for arrays."""
    if isinstance(z, np.ndarray):
        return np.clip(z, -1.0, 1.0)
    return min(1.0, max(-1.0, z))


@dataclass
class SisoDsmcState:
    """Gains and memory of one control loop.

    ``phi=None`` sizes the boundary layer online as ``phi_scale * mu_state``.
    ``lam``/``eps`` parameterize the reference reaching law and are only
    validated when given.  ``order=1`` marks a first-order baseline loop, for
    which ``beta`` is ignored.
    """

    beta: float
    T: float
    rho_alpha: float = 1.0
    alpha_hat: float = 1.0
    lam: float | None = None
    eps: float = 0.0
    phi: float | None = None
    phi_scale: float = 2.0
    phi_min: float = 1e-12
    s_prev: float | None = None
    deadband: float = 1e-9
    adapt: bool = True
    order: int = 2

    def __post_init__(self):
        problems = []
        if not self.T > 0:
            problems.append(ConfigError(f"T must be positive, got {self.T}"))
        if self.order not in (1, 2):
            problems.append(ConfigError(f"order must be 1 or 2, got {self.order}"))
        if self.order == 2 and not 0.0 < self.beta < 1.0:
            problems.append(InvalidBetaError(f"beta must lie in (0, 1), got {self.beta}"))
        if self.lam is not None and not 0.0 < self.T * self.lam < 1.0:
            problems.append(
                ReachingGainError(f"T*lambda must lie in (0, 1), got {self.T * self.lam}")
            )
        if not self.rho_alpha > 0:
            problems.append(ConfigError(f"rho_alpha must be positive, got {self.rho_alpha}"))
        if self.phi is not None and not self.phi > 0:
            problems.append(ConfigError(f"phi must be positive, got {self.phi}"))
        if self.eps < 0:
            problems.append(ConfigError(f"eps must be non-negative, got {self.eps}"))
        if problems:
            first = problems[0]
            raise type(first)(str(first), [str(p) for p in problems])

    @property
    def effective_beta(self) -> float:
        return self.beta if self.order == 2 else 0.0

    def boundary_layer(self, mu_state: float) -> float:
        if self.phi is not None:
            return self.phi
        return max(self.phi_scale * mu_state, self.phi_min)


class SlidingSample(NamedTuple):
    """Sliding quantities of one step."""

    s: float
    xi: float
    alpha_err: float = math.nan


class ControlSample(NamedTuple):
    """Everything one controller step produces."""

    u: float
    u_eq: float
    u_sw: float
    s: float
    xi: float
    alpha_hat: float


def sliding_variable(x, x_d):
    """Tracking error ``x - x_d``."""
    return x - x_d


def _check_gain(g_i, T):
    if g_i == 0:
        raise SingularGainError("input gain g_i is zero")
    if not T > 0:
        raise ConfigError(f"T must be positive, got {T}")


def _finite(value, what):
    if not math.isfinite(value):
        raise NumericOverflowError(f"non-finite {what}: {value}")
    return value


def equivalent_control_2nd(f_i, g_i, x, x_d_next, s, ctl: SisoDsmcState, T) -> float:
    """Input that places ``s(k+1)`` at ``-beta*s(k)`` under the estimated model."""
    _check_gain(g_i, T)
    u = -(T * ctl.alpha_hat * f_i + x - x_d_next + ctl.beta * s) / (g_i * T)
    return _finite(u, "equivalent control")


def switching_control(mu_u, s, s_prev, beta, phi) -> float:
    """``-|mu_u| * sat((s + beta*s_prev)/phi)``."""
    if mu_u == 0:
        return 0.0
    return -abs(mu_u) * sat((s + beta * s_prev) / phi)


def adapt_alpha(alpha_hat, s, f_i, rho_alpha, T, deadband=0.0) -> float:
    """One step of the uncertainty estimate; frozen while ``|f_i| <= deadband``."""
    if abs(f_i) <= deadband:
        return alpha_hat
    return alpha_hat + T * s * f_i / rho_alpha


def _first_order_parts(f_i, g_i, x, x_d_next, s, ctl, T, mu_u, mu_state):
    _check_gain(g_i, T)
    u_eq = _finite(-(T * ctl.alpha_hat * f_i + x - x_d_next) / (g_i * T), "equivalent control")
    u_sw = switching_control(mu_u, s, 0.0, 0.0, ctl.boundary_layer(mu_state))
    return u_eq, u_sw


def first_order_control(f_i, g_i, x, x_d_next, s, ctl: SisoDsmcState, T, mu_u,
                        mu_state=0.0) -> float:
    """First-order baseline: deadbeat equivalent control plus ``-|mu_u| sat(s/phi)``."""
    u_eq, u_sw = _first_order_parts(f_i, g_i, x, x_d_next, s, ctl, T, mu_u, mu_state)
    return u_eq + u_sw


def gao_reaching_step(s, lam, eps, T) -> float:
    """Reference reaching-law dynamics ``(1 - T*lam)*s - T*eps*sign(s)``."""
    if not 0.0 < T * lam < 1.0:
        raise ReachingGainError(f"T*lambda must lie in (0, 1), got {T * lam}")
    if eps < 0:
        raise ConfigError(f"eps must be non-negative, got {eps}")
    sign = 0.0 if s == 0 else math.copysign(1.0, s)
    return (1.0 - T * lam) * s - T * eps * sign


class LyapunovDiag(NamedTuple):
    V: float
    dV_pred: float
    dV_expanded: float


def lyapunov_value(s_k, s_k1, alpha_err_k, alpha_err_k1, beta, rho_alpha) -> float:
    """``0.5*(s(k+1)^2 + beta*s(k)^2) + 0.5*rho*(a(k+1)^2 + beta*a(k)^2)``."""
    return 0.5 * (s_k1**2 + beta * s_k**2) + 0.5 * rho_alpha * (
        alpha_err_k1**2 + beta * alpha_err_k**2
    )


def lyapunov_diag(s_k, s_k1, s_k2, alpha_err_k, alpha_err_k1, beta, rho_alpha) -> LyapunovDiag:
    """Lyapunov value at ``k`` and two predictions of its one-step difference.

    ``dV_pred`` is the closed form on the second-order manifold,
    ``-0.5*beta*(1 + beta - beta^2 - beta^3)*s(k)^2``.  ``dV_expanded`` is the
    small-``T`` expansion evaluated on the actual ``s(k), s(k+1), s(k+2)``;
    the two agree whenever ``s(k+1) = -beta*s(k)`` and ``s(k+2) = beta^2*s(k)``.
    """
    V = lyapunov_value(s_k, s_k1, alpha_err_k, alpha_err_k1, beta, rho_alpha)
    dV_pred = -0.5 * beta * (-(beta**3) - beta**2 + beta + 1.0) * s_k**2
    dV_expanded = (
        -0.5 * (beta * s_k1**2 + beta * s_k**2 + 2 * beta**2 * s_k**2 + s_k1**2 - s_k2**2)
        - beta * s_k1 * s_k
        - s_k2 * s_k1
    )
    return LyapunovDiag(V, dV_pred, dV_expanded)


class SisoDsmc:
    """Stateful SISO loop around :class:`SisoDsmcState`.

    Call :meth:`step` once per control period with the measured state, the
    reference now and one period ahead, and the model values ``f(x)`` and
    ``g(x)`` at the measurement.
    """

    def __init__(self, state: SisoDsmcState):
        self.state = state

    @property
    def order(self) -> int:
        return self.state.order

    def step(self, x, x_d, x_d_next, f_i, g_i, mu_u=0.0, mu_state=0.0) -> ControlSample:
        st = self.state
        T = st.T
        s = sliding_variable(x, x_d)
        if st.s_prev is None:
            st.s_prev = s
        phi = st.boundary_layer(mu_state)
        if st.order == 2:
            u_eq = equivalent_control_2nd(f_i, g_i, x, x_d_next, s, st, T)
            u_sw = switching_control(mu_u, s, st.s_prev, st.beta, phi)
        else:
            u_eq, u_sw = _first_order_parts(f_i, g_i, x, x_d_next, s, st, T, mu_u, mu_state)
        beta = st.effective_beta
        # model-predicted s(k+1) + beta*s(k) under alpha_hat
        s_next_pred = s + T * (st.alpha_hat * f_i + g_i * (u_eq + u_sw)) - (x_d_next - x_d)
        xi = s_next_pred + beta * s
        alpha_used = st.alpha_hat
        if st.adapt:
            st.alpha_hat = adapt_alpha(st.alpha_hat, s, f_i, st.rho_alpha, T, st.deadband)
        st.s_prev = s
        return ControlSample(u_eq + u_sw, u_eq, u_sw, s, xi, alpha_used)
