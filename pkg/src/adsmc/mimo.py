"""Coupled (MIMO) adaptive second-order DSMC for relative-degree-one outputs.

The first-order surface vector evolves as

    s(k+1) = s(k) + T*Lambda_hat + T*F a + T*Upsilon u(k)

with ``F = diag(f(x))`` and one unknown multiplier per channel.  The gain
matrix ``beta`` may carry off-diagonal coupling between surfaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .dsmc import sat
from .errors import (
    ConfigError,
    ContractViolation,
    GammaMatrixError,
    InvalidBetaError,
    NumericOverflowError,
    SingularGainError,
    SpectralRadiusError,
)


def spectral_radius(m: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(m))))


@dataclass
class MimoDsmcState:
    """Gains and memory of the coupled controller.

    ``phi_vec=None`` sizes each boundary layer online as
    ``phi_scale * mu_state_i``.
    """

    beta_mat: np.ndarray
    gamma_mat: np.ndarray
    T: float
    a_hat: np.ndarray | None = None
    s_prev: np.ndarray | None = None
    phi_vec: np.ndarray | None = None
    phi_scale: float = 2.0
    phi_min: float = 1e-12
    cond_max: float = 1e12
    deadband: float = 1e-9
    adapt: bool = True
    _gamma_factor: tuple = field(init=False, repr=False)

    def __post_init__(self):
        self.beta_mat = np.atleast_2d(np.asarray(self.beta_mat, dtype=float))
        self.gamma_mat = np.atleast_2d(np.asarray(self.gamma_mat, dtype=float))
        r = self.beta_mat.shape[0]
        if self.beta_mat.shape != (r, r) or self.gamma_mat.shape != (r, r):
            raise ContractViolation(
                f"beta {self.beta_mat.shape} and Gamma {self.gamma_mat.shape} must be square "
                "and equal in size"
            )
        if not self.T > 0:
            raise ConfigError(f"T must be positive, got {self.T}")
        eig_beta = np.linalg.eigvals(self.beta_mat)
        rho = float(np.max(np.abs(eig_beta)))
        if rho >= 1.0:
            raise SpectralRadiusError(f"spectral radius of beta is {rho:.6g}, must be < 1")
        if np.any(eig_beta.real <= 0):
            raise InvalidBetaError("beta must have eigenvalues with positive real part")
        if not np.allclose(self.gamma_mat, self.gamma_mat.T, rtol=1e-12, atol=1e-14):
            raise GammaMatrixError("Gamma must be symmetric")
        if np.min(np.linalg.eigvalsh(self.gamma_mat)) <= 0:
            raise GammaMatrixError("Gamma must be positive definite")
        self._gamma_factor = cho_factor(self.gamma_mat)
        self.a_hat = (np.ones(r) if self.a_hat is None
                      else np.asarray(self.a_hat, dtype=float).copy())
        if self.phi_vec is not None:
            self.phi_vec = np.asarray(self.phi_vec, dtype=float)
            if np.any(self.phi_vec <= 0):
                raise ConfigError("boundary-layer widths must be positive")

    @property
    def dim(self) -> int:
        return self.beta_mat.shape[0]

    def gamma_sq_solve(self, v: np.ndarray) -> np.ndarray:
        """``(Gamma Gamma)^-1 v`` from the cached Cholesky factor of Gamma."""
        return cho_solve(self._gamma_factor, cho_solve(self._gamma_factor, v))

    def boundary_layers(self, mu_state) -> np.ndarray:
        if self.phi_vec is not None:
            return self.phi_vec
        return np.maximum(self.phi_scale * np.asarray(mu_state, dtype=float), self.phi_min)


@dataclass(frozen=True)
class SurfaceDynamics:
    """Data of the surface recurrence at one step (``F`` square, ``p = r``)."""

    F: np.ndarray
    Lambda_hat: np.ndarray
    Upsilon: np.ndarray

    @classmethod
    def from_channels(cls, f, g, x_d, x_d_next, T) -> "SurfaceDynamics":
        """Build the data for ``s = x - x_d`` with drift ``f`` and input gains ``g``.

        All drift carries an unknown multiplier, so the known part of the
        surface increment is only the reference increment.
        """
        f = np.asarray(f, dtype=float)
        g = np.asarray(g, dtype=float)
        upsilon = np.diag(g) if g.ndim == 1 else g
        lam = -(np.asarray(x_d_next, dtype=float) - np.asarray(x_d, dtype=float)) / T
        return cls(F=np.diag(f), Lambda_hat=lam, Upsilon=upsilon)


def _vec(v, r, name):
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (r,):
        raise ContractViolation(f"{name} must have shape ({r},), got {v.shape}")
    return v


def surface_step(sd: SurfaceDynamics, s, a, u, T) -> np.ndarray:
    """``s(k+1) = s + T*Lambda_hat + T*F a + T*Upsilon u``."""
    r = sd.Upsilon.shape[0]
    s, a, u = _vec(s, r, "s"), _vec(a, sd.F.shape[1], "a"), _vec(u, r, "u")
    return s + T * sd.Lambda_hat + T * (sd.F @ a) + T * (sd.Upsilon @ u)


def equivalent_control_mimo(sd: SurfaceDynamics, s, a_hat, ctl: MimoDsmcState, T) -> np.ndarray:
    """Solve ``T*Upsilon*u = -(I + beta) s - T*Lambda_hat - T*F a_hat``."""
    r = ctl.dim
    s, a_hat = _vec(s, r, "s"), _vec(a_hat, r, "a_hat")
    cond = np.linalg.cond(sd.Upsilon)
    if not cond < ctl.cond_max:
        raise SingularGainError(
            f"Upsilon condition number {cond:.3g} exceeds {ctl.cond_max:.3g} "
            f"(diag={np.diag(sd.Upsilon)})"
        )
    rhs = -(s + ctl.beta_mat @ s) - T * sd.Lambda_hat - T * (sd.F @ a_hat)
    u = np.linalg.solve(T * sd.Upsilon, rhs)
    if not np.all(np.isfinite(u)):
        raise NumericOverflowError("non-finite MIMO equivalent control")
    return u


def adapt_a(a_hat, s, F, ctl: MimoDsmcState, T) -> np.ndarray:
    """``a_hat + T*(Gamma Gamma)^-1 F^T s``; channels with ``|f| <= deadband`` are frozen."""
    a_hat = np.asarray(a_hat, dtype=float)
    step = T * ctl.gamma_sq_solve(F.T @ np.asarray(s, dtype=float))
    if ctl.deadband > 0 and np.allclose(F, np.diag(np.diag(F))):
        step = np.where(np.abs(np.diag(F)) > ctl.deadband, step, 0.0)
    return a_hat + step


def switching_vector(mu_u, s, s_prev, ctl: MimoDsmcState, mu_state=None) -> np.ndarray:
    """``-[|mu_u_i| sat((s_i + (beta s_prev)_i)/phi_i)]``."""
    mu_u = np.abs(np.asarray(mu_u, dtype=float))
    phi = ctl.boundary_layers(np.zeros_like(mu_u) if mu_state is None else mu_state)
    xi_hist = np.asarray(s, dtype=float) + ctl.beta_mat @ np.asarray(s_prev, dtype=float)
    return -mu_u * sat(xi_hist / phi)


def mimo_control(sd, s, s_prev, ctl: MimoDsmcState, mu_u, T, mu_state=None) -> np.ndarray:
    """Equivalent control minus the saturated switching vector."""
    u_eq = equivalent_control_mimo(sd, s, ctl.a_hat, ctl, T)
    return u_eq + switching_vector(mu_u, s, s_prev, ctl, mu_state)


class MimoLyapunovDiag(NamedTuple):
    V: float
    dV_pred: float
    V_star: float
    dV_star_printed: float


def lyapunov_diag_mimo(s_k, s_k1, a_err_k, ctl: MimoDsmcState) -> MimoLyapunovDiag:
    """Adaptation-phase and post-adaptation Lyapunov diagnostics.

    ``dV_pred = -0.5 s^T (I - beta beta) s``.  ``dV_star_printed`` evaluates
    ``-s^T beta(-beta^3 - beta^2 + beta - I) s`` as written; its constant term
    has the opposite sign of the scalar polynomial, so it is reported and
    never used as a pass/fail check.
    """
    s_k = np.asarray(s_k, dtype=float)
    s_k1 = np.asarray(s_k1, dtype=float)
    a_err_k = np.asarray(a_err_k, dtype=float)
    B = ctl.beta_mat
    eye = np.eye(ctl.dim)
    V = 0.5 * s_k @ s_k + 0.5 * a_err_k @ ctl.gamma_mat @ a_err_k
    dV_pred = -0.5 * s_k @ (eye - B @ B) @ s_k
    V_star = 0.5 * (s_k1 @ s_k1 + s_k @ B @ s_k)
    B2 = B @ B
    poly = -(B2 @ B) - B2 + B - eye
    dV_star = -s_k @ B @ poly @ s_k
    return MimoLyapunovDiag(float(V), float(dV_pred), float(V_star), float(dV_star))


class MimoStep(NamedTuple):
    u: np.ndarray
    u_eq: np.ndarray
    u_sw: np.ndarray
    s: np.ndarray
    xi: np.ndarray
    a_hat: np.ndarray
    dV_pred: float


class MimoDsmc:
    """Stateful coupled loop around :class:`MimoDsmcState`."""

    def __init__(self, state: MimoDsmcState):
        self.state = state
        self.dv_sign_violations = 0

    def step(self, x, x_d, x_d_next, f, g, mu_u=None, mu_state=None,
             adapt_mask=None) -> MimoStep:
        """One control cycle; ``adapt_mask[i] = False`` holds estimate ``i`` this cycle."""
        st = self.state
        T = st.T
        r = st.dim
        x, x_d, x_d_next = (_vec(v, r, n) for v, n in
                            ((x, "x"), (x_d, "x_d"), (x_d_next, "x_d_next")))
        s = x - x_d
        if st.s_prev is None:
            st.s_prev = s.copy()
        sd = SurfaceDynamics.from_channels(f, g, x_d, x_d_next, T)
        u_eq = equivalent_control_mimo(sd, s, st.a_hat, st, T)
        if mu_u is None:
            u_sw = np.zeros(r)
        else:
            u_sw = switching_vector(mu_u, s, st.s_prev, st, mu_state)
        u = u_eq + u_sw
        xi = surface_step(sd, s, st.a_hat, u, T) + st.beta_mat @ s
        dV_pred = -0.5 * s @ (np.eye(r) - st.beta_mat @ st.beta_mat) @ s
        if dV_pred > 1e-12 * max(1.0, s @ s):
            self.dv_sign_violations += 1
        a_used = st.a_hat.copy()
        if st.adapt:
            new = adapt_a(st.a_hat, s, sd.F, st, T)
            st.a_hat = new if adapt_mask is None else np.where(adapt_mask, new, st.a_hat)
        st.s_prev = s
        return MimoStep(u, u_eq, u_sw, s, xi, a_used, float(dV_pred))
