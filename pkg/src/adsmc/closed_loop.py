"""Closed-loop runs of the generic controllers on affine plants.

The plant is advanced with the same Euler recurrence the controllers model,
so with a perfect estimate and ideal measurements the sliding dynamics are
reproduced exactly.  Optional converters corrupt the measured state; their
predicted bound then drives the switching term.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .adc import AdcChannel, predict_mu, sample_hold
from .dsmc import SisoDsmc, lyapunov_value
from .mimo import MimoDsmc
from .plant import AffinePlant, euler_step


@dataclass
class SisoTrace:
    """Per-step record of a scalar closed loop (``n`` control steps)."""

    x: np.ndarray
    x_d: np.ndarray
    s: np.ndarray
    u: np.ndarray
    alpha_hat: np.ndarray
    alpha_err: np.ndarray
    beta: float
    rho_alpha: float

    def contraction_residual(self) -> np.ndarray:
        """``|s(k+2) - beta^2 s(k)| / max(1, |s(k)|)`` for every ``k``."""
        s = self.s
        return np.abs(s[2:] - self.beta**2 * s[:-2]) / np.maximum(1.0, np.abs(s[:-2]))

    def lyapunov(self) -> np.ndarray:
        """``V(k)`` for every ``k`` with a known successor."""
        s, a = self.s, self.alpha_err
        return np.array([lyapunov_value(s[k], s[k + 1], a[k], a[k + 1], self.beta,
                                        self.rho_alpha) for k in range(len(s) - 1)])

    def lyapunov_difference(self) -> np.ndarray:
        return np.diff(self.lyapunov())


def run_siso(plant: AffinePlant, loop: SisoDsmc, x0: float, x_d: Sequence[float],
             adc: AdcChannel | None = None) -> SisoTrace:
    """Run ``len(x_d) - 1`` control steps of a scalar loop from ``x0``.

    ``x_d[k]`` is the reference at step ``k``; the loop sees one step of
    preview.  Without a converter the measurement is exact and the switching
    gain is zero.
    """
    if plant.dim != 1:
        raise ValueError("run_siso needs a scalar plant")
    x_d = np.asarray(x_d, dtype=float)
    n = len(x_d) - 1
    st = loop.state
    T = plant.T
    alpha = float(plant.alpha_true[0])
    f1 = lambda v: float(plant.f(np.array([v]))[0])
    g1 = lambda v: float(np.atleast_1d(plant.g(np.array([v])))[0])
    xs, ss, us, ah = (np.empty(n + 1) for _ in range(4))
    x = float(x0)
    for k in range(n + 1):
        meas = x if adc is None else sample_hold(adc, x, k * T)
        xs[k] = x
        if k == n:
            ss[k] = x - x_d[k]
            ah[k] = st.alpha_hat
            us[k] = np.nan
            break
        if adc is None:
            mu_u = mu_s = 0.0
        else:
            b = predict_mu(f1, g1, st.alpha_hat, adc, meas, st.effective_beta, T,
                           x_d[k], x_d[k + 1])
            mu_u, mu_s = b.mu_u, b.mu_state
        out = loop.step(meas, x_d[k], x_d[k + 1], f1(meas), g1(meas), mu_u, mu_s)
        ss[k] = x - x_d[k]
        ah[k] = out.alpha_hat
        us[k] = out.u
        x = float(euler_step(plant, [x], [out.u])[0])
    return SisoTrace(xs, x_d, ss, us, ah, alpha - ah, st.effective_beta, st.rho_alpha)


@dataclass
class MimoTrace:
    x: np.ndarray
    s: np.ndarray
    u: np.ndarray
    a_hat: np.ndarray
    a_err: np.ndarray
    dV_pred: np.ndarray
    beta_mat: np.ndarray
    gamma_mat: np.ndarray

    def contraction_residual(self) -> np.ndarray:
        """``||s(k+2) - beta^2 s(k)||_inf / max(1, ||s(k)||_inf)``."""
        B2 = self.beta_mat @ self.beta_mat
        s = self.s
        pred = s[:-2] @ B2.T
        num = np.max(np.abs(s[2:] - pred), axis=1)
        return num / np.maximum(1.0, np.max(np.abs(s[:-2]), axis=1))

    def lyapunov(self) -> np.ndarray:
        """``0.5 s's + 0.5 a~' Gamma a~`` per step."""
        s, a = self.s, self.a_err
        return 0.5 * np.einsum("ki,ki->k", s, s) + 0.5 * np.einsum(
            "ki,ij,kj->k", a, self.gamma_mat, a)


def run_mimo(plant: AffinePlant, loop: MimoDsmc, x0, x_d) -> MimoTrace:
    """Run ``len(x_d) - 1`` control steps of the coupled loop with exact measurements."""
    x_d = np.asarray(x_d, dtype=float)
    n, r = x_d.shape[0] - 1, plant.dim
    st = loop.state
    x = np.asarray(x0, dtype=float).copy()
    xs = np.empty((n + 1, r))
    ss = np.empty((n + 1, r))
    us = np.full((n + 1, r), np.nan)
    ah = np.empty((n + 1, r))
    dv = np.full(n + 1, np.nan)
    for k in range(n + 1):
        xs[k] = x
        ss[k] = x - x_d[k]
        if k == n:
            ah[k] = st.a_hat
            break
        out = loop.step(x, x_d[k], x_d[k + 1], plant.f(x), plant.g(x))
        ah[k] = out.a_hat
        us[k] = out.u
        dv[k] = out.dV_pred
        x = euler_step(plant, x, out.u)
    return MimoTrace(xs, ss, us, ah, plant.alpha_true - ah, dv, st.beta_mat, st.gamma_mat)
