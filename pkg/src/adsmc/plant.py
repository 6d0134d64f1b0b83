"""Uncertain affine plants and their first-order Euler discretization.

The generic plant is

    x(k+1) = x(k) + T * (diag(alpha) f(x(k)) + g(x(k)) u(k))

where ``alpha`` holds one unknown constant multiplier per channel.  The SI
engine mean-value model is provided as a four-channel instance with the
fixed channel order (T_exh, mdot_f, m_a, omega_e).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ContractViolation, DomainError, NumericOverflowError

ENGINE_CHANNELS = ("T_exh", "mdot_f", "m_a", "omega_e")
ENGINE_INPUTS = ("delta", "mdot_fc", "mdot_ai", "m_ad")


@dataclass(frozen=True)
class AffinePlant:
    """Affine plant ``x' = diag(alpha) f(x) + g(x) u`` sampled every ``T`` seconds.

    ``g`` may return either the diagonal of the input matrix (shape ``(r,)``)
    or the full ``(r, r)`` matrix.
    """

    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    alpha_true: np.ndarray
    T: float
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha_true, dtype=float))
        object.__setattr__(self, "alpha_true", alpha)
        if not self.T > 0:
            raise ContractViolation(f"sampling period must be positive, got {self.T}")
        if not np.all(np.isfinite(alpha)):
            raise ContractViolation("alpha_true entries must be finite")

    @property
    def dim(self) -> int:
        return self.alpha_true.shape[0]

    def channel_name(self, i: int) -> str:
        return self.names[i] if self.names else f"x{i}"


def _apply_gain(gx: np.ndarray, u: np.ndarray) -> np.ndarray:
    if gx.ndim == 1:
        return gx * u
    return gx @ u


def euler_step(plant: AffinePlant, x, u) -> np.ndarray:
    """Advance the plant by one sampling period with input ``u`` held constant."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    r = plant.dim
    if x.shape != (r,) or u.shape != (r,):
        raise ContractViolation(
            f"expected state and input of shape ({r},), got {x.shape} and {u.shape}"
        )
    fx = np.asarray(plant.f(x), dtype=float)
    gx = np.asarray(plant.g(x), dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        x_next = x + plant.T * (plant.alpha_true * fx + _apply_gain(gx, u))
    bad = ~np.isfinite(x_next)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise NumericOverflowError(
            f"non-finite state in channel {plant.channel_name(i)!r} after Euler step"
        )
    return x_next


# ---------------------------------------------------------------------------
# SI engine mean-value model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EngineState:
    """Engine state in the fixed channel order (T_exh, mdot_f, m_a, omega_e).

    Units: degC, kg/s, kg, rad/s.
    """

    T_exh: float
    mdot_f: float
    m_a: float
    omega_e: float

    def as_array(self) -> np.ndarray:
        return np.array([self.T_exh, self.mdot_f, self.m_a, self.omega_e], dtype=float)

    @classmethod
    def from_array(cls, x: Sequence[float]) -> "EngineState":
        return cls(float(x[0]), float(x[1]), float(x[2]), float(x[3]))


@dataclass(frozen=True)
class EngineParams:
    """Engine constants and empirical maps.

    ``tau_f``, ``J`` and ``k1`` are calibration values, not measured data.
    ``eta_vol_terms`` is a polynomial in (m_a, omega_e) given as
    ``(coefficient, power_of_m_a, power_of_omega_e)`` triples; the default is
    the constant 0.8.  ``afi`` is a constant or a callable of the state.
    """

    tau_f: float = 0.06
    J: float = 0.14
    k1: float = 0.0125
    eta_vol_terms: tuple[tuple[float, int, int], ...] = ((0.8, 0, 0),)
    afi: float | Callable[[EngineState], float] = 1.0
    exh_target_gain: float = 600.0
    spark_gain: float = 7.5
    torque_gain: float = 30000.0
    friction_slope: float = 0.4
    friction_offset: float = 100.0
    mdot_f_deadband: float = 1e-9

    def __post_init__(self):
        if not self.tau_f > 0:
            raise DomainError(f"tau_f must be positive, got {self.tau_f}")
        if not self.J > 0:
            raise DomainError(f"J must be positive, got {self.J}")

    def eta_vol(self, m_a: float, omega_e: float) -> float:
        eta = 0.0
        for c, p_m, p_w in self.eta_vol_terms:
            eta += c * m_a**p_m * omega_e**p_w
        if not 0.0 < eta <= 1.2:
            raise DomainError(f"volumetric efficiency {eta:.4g} outside (0, 1.2]")
        return eta

    def afi_value(self, state: EngineState) -> float:
        return float(self.afi(state)) if callable(self.afi) else float(self.afi)


def tau_e(omega_e: float) -> float:
    """Exhaust-gas temperature time constant 2*pi/omega_e in seconds."""
    if not omega_e > 0:
        raise DomainError(f"engine speed must be positive, got {omega_e} rad/s")
    return 2.0 * math.pi / omega_e


def mdot_ao(state: EngineState, params: EngineParams) -> float:
    """Air mass flow out of the manifold into the cylinders, kg/s."""
    return params.k1 * params.eta_vol(state.m_a, state.omega_e) * state.m_a * state.omega_e


def engine_dynamics(state: EngineState, params: EngineParams) -> tuple[np.ndarray, np.ndarray]:
    """Drift vector ``f`` and input-gain diagonal ``g`` of the engine model."""
    te = tau_e(state.omega_e)
    if state.m_a < 0 or state.mdot_f < 0:
        raise DomainError(
            f"negative mass quantities: m_a={state.m_a}, mdot_f={state.mdot_f}"
        )
    afi = params.afi_value(state)
    f = np.array(
        [
            (params.exh_target_gain * afi - state.T_exh) / te,
            -state.mdot_f / params.tau_f,
            -mdot_ao(state, params),
            -(params.friction_slope * state.omega_e + params.friction_offset) / params.J,
        ]
    )
    g = np.array(
        [
            params.spark_gain / te,
            1.0 / params.tau_f,
            1.0,
            params.torque_gain / params.J,
        ]
    )
    return f, g


def engine_plant(params: EngineParams, alpha_true, T: float) -> AffinePlant:
    """Ground-truth engine as an :class:`AffinePlant` with step ``T``.

    The fourth input is the synthetic air-mass command m_a,d, which drives the
    speed channel through the torque gain exactly as in the discrete model.
    """

    def f(x):
        return engine_dynamics(EngineState.from_array(x), params)[0]

    def g(x):
        return engine_dynamics(EngineState.from_array(x), params)[1]

    return AffinePlant(f=f, g=g, alpha_true=np.asarray(alpha_true, dtype=float), T=T,
                       names=ENGINE_CHANNELS)
