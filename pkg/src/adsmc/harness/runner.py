"""Closed-loop engine simulation: fine-step truth plant, sampled controller.

The truth plant is stepped with Euler at ``base_step``.  Every ``T`` seconds
the measured states pass through their converters, the controller computes
new commands, and the commands pass through the output converters, which
hold them for the whole period.  One CSV row is written per base step.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..adc import AdcChannel, sample_hold
from ..engine_control import ActuatorLimits, EngineController
from ..errors import DomainError, NumericOverflowError, SingularGainError
from ..plant import (
    ENGINE_CHANNELS,
    ENGINE_INPUTS,
    EngineParams,
    EngineState,
    engine_plant,
    euler_step,
    mdot_ao,
)
from .config import ScenarioConfig
from .metrics import TrackingReport, tracking_report
from .trajectories import reference_grid

RPM_PER_RAD_S = 60.0 / (2.0 * math.pi)

# Physical envelope outside which a run is flagged as diverged.
ENVELOPE_LO = np.array([-300.0, 0.0, 0.0, 1.0])
ENVELOPE_HI = np.array([3000.0, 0.05, 0.2, 2000.0])

_PER_CHANNEL = ("s", "xi", "alpha_hat", "alpha_err", "u_eq", "u_sw", "mu_state", "mu_u")

COLUMNS: tuple[str, ...] = (
    ("t",)
    + ENGINE_CHANNELS
    + ("AFR", "T_exh_d", "AFR_d", "m_a_d", "omega_e_d")
    + tuple(f"meas_{c}" for c in ENGINE_CHANNELS)
    + tuple(f"u_{c}" for c in ENGINE_INPUTS)
    + ("s1", "s2", "s3", "s4")
    + tuple(f"{q}_{c}" for q in _PER_CHANNEL for c in ENGINE_CHANNELS)
)
COL = {name: i for i, name in enumerate(COLUMNS)}


@dataclass
class RunResult:
    config: ScenarioConfig
    report: TrackingReport
    data: np.ndarray

    columns = COLUMNS

    def column(self, name: str) -> np.ndarray:
        return self.data[:, COL[name]]

    def write_csv(self, dest) -> None:
        """Write the time series; ``dest`` is a path or a text stream."""
        if isinstance(dest, (str, Path)):
            with open(dest, "w", newline="") as fh:
                self.write_csv(fh)
            return
        dest.write(f"# scenario: {self.config.to_header()}\n")
        dest.write(",".join(self.columns) + "\n")
        np.savetxt(dest, self.data, delimiter=",", fmt="%.12g")

    def csv_text(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def engine_params(cfg: ScenarioConfig) -> EngineParams:
    e = cfg.engine
    return EngineParams(tau_f=e.tau_f, J=e.J, k1=e.k1,
                        eta_vol_terms=tuple(tuple(t) for t in e.eta_vol_terms), afi=e.afi)


def _channels(ranges, bits, period, base_step):
    return [AdcChannel(bits, lo, hi, period, base_step) for lo, hi in ranges]


def default_initial_state(cfg: ScenarioConfig, params: EngineParams, refs0) -> np.ndarray:
    """Nominal equilibrium at the first reference (speed, air mass and fuel flow)."""
    texh_d, afr_d, w_d = refs0
    m_a = (params.friction_slope * w_d + params.friction_offset) / params.torque_gain
    ao = params.k1 * params.eta_vol(m_a, w_d) * m_a * w_d
    return np.array([texh_d, ao / afr_d, m_a, w_d])


def build_controller(cfg: ScenarioConfig, params: EngineParams, adc_states, m_ad0):
    g = cfg.gains
    return EngineController(
        mode=cfg.mode,
        params=params,
        T=cfg.T,
        beta=g.beta,
        rho=cfg.resolved_rho(),
        alpha_hat0=g.alpha_hat0,
        coupling=cfg.coupling_dict(),
        adapt=g.adapt,
        phi_scale=g.phi_scale,
        deadband=g.deadband,
        limits=ActuatorLimits(lo=tuple(cfg.limits.lo), hi=tuple(cfg.limits.hi)),
        adc_states=adc_states if cfg.adc.switching else None,
        m_ad0=m_ad0,
        freeze_on_clamp=g.freeze_on_clamp,
    )


def run_scenario(cfg: ScenarioConfig) -> RunResult:
    """Simulate one scenario; deterministic for a given config."""
    params = engine_params(cfg)
    h = cfg.base_step
    n = cfg.steps_per_tick
    n_rows = int(round(cfg.horizon / h))
    refs = reference_grid(cfg.trajectory, cfg.trajectory_seed, h, n_rows + n + 1)
    x = (np.array(cfg.x0, dtype=float) if cfg.x0 is not None
         else default_initial_state(cfg, params, refs[0]))

    adc_states = _channels(cfg.adc.state_ranges, cfg.bits, cfg.T, h)
    out_bits = cfg.bits if cfg.adc.quantize_outputs else None
    adc_inputs = _channels(cfg.adc.input_ranges, out_bits, cfg.T, h)
    ctl = build_controller(cfg, params, adc_states, m_ad0=float(x[2]))
    plant = engine_plant(params, cfg.alpha_true, h)
    alpha_true = np.asarray(cfg.alpha_true, dtype=float)

    data = np.full((n_rows, len(COLUMNS)), np.nan)
    u_held = np.zeros(4)
    meas = x.copy()
    diverged_at = None
    last = None
    afr_held = 0
    c_x, c_ref, c_meas, c_u = COL["T_exh"], COL["T_exh_d"], COL["meas_T_exh"], COL["u_delta"]
    c_s1, c_blocks = COL["s1"], COL["s_T_exh"]
    rows = 0
    for j in range(n_rows):
        t = j * h
        if j % n == 0:
            meas = np.array([sample_hold(ch, v, t) for ch, v in zip(adc_states, x)])
            try:
                last = ctl.step(EngineState.from_array(meas), refs[j], refs[j + n])
            except (DomainError, NumericOverflowError, SingularGainError):
                diverged_at = t
                break
            afr_held += last.afr_held
            u_cmd = last.inputs.as_array()
            u_held = np.array([sample_hold(ch, v, t) for ch, v in zip(adc_inputs, u_cmd)])
        row = data[j]
        row[0] = t
        row[c_x:c_x + 4] = x
        row[COL["AFR"]] = (mdot_ao(EngineState.from_array(x), params) / x[1]
                           if x[1] > params.mdot_f_deadband else math.nan)
        row[c_ref:c_ref + 4] = (refs[j][0], refs[j][1], last.x_d[2], refs[j][2])
        row[c_meas:c_meas + 4] = meas
        row[c_u:c_u + 4] = u_held
        row[c_s1:c_s1 + 4] = last.sliding
        blocks = np.concatenate([last.s, last.xi, last.alpha_hat, alpha_true - last.alpha_hat,
                                 last.u_eq, last.u_sw, last.mu_state, last.mu_u])
        row[c_blocks:c_blocks + blocks.size] = blocks
        rows = j + 1
        try:
            x = euler_step(plant, x, u_held)
        except (DomainError, NumericOverflowError):
            diverged_at = t
            break
        if np.any(x < ENVELOPE_LO) or np.any(x > ENVELOPE_HI):
            diverged_at = t
            break
    data = data[:rows]
    clamp = ctl.clamp_count
    sat = [ch.saturation_count for ch in adc_states] + [ch.saturation_count for ch in adc_inputs]
    report = tracking_report(cfg, data, COL, diverged_at=diverged_at, clamp_count=clamp,
                             adc_saturations=sat, afr_held=afr_held,
                             dv_violations=getattr(ctl.mimo, "dv_sign_violations", 0))
    return RunResult(cfg, report, data)
