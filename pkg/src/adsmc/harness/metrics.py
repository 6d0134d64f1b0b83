"""Tracking metrics over the evaluation window of a run."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

REPORT_CHANNELS = ("T_exh", "AFR", "m_a", "speed")
REPORT_UNITS = {"T_exh": "degC", "AFR": "-", "m_a": "kg", "speed": "RPM"}
CONVERGENCE_TOL = 0.02
_RPM = 60.0 / (2.0 * math.pi)


@dataclass
class TrackingReport:
    """Per-channel mean and max absolute tracking errors plus run diagnostics.

    Channels are T_exh (degC), AFR, m_a (kg) and engine speed (RPM).
    ``convergence_time`` is the first time all ``|alpha - alpha_hat|`` are
    below 0.02, ``None`` if never.  ``alpha_drift`` is the net relative
    change of each estimate from that time to the end of the run and
    ``alpha_excursion`` the largest relative deviation in between.
    """

    mean_error: dict
    max_error: dict
    samples: int
    convergence_time: float | None
    alpha_hat_final: list
    alpha_drift: list | None
    alpha_excursion: list | None
    mu_u_mean: list
    mu_u_max: list
    mu_state_mean: list
    clamp_count: int = 0
    adc_saturations: list = field(default_factory=list)
    afr_held: int = 0
    dv_violations: int = 0
    diverged: bool = False
    diverged_at: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _errors(data, col):
    return {
        "T_exh": data[:, col["T_exh"]] - data[:, col["T_exh_d"]],
        "AFR": data[:, col["AFR"]] - data[:, col["AFR_d"]],
        "m_a": data[:, col["m_a"]] - data[:, col["m_a_d"]],
        "speed": (data[:, col["omega_e"]] - data[:, col["omega_e_d"]]) * _RPM,
    }


def _alpha_block(data, col, name):
    return data[:, col[f"{name}_T_exh"]:col[f"{name}_T_exh"] + 4]


def tracking_report(cfg, data, col, *, diverged_at=None, clamp_count=0, adc_saturations=(),
                    afr_held=0, dv_violations=0) -> TrackingReport:
    t = data[:, 0] if data.size else np.empty(0)
    window = (t >= cfg.transient_cut - 1e-9 * cfg.base_step) & (t < cfg.horizon)
    errs = _errors(data, col) if data.size else {k: np.empty(0) for k in REPORT_CHANNELS}
    mean_e, max_e = {}, {}
    for k in REPORT_CHANNELS:
        e = np.abs(errs[k][window])
        mean_e[k] = float(e.mean()) if e.size else math.inf
        max_e[k] = float(e.max()) if e.size else math.inf

    conv_time = None
    drift = excursion = None
    if data.size:
        a_err = _alpha_block(data, col, "alpha_err")
        a_hat = _alpha_block(data, col, "alpha_hat")
        ok = np.all(np.abs(a_err) < CONVERGENCE_TOL, axis=1)
        if ok.any():
            k = int(np.argmax(ok))
            conv_time = float(t[k])
            ref = a_hat[k]
            drift = (np.abs(a_hat[-1] - ref) / np.abs(ref)).tolist()
            excursion = (np.max(np.abs(a_hat[k:] - ref), axis=0) / np.abs(ref)).tolist()
        mu_u = _alpha_block(data, col, "mu_u")
        mu_s = _alpha_block(data, col, "mu_state")
        mu_u_mean, mu_u_max = mu_u.mean(axis=0).tolist(), mu_u.max(axis=0).tolist()
        mu_state_mean = mu_s.mean(axis=0).tolist()
        final = a_hat[-1].tolist()
    else:
        mu_u_mean = mu_u_max = mu_state_mean = [math.nan] * 4
        final = [math.nan] * 4
    return TrackingReport(
        mean_error=mean_e,
        max_error=max_e,
        samples=int(window.sum()),
        convergence_time=conv_time,
        alpha_hat_final=final,
        alpha_drift=drift,
        alpha_excursion=excursion,
        mu_u_mean=mu_u_mean,
        mu_u_max=mu_u_max,
        mu_state_mean=mu_state_mean,
        clamp_count=int(clamp_count),
        adc_saturations=list(adc_saturations),
        afr_held=int(afr_held),
        dv_violations=int(dv_violations),
        diverged=diverged_at is not None,
        diverged_at=diverged_at,
    )
