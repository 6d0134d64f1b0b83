"""Declarative scenario configuration.

Scenario files are YAML mappings with nested sections (``gains``, ``adc``,
``trajectory``, ``engine``, ``limits``).  Every field has a default, so an
empty file is a valid nominal scenario.  Cross-field invariants are checked
together and reported as one :class:`~adsmc.errors.ConfigError` that lists
every violation.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..errors import ConfigError

Mode = Literal["first-order-siso", "second-order-siso", "second-order-mimo"]
CHANNEL_KEYS = ("T_exh", "mdot_f", "m_a", "omega_e")

Vec4 = tuple[float, float, float, float]
Range = tuple[float, float]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class CouplingEntry(_Section):
    """Off-diagonal entry of the MIMO gain matrix, by channel name or index."""

    row: str | int
    col: str | int
    value: float

    def indices(self) -> tuple[int, int]:
        return _channel_index(self.row), _channel_index(self.col)


def _channel_index(c: str | int) -> int:
    if isinstance(c, int):
        if not 0 <= c < 4:
            raise ValueError(f"channel index {c} outside 0..3")
        return c
    aliases = {"afr": 1, "speed": 3, "omega": 3, "t_exh": 0, "texh": 0, "m_a": 2,
               "mdot_f": 1, "omega_e": 3}
    key = c.lower()
    if key not in aliases:
        raise ValueError(f"unknown channel {c!r}")
    return aliases[key]


# Adaptation gains tuned at the reference period; the loop gain of the
# estimator scales with T^2/rho, so other periods rescale by (T/T_ref)^2.
TUNED_RHO: Vec4 = (3.6e4, 1.65e-6, 1.2e-6, 1.7e4)
TUNED_RHO_PERIOD = 0.08
TUNED_BETA: Vec4 = (0.8, 0.4, 0.2, 0.2)


def tuned_rho(T: float) -> tuple[float, ...]:
    scale = (T / TUNED_RHO_PERIOD) ** 2
    return tuple(r * scale for r in TUNED_RHO)


class GainsConfig(_Section):
    """Controller gains per channel in plant order (T_exh, mdot_f, m_a, omega_e).

    ``rho=None`` selects the tuned adaptation gains rescaled to the
    scenario period (see :func:`tuned_rho`).
    """

    beta: Vec4 = TUNED_BETA
    rho: Optional[Vec4] = None
    alpha_hat0: Vec4 = (1.0, 1.0, 1.0, 1.0)
    coupling: list[CouplingEntry] = Field(default_factory=list)
    phi_scale: float = Field(2.0, gt=0)
    deadband: float = Field(1e-9, ge=0)
    adapt: bool = True
    freeze_on_clamp: bool = True


class AdcConfig(_Section):
    """Converter ranges for measured states and held control outputs.

    The hold period of every converter equals the controller period ``T``
    and the word length is the scenario's ``bits``.
    """

    state_ranges: tuple[Range, Range, Range, Range] = (
        (0.0, 1000.0), (0.0, 0.002), (0.0, 0.02), (0.0, 800.0))
    input_ranges: tuple[Range, Range, Range, Range] = (
        (-40.0, 60.0), (0.0, 0.004), (0.0, 0.05), (0.0, 0.03))
    quantize_outputs: bool = True
    switching: bool = True


class TrajectoryConfig(_Section):
    """Reference generator selection.

    ``kind`` is one of ``constant``, ``steps``, ``ramps`` or ``cold-start``.
    ``seed=None`` uses the scenario seed.
    """

    kind: Literal["constant", "steps", "ramps", "cold-start"] = "steps"
    seed: Optional[int] = None
    T_exh0: float = 650.0
    AFR0: float = 14.6
    omega0: float = 150.0
    first_change: float = Field(6.0, ge=0)
    hold: float = Field(6.0, gt=0)
    smoothing: float = Field(0.4, gt=0)
    T_exh_span: Range = (620.0, 700.0)
    AFR_span: Range = (14.0, 15.2)
    omega_span: Range = (120.0, 200.0)


class EngineConfig(_Section):
    tau_f: float = Field(0.06, gt=0)
    J: float = Field(0.14, gt=0)
    k1: float = Field(0.0125, gt=0)
    eta_vol_terms: list[tuple[float, int, int]] = Field(default_factory=lambda: [(0.8, 0, 0)])
    afi: float = Field(1.0, gt=0)


class LimitsConfig(_Section):
    lo: Vec4 = (-40.0, 0.0, 0.0, 0.0)
    hi: Vec4 = (60.0, 0.004, 0.05, 0.03)


class ScenarioConfig(_Section):
    """One closed-loop engine experiment."""

    name: str = "scenario"
    mode: Mode = "second-order-siso"
    T: float = Field(0.08, gt=0)
    base_step: float = Field(0.002, gt=0)
    bits: Optional[int] = 16
    alpha_true: Vec4 = (1.0, 1.0, 1.0, 1.0)
    horizon: float = Field(40.0, gt=0)
    transient_cut: float = Field(5.0, ge=0)
    seed: int = Field(0, ge=0, lt=2**64)
    x0: Optional[Vec4] = None
    gains: GainsConfig = Field(default_factory=GainsConfig)
    adc: AdcConfig = Field(default_factory=AdcConfig)
    trajectory: TrajectoryConfig = Field(default_factory=TrajectoryConfig)
    engine: EngineConfig = Field(default_factory=EngineConfig)
    limits: LimitsConfig = Field(default_factory=LimitsConfig)

    @model_validator(mode="after")
    def _cross_checks(self):
        problems = scenario_problems(self)
        if problems:
            raise ValueError("; ".join(problems))
        return self

    @property
    def steps_per_tick(self) -> int:
        return int(round(self.T / self.base_step))

    @property
    def trajectory_seed(self) -> int:
        return self.seed if self.trajectory.seed is None else self.trajectory.seed

    def beta_matrix(self) -> np.ndarray:
        B = np.diag(np.asarray(self.gains.beta, dtype=float))
        for c in self.gains.coupling:
            i, j = c.indices()
            B[i, j] = c.value
        return B

    def resolved_rho(self) -> tuple[float, ...]:
        return tuple(self.gains.rho) if self.gains.rho is not None else tuned_rho(self.T)

    def coupling_dict(self) -> dict:
        return {c.indices(): c.value for c in self.gains.coupling}

    def to_header(self) -> str:
        """Fully resolved configuration, defaults included, as compact JSON."""
        data = self.model_dump(mode="json")
        data["gains"]["rho"] = list(self.resolved_rho())
        return json.dumps(data, sort_keys=True)


def scenario_problems(cfg: ScenarioConfig) -> list[str]:
    """Every violated cross-field invariant of ``cfg``."""
    out = []
    if not cfg.horizon > cfg.transient_cut:
        out.append(f"horizon ({cfg.horizon}) must exceed transient_cut ({cfg.transient_cut})")
    ratio = cfg.T / cfg.base_step
    if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-6:
        out.append(f"T ({cfg.T}) must be an integer multiple of base_step ({cfg.base_step})")
    if cfg.bits is not None and cfg.bits < 2:
        out.append(f"bits must be >= 2 or null, got {cfg.bits}")
    for i, a in enumerate(cfg.alpha_true):
        if not math.isfinite(a):
            out.append(f"alpha_true[{CHANNEL_KEYS[i]}] must be finite")
    g = cfg.gains
    for i, r in enumerate(g.rho or ()):
        if not r > 0:
            out.append(f"gains.rho[{CHANNEL_KEYS[i]}] must be positive, got {r}")
    if cfg.mode != "first-order-siso":
        for i, b in enumerate(g.beta):
            if not 0.0 < b < 1.0:
                out.append(f"gains.beta[{CHANNEL_KEYS[i]}] must lie in (0, 1), got {b}")
    if g.coupling:
        if cfg.mode != "second-order-mimo":
            out.append("gains.coupling is only valid in second-order-mimo mode")
        try:
            for c in g.coupling:
                i, j = c.indices()
                if i == j:
                    out.append(f"coupling entry ({c.row}, {c.col}) is on the diagonal")
        except ValueError as exc:
            out.append(f"gains.coupling: {exc}")
    if cfg.mode == "second-order-mimo" and not out:
        eig = np.linalg.eigvals(cfg.beta_matrix())
        rad = float(np.max(np.abs(eig)))
        if rad >= 1.0:
            out.append(f"MIMO beta matrix spectral radius {rad:.4g} must be < 1")
        if np.any(eig.real <= 0):
            out.append("MIMO beta matrix eigenvalues must have positive real part")
    for name, rngs in (("adc.state_ranges", cfg.adc.state_ranges),
                       ("adc.input_ranges", cfg.adc.input_ranges)):
        for i, (lo, hi) in enumerate(rngs):
            if not hi > lo:
                out.append(f"{name}[{i}] must have hi > lo, got ({lo}, {hi})")
    for i, (lo, hi) in enumerate(zip(cfg.limits.lo, cfg.limits.hi)):
        if not hi > lo:
            out.append(f"limits[{i}] must have hi > lo, got ({lo}, {hi})")
    if cfg.limits.lo[1] < 0 or cfg.limits.lo[2] < 0:
        out.append("flow command limits must be non-negative")
    tr = cfg.trajectory
    for name, (lo, hi) in (("T_exh_span", tr.T_exh_span), ("AFR_span", tr.AFR_span),
                           ("omega_span", tr.omega_span)):
        if not hi >= lo:
            out.append(f"trajectory.{name} must have hi >= lo")
    if tr.omega0 <= 0 or tr.omega_span[0] <= 0:
        out.append("engine speed references must be positive")
    if tr.AFR0 <= 0 or tr.AFR_span[0] <= 0:
        out.append("AFR references must be positive")
    return out


def _violations(exc: ValidationError) -> list[str]:
    out = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"])
        msg = err["msg"]
        if msg.startswith("Value error, "):
            # cross-field problems arrive joined into one message
            out.extend(m.strip() for m in msg[len("Value error, "):].split(";"))
        else:
            out.append(f"{loc}: {msg}" if loc else msg)
    return out


def parse_config(data: dict | None) -> ScenarioConfig:
    """Validate a mapping; raises ConfigError listing every violation."""
    try:
        return ScenarioConfig.model_validate(data or {})
    except ValidationError as exc:
        v = _violations(exc)
        raise ConfigError("invalid scenario: " + "; ".join(v), v) from None


def load_config(path: str | Path) -> ScenarioConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from None
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(data)


def with_updates(cfg: ScenarioConfig, **updates) -> ScenarioConfig:
    """Copy of ``cfg`` with top-level or dotted-path fields replaced, re-validated."""
    data = cfg.model_dump(mode="python")
    for key, value in updates.items():
        node = data
        parts = key.split("__")
        for p in parts[:-1]:
            node = node[p]
        node[parts[-1]] = value
    return parse_config(data)
