"""Paired-run comparison tables and parameter sweeps."""

from __future__ import annotations

import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from ..errors import ConfigError, ContractViolation
from .config import ScenarioConfig, with_updates
from .metrics import REPORT_CHANNELS, REPORT_UNITS, TrackingReport
from .runner import RunResult, run_scenario

SWEEP_AXES = ("T", "bits", "uncertainty")
DEFAULT_SWEEP_VALUES = {"T": (0.02, 0.08), "bits": (16, 10), "uncertainty": (0.5, 1.0, 1.5)}


def improvement(e_a: float, e_b: float) -> float:
    """Percentage by which ``e_a`` is below the reference ``e_b``."""
    if e_b == 0:
        return 0.0 if e_a == 0 else -math.inf
    return 100.0 * (e_b - e_a) / e_b


def _same_experiment(a: ScenarioConfig, b: ScenarioConfig) -> list[str]:
    out = []
    if a.trajectory.model_dump() | {"seed": None} != b.trajectory.model_dump() | {"seed": None}:
        out.append("trajectory generators differ")
    if a.trajectory_seed != b.trajectory_seed:
        out.append(f"trajectory seeds differ ({a.trajectory_seed} vs {b.trajectory_seed})")
    for name in ("horizon", "transient_cut", "base_step"):
        va, vb = getattr(a, name), getattr(b, name)
        if va != vb:
            out.append(f"{name} differs ({va} vs {vb})")
    return out


@dataclass
class Comparison:
    """Mean tracking errors of a candidate run ``a`` against a reference run ``b``."""

    name_a: str
    name_b: str
    report_a: TrackingReport
    report_b: TrackingReport
    improvement: dict = field(default_factory=dict)

    @classmethod
    def from_reports(cls, name_a, report_a, name_b, report_b) -> "Comparison":
        imp = {k: improvement(report_a.mean_error[k], report_b.mean_error[k])
               for k in REPORT_CHANNELS}
        return cls(name_a, name_b, report_a, report_b, imp)

    def rows(self) -> list[dict]:
        return [
            {"channel": k, "unit": REPORT_UNITS[k],
             "mean_error_b": self.report_b.mean_error[k],
             "mean_error_a": self.report_a.mean_error[k],
             "improvement_pct": self.improvement[k]}
            for k in REPORT_CHANNELS
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# a: {self.name_a}\n# b: {self.name_b}\n")
        buf.write("channel,unit,mean_error_b,mean_error_a,improvement_pct\n")
        for r in self.rows():
            buf.write(f"{r['channel']},{r['unit']},{r['mean_error_b']:.9g},"
                      f"{r['mean_error_a']:.9g},{r['improvement_pct']:.4f}\n")
        return buf.getvalue()

    def to_table(self) -> str:
        """Aligned text table: reference error, candidate error, improvement."""
        head = ("channel", f"e_mean {self.name_b} (ref)", f"e_mean {self.name_a}", "improvement")
        body = [(f"{r['channel']} [{r['unit']}]", f"{r['mean_error_b']:.4g}",
                 f"{r['mean_error_a']:.4g}", f"({r['improvement_pct']:+.2f}%)")
                for r in self.rows()]
        return _align([head] + body)


def _align(rows) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                       for i, (c, w) in enumerate(zip(r, widths))) for r in rows]
    rule = "-" * len(lines[0])
    return "\n".join([lines[0], rule] + lines[1:]) + "\n"


def compare(cfg_a: ScenarioConfig, cfg_b: ScenarioConfig,
            results: tuple[RunResult, RunResult] | None = None) -> Comparison:
    """Run both scenarios and tabulate ``100*(e_b - e_a)/e_b`` per channel.

    Raises ContractViolation when the two scenarios do not share trajectory,
    seed, horizon and metric window.
    """
    problems = _same_experiment(cfg_a, cfg_b)
    if problems:
        raise ContractViolation("scenarios are not comparable: " + "; ".join(problems))
    ra, rb = results if results is not None else (run_scenario(cfg_a), run_scenario(cfg_b))
    return Comparison.from_reports(cfg_a.name, ra.report, cfg_b.name, rb.report)


# ---------------------------------------------------------------------------
# sweeps
# ---------------------------------------------------------------------------


def sweep_config(base: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    """``base`` with one sweep axis set to ``value``."""
    if axis == "T":
        return with_updates(base, T=float(value), name=f"{base.name}@T={value}")
    if axis == "bits":
        bits = None if value in (None, "ideal", "none") else int(value)
        return with_updates(base, bits=bits, name=f"{base.name}@bits={bits}")
    if axis == "uncertainty":
        alpha = ([float(value)] * 4 if not isinstance(value, (list, tuple))
                 else [float(v) for v in value])
        return with_updates(base, alpha_true=alpha, name=f"{base.name}@alpha={value}")
    raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


def _run_report(cfg: ScenarioConfig) -> TrackingReport:
    return run_scenario(cfg).report


@dataclass
class SweepResult:
    axis: str
    values: list
    reports: list[TrackingReport]
    flags: list[str]

    def matrix(self) -> list[list]:
        """One row per value: mean errors, max errors, convergence and divergence."""
        rows = []
        for v, r in zip(self.values, self.reports):
            rows.append([v]
                        + [r.mean_error[k] for k in REPORT_CHANNELS]
                        + [r.max_error[k] for k in REPORT_CHANNELS]
                        + [r.convergence_time, r.diverged])
        return rows

    @property
    def header(self) -> list[str]:
        return ([self.axis] + [f"mean_{k}" for k in REPORT_CHANNELS]
                + [f"max_{k}" for k in REPORT_CHANNELS] + ["convergence_time", "diverged"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        for f in self.flags:
            buf.write(f"# flag: {f}\n")
        buf.write(",".join(self.header) + "\n")
        for row in self.matrix():
            buf.write(",".join(_fmt(c) for c in row) + "\n")
        return buf.getvalue()

    def to_table(self) -> str:
        head = [self.axis] + [f"e_mean {k} [{REPORT_UNITS[k]}]" for k in REPORT_CHANNELS] + [
            "conv [s]", "diverged"]
        body = []
        for v, r in zip(self.values, self.reports):
            body.append([str(v)] + [f"{r.mean_error[k]:.4g}" for k in REPORT_CHANNELS]
                        + ["-" if r.convergence_time is None else f"{r.convergence_time:.2f}",
                           "yes" if r.diverged else "no"])
        text = _align([head] + body)
        return text + "".join(f"flag: {f}\n" for f in self.flags)


def _fmt(c) -> str:
    if c is None:
        return ""
    if isinstance(c, bool):
        return "1" if c else "0"
    if isinstance(c, float):
        return f"{c:.9g}"
    return str(c)


def monotonicity_flags(axis: str, values, reports) -> list[str]:
    """Channels whose mean error decreases as the sampling period grows."""
    if axis != "T" or len(values) < 2:
        return []
    order = sorted(range(len(values)), key=lambda i: float(values[i]))
    flags = []
    for k in REPORT_CHANNELS:
        errs = [reports[i].mean_error[k] for i in order]
        if any(b < a for a, b in zip(errs, errs[1:])):
            flags.append(f"mean error of {k} is not non-decreasing in T")
    return flags


def sweep(axis: str, base: ScenarioConfig, values=None, workers: int | None = None) -> SweepResult:
    """Run ``base`` once per value of ``axis``.

    ``workers > 1`` distributes runs over a process pool; results keep the
    order of ``values`` and are identical to a serial sweep.
    """
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    values = list(DEFAULT_SWEEP_VALUES[axis] if values is None else values)
    if not values:
        raise ConfigError("sweep needs at least one value")
    cfgs = [sweep_config(base, axis, v) for v in values]
    if workers and workers > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_report, cfgs))
    else:
        reports = [_run_report(c) for c in cfgs]
    return SweepResult(axis, values, reports, monotonicity_flags(axis, values, reports))
