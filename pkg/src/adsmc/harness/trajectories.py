"""Seeded desired-trajectory generators for (T_exh, AFR, omega_e).

Every generator returns an array of shape ``(n, 3)`` sampled on a uniform
grid, so references are bit-identical for a given config and seed.
"""

from __future__ import annotations

import math

import numpy as np

from .config import TrajectoryConfig


def _smooth(targets: np.ndarray, h: float, tau: float) -> np.ndarray:
    """First-order lag, exactly discretized at step ``h``; starts on the first target."""
    out = np.empty_like(targets)
    a = 1.0 - math.exp(-h / tau)
    y = targets[0].copy()
    for j in range(targets.shape[0]):
        y += a * (targets[j] - y)
        out[j] = y
    return out


def _change_times(cfg: TrajectoryConfig, t_end: float) -> np.ndarray:
    if cfg.first_change >= t_end:
        return np.empty(0)
    return np.arange(cfg.first_change, t_end, cfg.hold)


def _draw_levels(cfg: TrajectoryConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    spans = np.array([cfg.T_exh_span, cfg.AFR_span, cfg.omega_span], dtype=float)
    return spans[:, 0] + (spans[:, 1] - spans[:, 0]) * rng.random((n, 3))


def _hold_levels(t: np.ndarray, times: np.ndarray, start: np.ndarray, levels: np.ndarray):
    idx = np.searchsorted(times, t, side="right")
    table = np.vstack([start[None, :], levels])
    return table[idx]


def reference_grid(cfg: TrajectoryConfig, seed: int, h: float, n: int) -> np.ndarray:
    """References at ``t = j*h`` for ``j = 0..n-1``."""
    t = np.arange(n) * h
    start = np.array([cfg.T_exh0, cfg.AFR0, cfg.omega0], dtype=float)
    rng = np.random.default_rng(seed)
    t_end = t[-1] + h if n else 0.0
    if cfg.kind == "constant" or n == 0:
        return np.tile(start, (n, 1))
    times = _change_times(cfg, t_end)
    if cfg.kind == "steps":
        levels = _draw_levels(cfg, rng, len(times))
        return _smooth(_hold_levels(t, times, start, levels), h, cfg.smoothing)
    if cfg.kind == "ramps":
        levels = _draw_levels(cfg, rng, len(times))
        knots_t = [0.0]
        knots_v = [start]
        prev = start
        for tc, lv in zip(times, levels):
            knots_t += [tc, tc + 0.5 * cfg.hold]
            knots_v += [prev, lv]
            prev = lv
        knots_t = np.array(knots_t)
        knots_v = np.array(knots_v)
        return np.column_stack([np.interp(t, knots_t, knots_v[:, c]) for c in range(3)])
    # cold-start: idle flare with hot exhaust and rich mixture, then settling
    # into alternating speed and AFR steps around the nominal point
    jitter = rng.uniform(-0.5, 0.5, size=len(times))
    times = np.sort(np.maximum(times + jitter, 0.0))
    first = np.array([cfg.T_exh_span[1], cfg.AFR_span[0], cfg.omega_span[1]])
    levels = np.empty((len(times), 3))
    for m in range(len(times)):
        sign = 1.0 if m % 2 else -1.0
        levels[m] = (
            cfg.T_exh0,
            cfg.AFR0 + sign * 0.25 * (cfg.AFR_span[1] - cfg.AFR_span[0]) * (m > 0),
            cfg.omega0 + (0.25 * (cfg.omega_span[1] - cfg.omega_span[0]) if m % 2 else 0.0),
        )
    return _smooth(_hold_levels(t, times, first, levels), h, cfg.smoothing)
