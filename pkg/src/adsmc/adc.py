"""Controller-boundary imprecision: sample-and-hold plus uniform quantization.

An :class:`AdcChannel` models one converter (measured state or held control
output).  :func:`predict_mu` turns the converter settings into the bound used
as the switching-control gain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .errors import ContractViolation, SingularGainError

# Tolerance on tick boundaries; floats like 0.08/0.02 are not exact multiples.
_TICK_EPS = 1e-9


@dataclass
class AdcChannel:
    """One converter with a mid-tread quantizer and a hold interval.

    ``bits=None`` gives an ideal channel (no quantization, no clamping), which
    is how "no ADC" runs are expressed.
    """

    bits: int | None
    range_lo: float
    range_hi: float
    period: float
    base_step: float | None = None
    saturation_count: int = field(default=0, init=False)
    _held: float | None = field(default=None, init=False, repr=False)
    _held_tick: int = field(default=-1, init=False, repr=False)
    _last_t: float = field(default=-math.inf, init=False, repr=False)

    def __post_init__(self):
        if not self.range_hi > self.range_lo:
            raise ContractViolation(
                f"range_hi ({self.range_hi}) must exceed range_lo ({self.range_lo})"
            )
        if self.bits is not None and self.bits < 2:
            raise ContractViolation(f"bits must be >= 2, got {self.bits}")
        if not self.period > 0:
            raise ContractViolation(f"period must be positive, got {self.period}")
        if self.base_step is not None:
            ratio = self.period / self.base_step
            if ratio < 1 - _TICK_EPS or abs(ratio - round(ratio)) > 1e-6:
                raise ContractViolation(
                    f"period {self.period} is not an integer multiple of base step "
                    f"{self.base_step}"
                )

    @property
    def q(self) -> float:
        """Quantization step (LSB) in physical units; 0 for an ideal channel."""
        if self.bits is None:
            return 0.0
        return (self.range_hi - self.range_lo) / (2**self.bits - 1)

    def reset(self):
        self.saturation_count = 0
        self._held = None
        self._held_tick = -1
        self._last_t = -math.inf


def quantize(ch: AdcChannel, v: float) -> float:
    """Nearest level of the channel's mid-tread quantizer, clamping out-of-range input."""
    if ch.bits is None:
        return float(v)
    if v < ch.range_lo or v > ch.range_hi:
        ch.saturation_count += 1
        v = min(max(v, ch.range_lo), ch.range_hi)
    q = ch.q
    level = round((v - ch.range_lo) / q)
    return min(ch.range_lo + level * q, ch.range_hi)


def sample_hold(ch: AdcChannel, v: float, t: float) -> float:
    """Quantized value captured at the most recent multiple of ``ch.period``."""
    if t < ch._last_t:
        raise ContractViolation(f"time went backwards: {t} < {ch._last_t}")
    ch._last_t = t
    tick = math.floor(t / ch.period + _TICK_EPS)
    if tick != ch._held_tick or ch._held is None:
        ch._held = quantize(ch, v)
        ch._held_tick = tick
    return ch._held


@dataclass(frozen=True)
class UncertaintyBound:
    """Predicted imprecision on a state channel and its control input."""

    mu_state: float
    mu_u: float


def predict_mu(
    f: Callable[[float], float],
    g: Callable[[float], float],
    alpha_hat: float,
    ch: AdcChannel,
    x: float,
    beta: float,
    T: float,
    x_d: float | None = None,
    x_d_next: float | None = None,
) -> UncertaintyBound:
    """Predict the state-side and input-side imprecision of one channel.

    The state bound is half an LSB plus the drift the state can accumulate
    over one hold interval, ``q/2 + period*|alpha_hat*f(x)|``.  It is carried
    to the input by re-evaluating the equivalent control on both sides of the
    measured value::

        mu_u = |u_eq(x + mu_state) - u_eq(x - mu_state)| / 2

    ``beta=0`` propagates through the first-order law instead of the
    second-order one.  ``T`` is the controller period used inside the law; it
    is kept separate from ``ch.period`` so each effect can be varied alone.
    """
    x_d = x if x_d is None else x_d
    x_d_next = x if x_d_next is None else x_d_next
    gx = g(x)
    if gx == 0:
        raise SingularGainError(f"zero input gain at x={x}")
    mu_state = ch.q / 2.0 + ch.period * abs(alpha_hat * f(x))

    def u_eq(xv):
        gv = g(xv)
        if gv == 0:
            raise SingularGainError(f"zero input gain at x={xv}")
        s = xv - x_d
        return -(T * alpha_hat * f(xv) + xv - x_d_next + beta * s) / (gv * T)

    mu_u = abs(u_eq(x + mu_state) - u_eq(x - mu_state)) / 2.0
    return UncertaintyBound(mu_state=mu_state, mu_u=mu_u)
