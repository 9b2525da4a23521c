"""Noise-variance schedules for the additive diffusion ``x_t = x_0 + sqrt(beta_bar_t) * eps``.

Timesteps are 1-indexed: ``betas[t - 1]`` is the variance added at step ``t``
and ``beta_bars[t - 1]`` is the running sum up to ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_positive_int
from .exceptions import InputError

COSINE_OFFSET = 0.008
COSINE_BETA_MAX = 0.999
CONSTANT_BETA = 0.01


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    kind: str
    betas: np.ndarray
    beta_bars: np.ndarray
    offset: float = COSINE_OFFSET
    beta_max: float | None = None
    beta_const: float | None = None

    def __post_init__(self):
        for arr in (self.betas, self.beta_bars):
            arr.setflags(write=False)

    @property
    def steps(self) -> int:
        return len(self.betas)

    T = steps

    def beta(self, t):
        return self.betas[self._index(t)]

    def beta_bar(self, t):
        return self.beta_bars[self._index(t)]

    def coefficient(self, t):
        return step_coefficient(self, t)

    def coefficients(self) -> np.ndarray:
        return step_coefficient(self, np.arange(1, self.steps + 1))

    def _index(self, t):
        t_arr = np.asarray(t)
        if np.any(t_arr < 1) or np.any(t_arr > self.steps):
            raise InputError(f"timestep out of range 1..{self.steps}: {t}")
        return t_arr.astype(np.int64) - 1

    def __eq__(self, other):
        if not isinstance(other, NoiseSchedule):
            return NotImplemented
        return self.kind == other.kind and np.array_equal(self.betas, other.betas)

    __hash__ = None


def _cosine_angle(u: float) -> float:
    return (u + COSINE_OFFSET) / (1.0 + COSINE_OFFSET) * math.pi / 2.0


def _cosine_beta(i: int, T: int) -> float:
    # 1 - cos^2(a)/cos^2(b) rewritten as sin(a+b) sin(a-b) / cos^2(b) to avoid
    # cancellation when consecutive angles are close (large T)
    a, b = _cosine_angle((i + 1) / T), _cosine_angle(i / T)
    diff = math.pi / 2.0 / (1.0 + COSINE_OFFSET) / T
    return math.sin(a + b) * math.sin(diff) / math.cos(b) ** 2


def cosine_schedule(T: int) -> NoiseSchedule:
    """Clamped cosine schedule; the last step always saturates at 0.999."""
    T = check_positive_int(T, "T")
    betas = np.array(
        [min(_cosine_beta(i, T), COSINE_BETA_MAX) for i in range(T)],
        dtype=np.float64,
    )
    return NoiseSchedule("cosine", betas, np.cumsum(betas), beta_max=COSINE_BETA_MAX)


def constant_schedule(T: int, beta: float = CONSTANT_BETA) -> NoiseSchedule:
    T = check_positive_int(T, "T")
    if not 0.0 < beta < 1.0:
        raise InputError(f"beta must lie in (0, 1), got {beta}")
    betas = np.full(T, float(beta))
    # t * beta rather than a running sum, so beta_bar_t is exact to rounding
    beta_bars = np.arange(1, T + 1, dtype=np.float64) * beta
    return NoiseSchedule("constant", betas, beta_bars, beta_const=float(beta))


def make_schedule(kind: str, T: int) -> NoiseSchedule:
    if kind == "cosine":
        return cosine_schedule(T)
    if kind in ("constant", "linear"):
        return constant_schedule(T)
    raise InputError(f"unknown schedule kind {kind!r}")


def step_coefficient(s: NoiseSchedule, t):
    """``sqrt(beta_bar_t) * beta_t / (beta_bar_t + beta_t)``; accepts scalar or array ``t``."""
    idx = s._index(t)
    beta = s.betas[idx]
    beta_bar = s.beta_bars[idx]
    return np.sqrt(beta_bar) * beta / (beta_bar + beta)
