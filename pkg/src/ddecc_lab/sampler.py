"""Reverse-diffusion decoding.

Every step moves the soft state by ``x <- x - lam * c_t * eps_hat`` with
``c_t`` from :func:`~ddecc_lab.schedule.step_coefficient`. The three
sampling rules differ in schedule and step size:

``linear``      constant schedule, ``lam`` chosen on a grid by syndrome weight
``cosine``      cosine schedule, ``lam = 1``
``integrated``  cosine schedule, ``lam`` chosen on a grid by syndrome weight

The timestep of a step is the current syndrome weight clamped to ``[1, T]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_soft_words
from .codes import LinearCode, hard_decision
from .denoiser import DenoiserInput, NoisePrediction, additive_from_multiplicative, timestep_from_weight
from .exceptions import ConfigurationError, InputError
from .schedule import NoiseSchedule, make_schedule, step_coefficient

DEFAULT_LAMBDA_GRID = tuple(float(v) for v in range(1, 21))

_SCHEDULE_OF = {"linear": "constant", "cosine": "cosine", "integrated": "cosine"}


@dataclass(frozen=True)
class SamplingMethod:
    kind: str
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID

    def __post_init__(self):
        if self.kind not in _SCHEDULE_OF:
            raise InputError(f"unknown sampling method {self.kind!r}")
        grid = (1.0,) if self.kind == "cosine" else tuple(float(v) for v in self.lambda_grid)
        if not grid or any(v <= 0 for v in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
            raise InputError(f"lambda grid must be non-empty, positive and ascending: {grid}")
        object.__setattr__(self, "lambda_grid", grid)

    @property
    def schedule_kind(self) -> str:
        return _SCHEDULE_OF[self.kind]

    @property
    def searches(self) -> bool:
        return self.kind != "cosine"

    def make_schedule(self, T: int) -> NoiseSchedule:
        return make_schedule(self.schedule_kind, T)


@dataclass
class DecodeResult:
    """Outcome of decoding a batch of received words.

    ``iterations[i]`` counts reverse steps executed before row ``i`` first
    had zero syndrome (``budget`` when it never did). ``trajectory`` holds,
    per loop pass, the syndrome weight of every row still running and -1
    for rows already finished; ``states`` the soft states after each pass.
    """

    decoded: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    x: np.ndarray
    budget: int
    trajectory: list = field(default_factory=list)
    states: list = field(default_factory=list)
    lambdas: list = field(default_factory=list)

    def __len__(self):
        return len(self.iterations)


def reverse_step(x_t, epsilon_hat, schedule: NoiseSchedule, t, lam=1.0) -> np.ndarray:
    """One reverse update. ``t`` and ``lam`` may be scalars or one value per row."""
    c = step_coefficient(schedule, t)
    return _apply_step(np.asarray(x_t, dtype=np.float64), np.asarray(epsilon_hat, dtype=np.float64), c, lam)


def _apply_step(x, eps, c, lam):
    scale = np.asarray(lam, dtype=np.float64) * c
    if x.ndim == 2 and scale.ndim == 1:
        scale = scale[:, None]
    return x - scale * eps


def _search(x, eps, c, code, grid):
    grid = np.asarray(grid, dtype=np.float64)
    scale = grid[:, None] * c[None, :]  # (G, A); same product as _apply_step
    cand = x[None] - scale[:, :, None] * eps[None]
    G, A, n = cand.shape
    weights = code.syndrome_weight(hard_decision(cand.reshape(G * A, n))).reshape(G, A)
    best = np.argmin(weights, axis=0)  # first minimum -> smallest lambda
    cols = np.arange(A)
    return grid[best], weights[best, cols], cand[best, cols]


def lambda_search(x_t, epsilon_hat, schedule: NoiseSchedule, t, code: LinearCode, grid=DEFAULT_LAMBDA_GRID):
    """Grid value minimising the syndrome weight after one step; ties go to the smallest.

    Returns ``(lambda_star, best_weight)`` as scalars for a single word or
    arrays for a batch.
    """
    x = np.asarray(x_t, dtype=np.float64)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    eps = np.atleast_2d(np.asarray(epsilon_hat, dtype=np.float64))
    if len(grid) == 0:
        raise InputError("lambda grid is empty")
    c = np.broadcast_to(step_coefficient(schedule, t), (x2.shape[0],)).astype(np.float64)
    lam, weight, _ = _search(x2, eps, c, code, grid)
    if single:
        return float(lam[0]), int(weight[0])
    return lam, weight


def decode(y, code: LinearCode, denoiser, method: SamplingMethod, budget: int | None = None,
           T: int | None = None, schedule: NoiseSchedule | None = None,
           record: bool = False) -> DecodeResult:
    """Decode received soft words (one word or a batch).

    ``T`` defaults to the number of parity rows; ``budget`` to ``2 * T``.
    ``schedule`` overrides the one implied by ``method``.
    """
    Y = check_soft_words(y, code.n, name="y")
    if hasattr(denoiser, "check_code"):
        denoiser.check_code(code)
    if schedule is None:
        schedule = method.make_schedule(T or code.m)
    T = schedule.steps
    budget = 2 * T if budget is None else int(budget)
    if budget < 0:
        raise InputError(f"budget must be >= 0, got {budget}")

    B = Y.shape[0]
    x = Y.copy()
    done = np.zeros(B, dtype=bool)
    converged = np.zeros(B, dtype=bool)
    iterations = np.full(B, budget, dtype=np.int64)
    result = DecodeResult(None, iterations, converged, x, budget)

    for step in range(budget + 1):
        idx = np.flatnonzero(~done)
        if idx.size == 0:
            break
        xa = x[idx]
        s = code.syndrome_bits(hard_decision(xa))
        w = s.sum(axis=1, dtype=np.int64)
        zero = w == 0
        iterations[idx[zero]] = step
        converged[idx[zero]] = True
        done[idx[zero]] = True
        if record:
            traj = np.full(B, -1, dtype=np.int64)
            traj[idx] = w
            result.trajectory.append(traj)
        if step == budget:
            break
        keep = ~zero
        idx, xa, s, w = idx[keep], xa[keep], s[keep], w[keep]
        if idx.size == 0:
            break
        t = timestep_from_weight(w, T)
        inp = DenoiserInput(xa, s, t, schedule.beta_bar(t), T)
        logits = np.asarray(denoiser.predict_logits(inp, rows=idx), dtype=np.float64)
        if logits.shape != xa.shape:
            raise ConfigurationError(f"denoiser returned {logits.shape}, expected {xa.shape}")
        eps = additive_from_multiplicative(xa, NoisePrediction(logits), inp.beta_bar)
        c = step_coefficient(schedule, t)
        if method.searches:
            lam, _, x_new = _search(xa, eps, c, code, method.lambda_grid)
        else:
            lam = np.ones(idx.size)
            x_new = _apply_step(xa, eps, c, lam)
        x[idx] = x_new
        if record:
            lam_full = np.zeros(B)
            lam_full[idx] = lam
            result.lambdas.append(lam_full)
            result.states.append(x.copy())

    result.decoded = hard_decision(x)
    if np.ndim(y) == 1:
        result.decoded = result.decoded[0]
    return result
