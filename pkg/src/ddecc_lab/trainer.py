"""Training of the neural denoiser.

``linear`` training noises codewords with the constant schedule and
``cosine`` training with the cosine schedule; both minimise binary
cross-entropy between predicted flip probabilities and the true sign flips.
Optimisation is Adam under a cosine-decayed learning rate without warm-up.
"""

from __future__ import annotations

import csv
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import expit

from .channel import modulate
from .codes import LinearCode, random_codeword
from .denoiser import (
    DenoiserInput,
    NeuralDenoiserParams,
    architecture_for,
    build_input,
    init_params,
    neural_backward,
    neural_forward,
    save_checkpoint,
)
from .exceptions import ConfigurationError, TrainingError
from .schedule import NoiseSchedule, make_schedule

log = logging.getLogger(__name__)

TRAINING_SCHEDULE = {"linear": "constant", "cosine": "cosine"}


@dataclass
class TrainConfig:
    code: LinearCode
    training_mode: str = "linear"
    batch_size: int = 128
    epochs: int = 20
    minibatches_per_epoch: int = 100
    lr_start: float = 1e-4
    lr_end: float = 5e-6
    T: int | None = None
    seed: int = 0
    hidden: int = 16
    n_layers: int = 2
    activation: str = "tanh"

    def __post_init__(self):
        if self.training_mode not in TRAINING_SCHEDULE:
            raise ConfigurationError(f"training_mode must be 'linear' or 'cosine', got {self.training_mode!r}")
        if not self.lr_start > self.lr_end > 0:
            raise ConfigurationError("need lr_start > lr_end > 0")
        if self.batch_size < 1 or self.epochs < 1 or self.minibatches_per_epoch < 1:
            raise ConfigurationError("batch_size, epochs and minibatches_per_epoch must be >= 1")
        if self.T is None:
            self.T = self.code.m

    @property
    def total_steps(self) -> int:
        return self.epochs * self.minibatches_per_epoch

    def schedule(self) -> NoiseSchedule:
        return make_schedule(TRAINING_SCHEDULE[self.training_mode], self.T)


@dataclass
class TrainingBatch:
    x0: np.ndarray
    x_t: np.ndarray
    t_noise: np.ndarray
    targets: np.ndarray
    inputs: DenoiserInput


def make_training_batch(code: LinearCode, schedule: NoiseSchedule, batch_size: int, rng,
                        t=None, beta_bar_override=None) -> TrainingBatch:
    """Noise random codewords as ``x_0 + sqrt(beta_bar_t) * eps``.

    ``t`` fixes the noising step (default: uniform over 1..T);
    ``beta_bar_override`` replaces ``beta_bar_t`` (test hook). The network is
    conditioned on the syndrome-derived timestep of the noisy word, the same
    statistic the decoder sees.
    """
    x0 = modulate(random_codeword(code, rng, size=batch_size))
    if t is None:
        t_noise = rng.integers(1, schedule.steps + 1, size=batch_size)
    else:
        t_noise = np.full(batch_size, int(t), dtype=np.int64)
    bb = schedule.beta_bar(t_noise) if beta_bar_override is None else np.full(batch_size, float(beta_bar_override))
    eps = rng.standard_normal((batch_size, code.n))
    x_t = x0 + np.sqrt(bb)[:, None] * eps
    targets = ((x_t < 0) != (x0 < 0)).astype(np.float64)
    return TrainingBatch(x0, x_t, t_noise, targets, build_input(code, x_t, schedule))


def bce_loss(logits, targets, reduction="mean"):
    """Mean-over-bits binary cross-entropy from logits.

    Per sample the loss is averaged over bits; ``reduction`` then averages or
    sums over the batch. Returns ``(loss, dloss/dlogits)``.
    """
    z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    y = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if z.shape != y.shape:
        raise ConfigurationError(f"logits {z.shape} and targets {y.shape} differ")
    B, n = z.shape
    # -[y log p + (1-y) log(1-p)] = softplus(z) - y z
    per_bit = np.logaddexp(0.0, z) - y * z
    grad = (expit(z) - y) / n
    if reduction == "mean":
        return float(per_bit.mean()), grad / B
    if reduction == "sum":
        return float(per_bit.mean(axis=1).sum()), grad
    raise ConfigurationError(f"unknown reduction {reduction!r}")


def lr_at(config, global_step: int, total_steps: int) -> float:
    """Cosine decay from ``config.lr_start`` at step 0 to ``config.lr_end`` at ``total_steps``."""
    if total_steps <= 0:
        return config.lr_start
    frac = min(max(global_step / total_steps, 0.0), 1.0)
    return config.lr_end + 0.5 * (config.lr_start - config.lr_end) * (1.0 + math.cos(math.pi * frac))


@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def like(cls, arrays, **kw):
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], **kw)


def adam_step(params: NeuralDenoiserParams, gradients, state: AdamState, learning_rate: float):
    """Bias-corrected Adam update; returns ``(new_params, new_state)``."""
    arrays = params.arrays()
    if len(gradients) != len(arrays):
        raise TrainingError("gradient count does not match parameter count")
    for i, (g, a) in enumerate(zip(gradients, arrays)):
        if g.shape != a.shape:
            raise TrainingError(f"gradient {i} has shape {g.shape}, parameter has {a.shape}")
        if not np.all(np.isfinite(g)):
            bad = int(np.size(g) - np.isfinite(g).sum())
            raise TrainingError(f"non-finite gradient in parameter {i} ({bad} entries) at step {state.step + 1}")
    step = state.step + 1
    bc1 = 1.0 - state.beta1**step
    bc2 = 1.0 - state.beta2**step
    new_m, new_v, new_arrays = [], [], []
    for a, g, m, v in zip(arrays, gradients, state.m, state.v):
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * (g * g)
        new_arrays.append(a - learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.eps))
        new_m.append(m)
        new_v.append(v)
    new_state = AdamState(new_m, new_v, step, state.beta1, state.beta2, state.eps)
    return params.with_arrays(new_arrays), new_state


@dataclass
class TrainResult:
    params: NeuralDenoiserParams
    history: list = field(default_factory=list)  # (epoch, mean_loss, lr)
    validation: list = field(default_factory=list)  # (global_step, loss) on a fixed batch

    @property
    def final_loss(self) -> float:
        return self.history[-1][1]


def train(config: TrainConfig, checkpoint_path=None, metrics_path=None, validate_every=0) -> TrainResult:
    """Run ``epochs * minibatches_per_epoch`` Adam steps; fully determined by ``config.seed``."""
    code = config.code
    schedule = config.schedule()
    sizes = architecture_for(code, config.hidden, config.n_layers)
    params = init_params(sizes, config.activation, seed=config.seed,
                         schedule_kind=schedule.kind, T=schedule.steps)
    state = AdamState.like(params.arrays())
    rng = np.random.Generator(np.random.Philox(key=[config.seed, 0x7261696E]))
    val_batch = None
    if validate_every:
        val_rng = np.random.Generator(np.random.Philox(key=[config.seed, 0x76616C]))
        val_batch = make_training_batch(code, schedule, config.batch_size, val_rng)

    result = TrainResult(params)
    total = config.total_steps
    global_step = 0
    for epoch in range(1, config.epochs + 1):
        losses = []
        for _ in range(config.minibatches_per_epoch):
            if val_batch is not None and global_step % validate_every == 0:
                result.validation.append((global_step, _eval_loss(params, val_batch)))
            batch = make_training_batch(code, schedule, config.batch_size, rng)
            pred, cache = neural_forward(params, batch.inputs)
            loss, dlogits = bce_loss(pred.logits, batch.targets)
            grads = neural_backward(params, cache, dlogits)
            lr = lr_at(config, global_step, max(total - 1, 1))
            params, state = adam_step(params, grads, state, lr)
            losses.append(loss)
            global_step += 1
        result.history.append((epoch, float(np.mean(losses)), lr))
        log.info("epoch %d loss %.6f lr %.3g", epoch, result.history[-1][1], lr)
    if val_batch is not None:
        result.validation.append((global_step, _eval_loss(params, val_batch)))
    result.params = params

    if checkpoint_path is not None:
        save_checkpoint(params, checkpoint_path)
    if metrics_path is not None:
        write_metrics(result.history, metrics_path)
    return result


def _eval_loss(params, batch: TrainingBatch) -> float:
    pred, _ = neural_forward(params, batch.inputs)
    return bce_loss(pred.logits, batch.targets)[0]


def write_metrics(history, path) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "mean_loss", "lr"])
        for epoch, loss, lr in history:
            w.writerow([epoch, f"{loss:.10g}", f"{lr:.10g}"])
    os.replace(tmp, path)
