"""Noise predictors for the reverse diffusion.

A denoiser maps the soft state ``x_t`` (through ``|x_t|``, the bipolar
syndrome of its hard decision, and a timestep embedding) to per-bit logits
of the multiplicative noise, i.e. of ``sign(x_t) != x_0``.

Two implementations share the :meth:`predict_logits` interface:
:class:`OracleDenoiser`, which knows the transmitted word, and
:class:`NeuralDenoiser`, a feed-forward network with hand-written
backpropagation.
"""

from __future__ import annotations

import itertools
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .codes import LinearCode, hard_decision
from .exceptions import CheckpointError, ConfigurationError, InputError, InternalError

ORACLE_LOGIT = 30.0

ACTIVATIONS = ("tanh", "relu")
SCHEDULE_CODES = {"none": 0, "constant": 1, "cosine": 2}

CHECKPOINT_MAGIC = b"DDECCNN\x00"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class DenoiserInput:
    """Batched conditioning for a denoiser call; row ``i`` is one soft word."""

    x_t: np.ndarray
    syndrome_bits: np.ndarray
    t: np.ndarray
    beta_bar: np.ndarray
    T: int

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.x_t)

    @property
    def syndrome_pm(self) -> np.ndarray:
        return 1.0 - 2.0 * self.syndrome_bits

    def features(self) -> np.ndarray:
        """``[|x_t|, bipolar syndrome, beta_bar_t, t/T]`` per row."""
        B = self.x_t.shape[0]
        return np.concatenate(
            [
                self.magnitude,
                self.syndrome_pm,
                np.asarray(self.beta_bar, dtype=np.float64).reshape(B, 1),
                (np.asarray(self.t, dtype=np.float64) / self.T).reshape(B, 1),
            ],
            axis=1,
        )

    def take(self, rows) -> "DenoiserInput":
        return DenoiserInput(self.x_t[rows], self.syndrome_bits[rows], self.t[rows], self.beta_bar[rows], self.T)


def timestep_from_weight(weight, T: int) -> np.ndarray:
    """Syndrome weight clamped to ``[1, T]``: the decoder's timestep estimate."""
    return np.clip(np.asarray(weight, dtype=np.int64), 1, T)


def build_input(code: LinearCode, x_t, schedule, t=None) -> DenoiserInput:
    """Assemble a :class:`DenoiserInput`; ``t`` defaults to the syndrome-derived timestep."""
    x_t = np.atleast_2d(np.asarray(x_t, dtype=np.float64))
    s = code.syndrome_bits(hard_decision(x_t))
    if t is None:
        t = timestep_from_weight(s.sum(axis=1), schedule.steps)
    t = np.broadcast_to(np.asarray(t, dtype=np.int64), (x_t.shape[0],)).copy()
    return DenoiserInput(x_t, s, t, schedule.beta_bar(t), schedule.steps)


@dataclass(frozen=True)
class NoisePrediction:
    logits: np.ndarray

    @property
    def flip_probabilities(self) -> np.ndarray:
        return expit(self.logits)

    @property
    def flips(self) -> np.ndarray:
        """Hard flip decisions; probability exactly 0.5 counts as no flip."""
        return self.logits > 0


def oracle_predict(inp: DenoiserInput, x_0) -> NoisePrediction:
    x_0 = np.atleast_2d(np.asarray(x_0, dtype=np.float64))
    if x_0.shape != inp.x_t.shape:
        raise InputError(f"x_0 shape {x_0.shape} != x_t shape {inp.x_t.shape}")
    flipped = hard_decision(inp.x_t) != hard_decision(x_0)
    return NoisePrediction(np.where(flipped, ORACLE_LOGIT, -ORACLE_LOGIT))


def additive_from_multiplicative(x_t, pred: NoisePrediction, beta_bar_t) -> np.ndarray:
    """Additive-noise estimate ``(x_t - x0_hat) / sqrt(beta_bar_t)``.

    ``x0_hat`` is ``sign(x_t)`` with predicted flips applied (sign(0) = +1).
    ``beta_bar_t`` may be a scalar or one value per row.
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    bb = np.asarray(beta_bar_t, dtype=np.float64)
    if np.any(bb <= 0):
        raise InputError("beta_bar_t must be > 0")
    if bb.ndim == 1 and x_t.ndim == 2:
        bb = bb[:, None]
    sign = np.where(x_t < 0, -1.0, 1.0)
    x0_hat = np.where(pred.flips, -sign, sign)
    return (x_t - x0_hat) / np.sqrt(bb)


class OracleDenoiser:
    """Denoiser that knows the transmitted words ``x_0`` (one row per decoded word)."""

    def __init__(self, x_0):
        self.x_0 = np.atleast_2d(np.asarray(x_0, dtype=np.float64))

    def predict_logits(self, inp: DenoiserInput, rows=None) -> np.ndarray:
        x_0 = self.x_0 if rows is None else self.x_0[rows]
        return oracle_predict(inp, x_0).logits

    def check_code(self, code: LinearCode):
        if self.x_0.shape[1] != code.n:
            raise ConfigurationError(f"oracle words have length {self.x_0.shape[1]}, code has n={code.n}")


# ---------------------------------------------------------------------------
# Feed-forward network

_tokens = itertools.count(1)


@dataclass(frozen=True, eq=False)
class NeuralDenoiserParams:
    """Weights of an MLP ``features -> hidden x N -> n logits``.

    ``weights[l]`` has shape ``(layer_sizes[l], layer_sizes[l + 1])``.
    ``schedule_kind`` and ``T`` record the schedule the model was trained on.
    """

    layer_sizes: tuple
    activation: str
    weights: tuple
    biases: tuple
    schedule_kind: str = "none"
    T: int = 0

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")
        if len(self.layer_sizes) < 2:
            raise ConfigurationError("need at least input and output sizes")
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ConfigurationError("weight/bias count does not match layer sizes")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            expect = (self.layer_sizes[l], self.layer_sizes[l + 1])
            if W.shape != expect or b.shape != (expect[1],):
                raise ConfigurationError(f"layer {l}: got W{W.shape} b{b.shape}, expected W{expect}")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ConfigurationError(f"layer {l} has non-finite parameters")
            W.setflags(write=False)
            b.setflags(write=False)
        object.__setattr__(self, "_token", next(_tokens))

    @property
    def n_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_out(self) -> int:
        return self.layer_sizes[-1]

    @property
    def hidden_layers(self) -> int:
        return len(self.layer_sizes) - 2

    def arrays(self):
        """Flat list ``[W0, b0, W1, b1, ...]`` in checkpoint order."""
        return [a for pair in zip(self.weights, self.biases) for a in pair]

    def with_arrays(self, arrays) -> "NeuralDenoiserParams":
        arrays = list(arrays)
        return NeuralDenoiserParams(
            self.layer_sizes,
            self.activation,
            tuple(np.array(a, dtype=np.float64) for a in arrays[0::2]),
            tuple(np.array(a, dtype=np.float64) for a in arrays[1::2]),
            self.schedule_kind,
            self.T,
        )

    def check_code(self, code: LinearCode):
        want_in = code.n + code.m + 2
        if self.n_out != code.n or self.n_in != want_in:
            raise ConfigurationError(
                f"model maps {self.n_in} -> {self.n_out}, code {code.name} needs {want_in} -> {code.n}"
            )

    def equals(self, other) -> bool:
        return (
            self.layer_sizes == other.layer_sizes
            and self.activation == other.activation
            and self.schedule_kind == other.schedule_kind
            and self.T == other.T
            and all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))
        )


def architecture_for(code: LinearCode, hidden: int, n_layers: int) -> tuple:
    if hidden < 1 or n_layers < 0:
        raise ConfigurationError(f"invalid architecture hidden={hidden} n_layers={n_layers}")
    return (code.n + code.m + 2,) + (hidden,) * n_layers + (code.n,)


def init_params(layer_sizes, activation="tanh", seed=0, schedule_kind="none", T=0) -> NeuralDenoiserParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases, seeded."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return NeuralDenoiserParams(tuple(int(s) for s in layer_sizes), activation, tuple(weights), tuple(biases), schedule_kind, int(T))


@dataclass
class ForwardCache:
    token: int
    activations: list  # a_0 (= features) ... a_{L-1}
    preacts: list  # z_1 ... z_{L-1} for the hidden layers


def _act(name, z):
    return np.tanh(z) if name == "tanh" else np.maximum(z, 0.0)


def _act_grad(name, z, a):
    return 1.0 - a * a if name == "tanh" else (z > 0).astype(np.float64)


def forward_features(params: NeuralDenoiserParams, X: np.ndarray):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != params.n_in:
        raise ConfigurationError(f"feature width {X.shape[1]} != model input {params.n_in}")
    acts, pre = [X], []
    a = X
    last = len(params.weights) - 1
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ W + b
        if l == last:
            return z, ForwardCache(params._token, acts, pre)
        pre.append(z)
        a = _act(params.activation, z)
        acts.append(a)


def neural_forward(params: NeuralDenoiserParams, inp: DenoiserInput):
    logits, cache = forward_features(params, inp.features())
    return NoisePrediction(logits), cache


def neural_backward(params: NeuralDenoiserParams, cache: ForwardCache, loss_gradient) -> list:
    """Gradients ``[dW0, db0, dW1, db1, ...]`` given dLoss/dlogits (batch summed)."""
    if not isinstance(cache, ForwardCache) or cache.token != params._token:
        raise InternalError("forward cache does not belong to these parameters")
    dz = np.asarray(loss_gradient, dtype=np.float64)
    if dz.shape != (cache.activations[0].shape[0], params.n_out):
        raise InternalError(f"loss gradient shape {dz.shape} does not match the cached batch")
    grads = [None] * (2 * len(params.weights))
    for l in range(len(params.weights) - 1, -1, -1):
        a_prev = cache.activations[l]
        grads[2 * l] = a_prev.T @ dz
        grads[2 * l + 1] = dz.sum(axis=0)
        if l:
            da = dz @ params.weights[l].T
            dz = da * _act_grad(params.activation, cache.preacts[l - 1], cache.activations[l])
    return grads


class NeuralDenoiser:
    def __init__(self, params: NeuralDenoiserParams):
        self.params = params

    def predict_logits(self, inp: DenoiserInput, rows=None) -> np.ndarray:
        logits, _ = forward_features(self.params, inp.features())
        return logits

    def check_code(self, code: LinearCode):
        self.params.check_code(code)


# ---------------------------------------------------------------------------
# Checkpoints
#
# little-endian: magic[8] | version u32 | activation u32 | schedule u32 | T u32
# | layer count u32 | layer sizes u32 * count | per layer: W f64 (row-major), b f64


def save_checkpoint(params: NeuralDenoiserParams, path) -> None:
    """Write atomically: the target is replaced only after a complete write."""
    path = Path(path)
    header = CHECKPOINT_MAGIC + struct.pack(
        "<5I",
        CHECKPOINT_VERSION,
        ACTIVATIONS.index(params.activation),
        SCHEDULE_CODES[params.schedule_kind],
        params.T,
        len(params.layer_sizes),
    )
    header += struct.pack(f"<{len(params.layer_sizes)}I", *params.layer_sizes)
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in params.arrays())
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header + body)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path, code: LinearCode | None = None) -> NeuralDenoiserParams:
    data = Path(path).read_bytes()
    pos = 0

    def read(nbytes, field):
        nonlocal pos
        if pos + nbytes > len(data):
            raise CheckpointError(f"file truncated ({len(data)} bytes)", field)
        chunk = data[pos : pos + nbytes]
        pos += nbytes
        return chunk

    if read(len(CHECKPOINT_MAGIC), "magic") != CHECKPOINT_MAGIC:
        raise CheckpointError("bad magic; not a ddecc checkpoint", "magic")
    (version,) = struct.unpack("<I", read(4, "version"))
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported version {version}", "version")
    act, sched, T, count = struct.unpack("<4I", read(16, "architecture"))
    if act >= len(ACTIVATIONS):
        raise CheckpointError(f"unknown activation code {act}", "activation")
    kinds = {v: k for k, v in SCHEDULE_CODES.items()}
    if sched not in kinds:
        raise CheckpointError(f"unknown schedule code {sched}", "schedule")
    if count < 2:
        raise CheckpointError(f"layer count {count} < 2", "layer_sizes")
    sizes = struct.unpack(f"<{count}I", read(4 * count, "layer_sizes"))
    arrays = []
    for l, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        W = np.frombuffer(read(8 * fan_in * fan_out, f"W{l}"), dtype="<f8").reshape(fan_in, fan_out)
        b = np.frombuffer(read(8 * fan_out, f"b{l}"), dtype="<f8")
        arrays += [W.astype(np.float64), b.astype(np.float64)]
    if pos != len(data):
        raise CheckpointError(f"{len(data) - pos} trailing bytes", "trailer")
    try:
        params = NeuralDenoiserParams(
            tuple(sizes), ACTIVATIONS[act], tuple(arrays[0::2]), tuple(arrays[1::2]), kinds[sched], T
        )
    except ConfigurationError as exc:
        raise CheckpointError(str(exc), "weights") from exc
    if code is not None:
        params.check_code(code)
    return params
