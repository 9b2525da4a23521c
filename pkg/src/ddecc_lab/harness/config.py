"""Experiment configuration files.

Line-oriented ``key = value`` pairs; ``#`` starts a comment; list values are
comma-separated. Unknown keys and malformed values are reported with their
line number.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

from ..exceptions import ConfigurationError, ParseError

SEED_ENV = "DDECC_SEED"

METHOD_COMBOS = {
    1: ("linear", "linear"),
    2: ("linear", "cosine"),
    3: ("linear", "integrated"),
    4: ("cosine", "linear"),
}


def _int_list(s):
    return [int(v) for v in s.split(",") if v.strip()]


def _float_list(s):
    return [float(v) for v in s.split(",") if v.strip()]


def _str_list(s):
    return [v.strip() for v in s.split(",") if v.strip()]


def _choice(*options):
    def conv(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s
    return conv


@dataclass
class ExperimentConfig:
    codes: list = field(default_factory=list)
    code_format: str | None = None
    combo: int = 2
    combos: list = field(default_factory=lambda: [1, 2, 3, 4])
    denoiser: str = "neural"
    checkpoint: str | None = None
    cosine_checkpoint: str | None = None
    ebn0: list = field(default_factory=lambda: [4.0, 5.0, 6.0])
    min_words: int = 100_000
    min_error_frames: int = 500
    max_trials: int | None = None
    budget: int | None = None
    budgets: list = field(default_factory=list)
    T: int | None = None
    seed: int = 0
    threads: int = 1
    block_size: int = 1024
    out: str | None = None
    # training
    training_mode: str = "linear"
    epochs: int = 20
    minibatches_per_epoch: int = 100
    batch_size: int = 128
    lr_start: float = 1e-4
    lr_end: float = 5e-6
    hidden: int = 16
    n_layers: int = 2
    activation: str = "tanh"
    metrics: str | None = None

    def validate(self):
        if not self.ebn0:
            raise ConfigurationError("ebn0 list must be non-empty")
        if self.min_words < 1 or self.min_error_frames < 0:
            raise ConfigurationError("min_words must be >= 1 and min_error_frames >= 0")
        for c in [self.combo, *self.combos]:
            if c not in METHOD_COMBOS:
                raise ConfigurationError(f"method combo must be one of 1..4, got {c}")
        if self.budgets and any(b < 0 for b in self.budgets):
            raise ConfigurationError("budgets must be >= 0")
        if self.budgets != sorted(self.budgets):
            raise ConfigurationError("budgets must be ascending")
        if self.threads < 1 or self.block_size < 1:
            raise ConfigurationError("threads and block_size must be >= 1")
        return self

    @property
    def trial_cap(self) -> int:
        return self.max_trials if self.max_trials is not None else 100 * self.min_words

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


_CONVERTERS = {
    "code": ("codes", _str_list),
    "codes": ("codes", _str_list),
    "code_format": ("code_format", _choice("alist", "dense")),
    "combo": ("combo", int),
    "method_combo": ("combo", int),
    "combos": ("combos", _int_list),
    "denoiser": ("denoiser", _choice("neural", "oracle")),
    "checkpoint": ("checkpoint", str),
    "cosine_checkpoint": ("cosine_checkpoint", str),
    "ebn0": ("ebn0", _float_list),
    "ebn0_list": ("ebn0", _float_list),
    "min_words": ("min_words", lambda s: int(float(s))),
    "min_error_frames": ("min_error_frames", int),
    "max_trials": ("max_trials", lambda s: int(float(s))),
    "budget": ("budget", int),
    "budgets": ("budgets", _int_list),
    "budget_list": ("budgets", _int_list),
    "T": ("T", int),
    "seed": ("seed", int),
    "threads": ("threads", int),
    "block_size": ("block_size", int),
    "out": ("out", str),
    "training_mode": ("training_mode", _choice("linear", "cosine")),
    "epochs": ("epochs", int),
    "minibatches_per_epoch": ("minibatches_per_epoch", int),
    "batch_size": ("batch_size", int),
    "lr_start": ("lr_start", float),
    "lr_end": ("lr_end", float),
    "hidden": ("hidden", int),
    "n_layers": ("n_layers", int),
    "activation": ("activation", _choice("tanh", "relu")),
    "metrics": ("metrics", str),
}


def parse_config(text: str, base_dir=None) -> ExperimentConfig:
    """Parse config text; relative paths resolve against ``base_dir``."""
    values = {}
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", ln)
        key, _, value = (p.strip() for p in line.partition("="))
        if key not in _CONVERTERS:
            raise ParseError(f"unknown key {key!r}", ln)
        attr, conv = _CONVERTERS[key]
        try:
            values[attr] = conv(value)
        except ValueError as exc:
            raise ParseError(f"bad value for {key!r}: {value!r} ({exc})", ln) from None
    if base_dir is not None:
        base = Path(base_dir)
        for attr in ("checkpoint", "cosine_checkpoint", "out", "metrics"):
            if values.get(attr):
                values[attr] = str(base / values[attr])
        if "codes" in values:
            values["codes"] = [str(base / c) for c in values["codes"]]
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=path.parent)


def resolve_seed(cli_seed=None, config_seed=0) -> int:
    """Seed precedence: command line, then ``DDECC_SEED``, then the config file."""
    if cli_seed is not None:
        return int(cli_seed)
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise ConfigurationError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return int(config_seed)
