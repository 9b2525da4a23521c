"""Monte-Carlo evaluation of diffusion decoders.

Trials are processed in fixed-size blocks. Trial ``i`` always draws its
message and channel noise from the counter streams at index ``i``, and block
results are merged in trial order, so reports do not depend on the number
of worker threads. The same trial indices are reused for every
(method, Eb/N0, budget) point.
"""

from __future__ import annotations

import io
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..channel import modulate, sigma_from_ebn0, trial_bits, trial_normals
from ..codes import LinearCode, hard_decision, load_code
from ..denoiser import NeuralDenoiser, OracleDenoiser, load_checkpoint
from ..exceptions import ConfigurationError
from ..sampler import SamplingMethod, decode
from .config import METHOD_COMBOS, ExperimentConfig

REPORT_HEADER = "# ddecc-lab report v1"
REPORT_COLUMNS = [
    "code", "combo", "training", "sampling", "ebn0_db", "budget", "words_decoded",
    "bit_errors", "frame_errors", "BER", "neg_ln_BER", "FER", "avg_iterations", "flags",
]
CURVE_COLUMNS = ["budget", "method", "ebn0", "neg_ln_BER"]


@dataclass
class EvalRow:
    code: str
    combo: int
    training: str
    sampling: str
    ebn0_db: float
    budget: int
    words_decoded: int
    bit_errors: int
    frame_errors: int
    iterations_total: int
    n: int
    stop_censored: bool = False
    max_neg_ln_ber: float | None = None

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.words_decoded * self.n)

    @property
    def fer(self) -> float:
        return self.frame_errors / self.words_decoded

    @property
    def ber_censored(self) -> bool:
        return self.bit_errors == 0

    @property
    def neg_ln_ber(self) -> float:
        return math.nan if self.ber_censored else -math.log(self.ber)

    @property
    def avg_iterations(self) -> float:
        return self.iterations_total / self.words_decoded

    @property
    def flags(self) -> str:
        out = []
        if self.stop_censored:
            out.append("stop_censored")
        if self.ber_censored:
            out.append("ber_censored")
        return ";".join(out)

    def cells(self) -> list:
        return [
            self.code, self.combo, self.training, self.sampling, _fmt(self.ebn0_db), self.budget,
            self.words_decoded, self.bit_errors, self.frame_errors, _fmt(self.ber),
            _fmt(self.neg_ln_ber), _fmt(self.fer), _fmt(self.avg_iterations), self.flags,
        ]


def _fmt(v) -> str:
    return "nan" if isinstance(v, float) and math.isnan(v) else format(v, ".10g")


@dataclass
class TrialLog:
    """Per-trial outcomes in trial-index order."""

    bit_errors: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    initial_weight: list = field(default_factory=list)

    def arrays(self):
        cat = lambda parts: np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)  # noqa: E731
        return cat(self.bit_errors), cat(self.iterations), cat(self.initial_weight)


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    logs: list = field(default_factory=list)
    extra_columns: tuple = ()

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(REPORT_HEADER + "\n")
        for k, v in self.metadata.items():
            buf.write(f"# {k}: {v}\n")
        cols = REPORT_COLUMNS + list(self.extra_columns)
        buf.write(",".join(cols) + "\n")
        for row in self.rows:
            cells = row.cells()
            if "max_neg_ln_BER" in self.extra_columns:
                cells.append(_fmt(row.max_neg_ln_ber if row.max_neg_ln_ber is not None else math.nan))
            buf.write(",".join(str(c) for c in cells) + "\n")
        return buf.getvalue()

    def write(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


# ---------------------------------------------------------------------------


@dataclass
class DecoderSetup:
    """Everything needed to decode one block of trials."""

    code: LinearCode
    method: SamplingMethod
    T: int
    params: object = None  # NeuralDenoiserParams, or None for the oracle

    def denoiser_for(self, x0):
        if self.params is None:
            return OracleDenoiser(x0)
        return NeuralDenoiser(self.params)


def decode_block(setup: DecoderSetup, sigma: float, budget: int, seed: int, first: int, count: int):
    code = setup.code
    words = code.encode(trial_bits(seed, first, count, code.k))
    x0 = modulate(words)
    y = x0 + sigma * trial_normals(seed, first, count, code.n)
    initial = code.syndrome_weight(hard_decision(y))
    res = decode(y, code, setup.denoiser_for(x0), setup.method, budget=budget, T=setup.T)
    bit_err = (res.decoded != words).sum(axis=1).astype(np.int64)
    return bit_err, res.iterations.astype(np.int64), initial


def run_point(setup: DecoderSetup, ebn0_db: float, budget: int, *, seed: int, min_words: int,
              min_error_frames: int, trial_cap: int, block_size: int = 1024, threads: int = 1,
              keep_log: bool = False):
    """Decode trials until ``min_words`` and ``min_error_frames`` are both met or the cap is hit.

    Returns ``(words, bit_errors, frame_errors, iterations_total, censored, log)``.
    """
    sigma = sigma_from_ebn0(ebn0_db, setup.code.rate)
    n_blocks = -(-trial_cap // block_size)

    def job(b):
        first = b * block_size
        return decode_block(setup, sigma, budget, seed, first, min(block_size, trial_cap - first))

    words = bit_errors = frames = iters = 0
    log = TrialLog() if keep_log else None
    satisfied = False

    def merge(result):
        nonlocal words, bit_errors, frames, iters
        be, it, init = result
        words += len(be)
        bit_errors += int(be.sum())
        frames += int((be > 0).sum())
        iters += int(it.sum())
        if log is not None:
            log.bit_errors.append(be)
            log.iterations.append(it)
            log.initial_weight.append(init)
        return words >= min_words and frames >= min_error_frames

    if threads == 1:
        for b in range(n_blocks):
            if merge(job(b)):
                satisfied = True
                break
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pending = deque()
            nxt = 0
            while True:
                while len(pending) < threads and nxt < n_blocks:
                    pending.append(pool.submit(job, nxt))
                    nxt += 1
                if not pending:
                    break
                if merge(pending.popleft().result()):
                    satisfied = True
                    break
            for fut in pending:
                fut.cancel()
    return words, bit_errors, frames, iters, not satisfied, log


# ---------------------------------------------------------------------------


def load_setup(config: ExperimentConfig, code: LinearCode, combo: int) -> DecoderSetup:
    training, sampling = METHOD_COMBOS[combo]
    method = SamplingMethod(sampling)
    params = None
    if config.denoiser == "neural":
        path = config.cosine_checkpoint if training == "cosine" else config.checkpoint
        if not path:
            key = "cosine_checkpoint" if training == "cosine" else "checkpoint"
            raise ConfigurationError(f"combo {combo} needs a {training}-trained model: set '{key}'")
        params = load_checkpoint(path, code)
        want = "cosine" if training == "cosine" else "constant"
        if params.schedule_kind not in ("none", want):
            raise ConfigurationError(
                f"checkpoint {path} was trained on the {params.schedule_kind} schedule; combo {combo} needs {want}"
            )
    T = config.T or (params.T if params is not None and params.T else code.m)
    return DecoderSetup(code, method, T, params)


def _codes(config: ExperimentConfig):
    if not config.codes:
        raise ConfigurationError("no code file given (config key 'code' or --code)")
    return [load_code(p, config.code_format) for p in config.codes]


def _metadata(config: ExperimentConfig, codes) -> dict:
    meta = {
        "seed": config.seed,
        "codes": "; ".join(f"{c.name}(n={c.n},k={c.k}) from {c.source}" for c in codes),
        "denoiser": config.denoiser,
        "min_words": config.min_words,
        "min_error_frames": config.min_error_frames,
        "trial_cap": config.trial_cap,
        "block_size": config.block_size,
        "neg_ln_BER": "natural log; nan when BER = 0 (flag ber_censored)",
        "max_neg_ln_BER": "running maximum over decode budgets (not over training checkpoints)",
        "training_noise": "schedule noising only; no channel-SNR noise during training",
    }
    return meta


def _row(setup, combo, ebn0, budget, point) -> EvalRow:
    words, be, fe, it, censored, _ = point
    training, sampling = METHOD_COMBOS[combo]
    return EvalRow(setup.code.name, combo, training, sampling, ebn0, budget, words, be, fe, it,
                   setup.code.n, stop_censored=censored)


def _point(config, setup, ebn0, budget, keep_log):
    return run_point(
        setup, ebn0, budget, seed=config.seed, min_words=config.min_words,
        min_error_frames=config.min_error_frames, trial_cap=config.trial_cap,
        block_size=config.block_size, threads=config.threads, keep_log=keep_log,
    )


def evaluate(config: ExperimentConfig, keep_log: bool = False, combo: int | None = None) -> EvalReport:
    """One row per (code, Eb/N0) for a single method combo at a single budget."""
    config.validate()
    combo = config.combo if combo is None else combo
    codes = _codes(config)
    report = EvalReport(metadata=_metadata(config, codes))
    for code in codes:
        setup = load_setup(config, code, combo)
        budget = 2 * setup.T if config.budget is None else config.budget
        for ebn0 in config.ebn0:
            point = _point(config, setup, ebn0, budget, keep_log)
            report.rows.append(_row(setup, combo, ebn0, budget, point))
            if keep_log:
                report.logs.append(point[5])
    return report


def ber_vs_budget(config: ExperimentConfig, combo: int | None = None) -> EvalReport:
    """Rows per (code, Eb/N0, budget), with the running maximum of ``neg_ln_BER`` over budgets."""
    config.validate()
    combo = config.combo if combo is None else combo
    codes = _codes(config)
    report = EvalReport(metadata=_metadata(config, codes), extra_columns=("max_neg_ln_BER",))
    for code in codes:
        setup = load_setup(config, code, combo)
        budgets = config.budgets or [2 * setup.T]
        for ebn0 in config.ebn0:
            running = -math.inf
            for budget in budgets:
                row = _row(setup, combo, ebn0, budget, _point(config, setup, ebn0, budget, False))
                if not row.ber_censored:
                    running = max(running, row.neg_ln_ber)
                row.max_neg_ln_ber = running if running > -math.inf else math.nan
                report.rows.append(row)
    return report


def iteration_report(config: ExperimentConfig, combos=None) -> EvalReport:
    """Average iterations to zero syndrome per (code, combo, Eb/N0)."""
    config.validate()
    combos = config.combos if combos is None else combos
    report = None
    for combo in combos:
        part = evaluate(config, combo=combo)
        if report is None:
            report = part
        else:
            report.rows.extend(part.rows)
    return report


def curve_rows(report: EvalReport) -> list:
    return [(r.budget, r.combo, r.ebn0_db, r.neg_ln_ber) for r in report.rows]


def curves_csv(reports) -> str:
    buf = io.StringIO()
    buf.write(REPORT_HEADER + "\n")
    buf.write(",".join(CURVE_COLUMNS) + "\n")
    for report in reports:
        for budget, combo, ebn0, val in curve_rows(report):
            buf.write(f"{budget},{combo},{_fmt(ebn0)},{_fmt(val)}\n")
    return buf.getvalue()


def sweep(config: ExperimentConfig, out_dir) -> dict:
    """Budget curves for each combo, the iteration table and plot data, written under ``out_dir``.

    Returns a mapping of file name to CSV text.
    """
    from pathlib import Path

    config.validate()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {}
    curves = []
    for combo in config.combos:
        rep = ber_vs_budget(config, combo=combo)
        curves.append(rep)
        files[f"sweep_combo{combo}.csv"] = rep.to_csv()
    files["iterations.csv"] = iteration_report(config).to_csv()
    files["curves.csv"] = curves_csv(curves)
    for name, text in files.items():
        (out_dir / name).write_text(text)
    return files
