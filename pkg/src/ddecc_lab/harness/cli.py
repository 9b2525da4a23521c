"""Command-line entry point: ``ddecc-lab <subcommand> [options]``.

Subcommands: ``train``, ``eval``, ``sweep``, ``schedule-dump``, ``code-info``.
The master seed comes from ``--seed``, else the ``DDECC_SEED`` environment
variable, else the config file.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..codes import load_code
from ..exceptions import DDECCError
from ..schedule import make_schedule
from .config import SEED_ENV, ExperimentConfig, load_config, resolve_seed
from .evaluate import _codes, evaluate, sweep


def _common(p, need_config=True):
    p.add_argument("--config", metavar="PATH", help="key = value experiment file")
    p.add_argument("--seed", type=int, help=f"master seed (overrides config and ${SEED_ENV})")
    p.add_argument("--out", metavar="PATH", help="output file (eval/train) or directory (sweep)")
    p.add_argument("--threads", type=int, help="worker threads for Monte-Carlo trials")
    p.add_argument("--code", metavar="PATH", action="append", help="parity-check matrix file (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ddecc-lab", description="Denoising-diffusion decoder laboratory")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a neural denoiser and write a checkpoint")
    _common(p)
    p.add_argument("--training-mode", choices=("linear", "cosine"))
    p.add_argument("--metrics", metavar="PATH", help="per-epoch CSV log")

    p = sub.add_parser("eval", help="BER/FER/iterations for one method combo")
    _common(p)
    p.add_argument("--combo", type=int, choices=(1, 2, 3, 4))
    p.add_argument("--oracle", action="store_true", help="use the oracle denoiser")

    p = sub.add_parser("sweep", help="budget curves and iteration table for combos 1-4")
    _common(p)
    p.add_argument("--oracle", action="store_true", help="use the oracle denoiser")

    p = sub.add_parser("schedule-dump", help="CSV of t, beta, beta_bar, coefficient")
    p.add_argument("--kind", choices=("cosine", "constant"), default="cosine")
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--out", metavar="PATH")

    p = sub.add_parser("code-info", help="print n, k, rank and density of a code")
    p.add_argument("code", metavar="PATH")
    p.add_argument("--format", choices=("alist", "dense"))
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {"seed": resolve_seed(args.seed, cfg.seed)}
    if args.code:
        changes["codes"] = args.code
    if args.threads is not None:
        changes["threads"] = args.threads
    if args.out is not None:
        changes["out"] = args.out
    if getattr(args, "combo", None) is not None:
        changes["combo"] = args.combo
    if getattr(args, "oracle", False):
        changes["denoiser"] = "oracle"
    if getattr(args, "training_mode", None):
        changes["training_mode"] = args.training_mode
    if getattr(args, "metrics", None):
        changes["metrics"] = args.metrics
    return cfg.replace(**changes).validate()


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_train(args, parser):
    from ..trainer import TrainConfig, train

    cfg = _config(args)
    if not cfg.out:
        parser.error("train needs --out (checkpoint path) or 'out' in the config")
    (code,) = _codes(cfg)[:1]
    tc = TrainConfig(
        code, cfg.training_mode, batch_size=cfg.batch_size, epochs=cfg.epochs,
        minibatches_per_epoch=cfg.minibatches_per_epoch, lr_start=cfg.lr_start, lr_end=cfg.lr_end,
        T=cfg.T, seed=cfg.seed, hidden=cfg.hidden, n_layers=cfg.n_layers, activation=cfg.activation,
    )
    result = train(tc, checkpoint_path=cfg.out, metrics_path=cfg.metrics)
    print(f"trained {code.name} ({cfg.training_mode}) final loss {result.final_loss:.6f} -> {cfg.out}")
    return 0


def cmd_eval(args, parser):
    cfg = _config(args)
    if not cfg.codes:
        parser.error("eval needs a code file (--code or 'code' in the config)")
    _emit(evaluate(cfg).to_csv(), cfg.out)
    return 0


def cmd_sweep(args, parser):
    cfg = _config(args)
    if not cfg.codes:
        parser.error("sweep needs a code file (--code or 'code' in the config)")
    out = cfg.out or "sweep_out"
    files = sweep(cfg, out)
    for name in files:
        print(Path(out) / name)
    return 0


def schedule_csv(kind: str, T: int) -> str:
    s = make_schedule(kind, T)
    lines = ["t,beta,beta_bar,coefficient"]
    for t, (b, bb, c) in enumerate(zip(s.betas, s.beta_bars, s.coefficients()), start=1):
        lines.append(f"{t},{b:.17g},{bb:.17g},{c:.17g}")
    return "\n".join(lines) + "\n"


def cmd_schedule_dump(args, parser):
    _emit(schedule_csv(args.kind, args.T), args.out)
    return 0


def cmd_code_info(args, parser):
    code = load_code(args.code, args.format)
    info = code.info()
    for key in ("name", "n", "k", "m", "rank"):
        print(f"{key}: {info[key]}")
    print(f"density: {info['density']:.6f}")
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "schedule-dump": cmd_schedule_dump,
    "code-info": cmd_code_info,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, parser)
    except (DDECCError, OSError) as exc:
        print(f"ddecc-lab {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
