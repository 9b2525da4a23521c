"""Monte-Carlo evaluation, experiment configuration and the command line."""

from .config import METHOD_COMBOS, ExperimentConfig, load_config, parse_config
from .evaluate import EvalReport, EvalRow, ber_vs_budget, evaluate, iteration_report, sweep

__all__ = [
    "METHOD_COMBOS",
    "EvalReport",
    "EvalRow",
    "ExperimentConfig",
    "ber_vs_budget",
    "evaluate",
    "iteration_report",
    "load_config",
    "parse_config",
    "sweep",
]
