"""Denoising-diffusion decoding of binary linear block codes."""

from .channel import modulate, sigma_from_ebn0, transmit
from .codes import (
    BinaryMatrix,
    LinearCode,
    derive_generator,
    hamming_7_4,
    hard_decision,
    load_code,
    parse_alist,
    parse_dense,
    random_codeword,
    syndrome,
)
from .denoiser import NeuralDenoiser, OracleDenoiser, load_checkpoint, save_checkpoint
from .estimator import DiffusionDecoder
from .sampler import DecodeResult, SamplingMethod, decode, lambda_search, reverse_step
from .schedule import NoiseSchedule, constant_schedule, cosine_schedule, step_coefficient
from .trainer import TrainConfig, train

__version__ = "0.1.0"

__all__ = [
    "BinaryMatrix",
    "DecodeResult",
    "DiffusionDecoder",
    "LinearCode",
    "NeuralDenoiser",
    "NoiseSchedule",
    "OracleDenoiser",
    "SamplingMethod",
    "TrainConfig",
    "constant_schedule",
    "cosine_schedule",
    "decode",
    "derive_generator",
    "hamming_7_4",
    "hard_decision",
    "lambda_search",
    "load_checkpoint",
    "load_code",
    "modulate",
    "parse_alist",
    "parse_dense",
    "random_codeword",
    "reverse_step",
    "save_checkpoint",
    "sigma_from_ebn0",
    "step_coefficient",
    "syndrome",
    "train",
    "transmit",
]
