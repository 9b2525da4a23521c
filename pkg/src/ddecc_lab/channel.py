"""BPSK over AWGN, and counter-based random streams for Monte-Carlo trials.

Bit 0 maps to +1 and bit 1 to -1. Noise standard deviation follows
``sigma**2 = 1 / (2 * R * 10**(EbN0_dB / 10))`` for unit-energy symbols.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

from .exceptions import InputError

# Stream purposes; each gets its own Philox key so streams never overlap.
MESSAGE_STREAM = 0
NOISE_STREAM = 1

_MASK64 = (1 << 64) - 1


def sigma_from_ebn0(ebn0_db: float, rate: float) -> float:
    if not 0.0 < rate <= 1.0:
        raise InputError(f"code rate must lie in (0, 1], got {rate}")
    return float((2.0 * rate * 10.0 ** (ebn0_db / 10.0)) ** -0.5)


def modulate(words) -> np.ndarray:
    """BPSK map, preserving the input's shape."""
    w = np.asarray(words)
    if w.size and not np.isin(w, (0, 1)).all():
        raise InputError("modulate expects 0/1 entries")
    return 1.0 - 2.0 * w.astype(np.float64)


def transmit(x, sigma: float, rng) -> np.ndarray:
    """``y = x + sigma * z``.

    ``rng`` is a numpy Generator, or an array of pre-drawn standard normals
    such as :func:`trial_normals` output.
    """
    if sigma < 0:
        raise InputError(f"sigma must be >= 0, got {sigma}")
    x = np.asarray(x, dtype=np.float64)
    if isinstance(rng, np.ndarray):
        z = np.asarray(rng, dtype=np.float64)
        if z.shape != x.shape:
            raise InputError(f"noise shape {z.shape} != signal shape {x.shape}")
    else:
        z = rng.standard_normal(x.shape)
    return x + sigma * z


# ---------------------------------------------------------------------------
# Counter-based streams
#
# Draw ``j`` of trial ``i`` is the 64-bit Philox4x64 output at position
# ``i * stride + j`` under key ``(master_seed, purpose)``; ``stride`` is the
# per-trial draw count rounded up to a whole Philox block (4 outputs), so any
# contiguous range of trials is one contiguous range of counter blocks.
# Normals use the inverse CDF of the uniform ``((r >> 11) + 0.5) / 2**53``,
# one 64-bit draw per normal.


def _stride(per_trial: int) -> int:
    return 4 * max(1, -(-per_trial // 4))


def raw_block(master_seed: int, purpose: int, start: int, count: int) -> np.ndarray:
    """``count`` uint64 outputs beginning at stream position ``start`` (multiple of 4)."""
    if start % 4:
        raise InputError("stream positions must be aligned to 4")
    key = np.array([master_seed & _MASK64, purpose & _MASK64], dtype=np.uint64)
    counter = np.zeros(4, dtype=np.uint64)
    block = start // 4
    counter[0] = block & _MASK64
    counter[1] = (block >> 64) & _MASK64
    return np.random.Philox(key=key, counter=counter).random_raw(count)


def uniforms_from_raw(raw: np.ndarray) -> np.ndarray:
    """Map uint64 draws to the open interval (0, 1), exact in float64."""
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normals_from_raw(raw: np.ndarray) -> np.ndarray:
    return ndtri(uniforms_from_raw(raw))


def trial_raw(master_seed: int, purpose: int, first_trial: int, n_trials: int, per_trial: int) -> np.ndarray:
    """(n_trials, per_trial) raw draws for trials ``first_trial ...``."""
    stride = _stride(per_trial)
    raw = raw_block(master_seed, purpose, first_trial * stride, n_trials * stride)
    return raw.reshape(n_trials, stride)[:, :per_trial]


def trial_normals(master_seed: int, first_trial: int, n_trials: int, n: int) -> np.ndarray:
    return normals_from_raw(trial_raw(master_seed, NOISE_STREAM, first_trial, n_trials, n))


def trial_bits(master_seed: int, first_trial: int, n_trials: int, k: int) -> np.ndarray:
    raw = trial_raw(master_seed, MESSAGE_STREAM, first_trial, n_trials, k)
    return (raw >> np.uint64(63)).astype(np.uint8)

