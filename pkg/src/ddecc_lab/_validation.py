"""Input validation helpers in the spirit of ``sklearn.utils.validation``."""

import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import InputError, NumericError


def check_soft_words(X, n=None, name="X"):
    """Return ``X`` as a 2-D float64 array of soft words.

    A single word (1-D input) is promoted to a batch of one. Non-finite
    entries raise :class:`NumericError`.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if not np.all(np.isfinite(X)):
        raise NumericError(f"{name} contains non-finite entries")
    X = check_array(X, dtype=np.float64, ensure_min_samples=1, ensure_all_finite=True)
    if n is not None and X.shape[1] != n:
        raise InputError(f"{name} has {X.shape[1]} columns, expected code length {n}")
    return X


def check_hard_words(W, n=None, name="W"):
    """Return ``W`` as a 2-D uint8 array of bits, rejecting non-binary entries."""
    W = np.asarray(W)
    if W.ndim == 1:
        W = W[None, :]
    if W.ndim != 2:
        raise InputError(f"{name} must be 1-D or 2-D, got {W.ndim}-D")
    if W.size and not np.isin(W, (0, 1)).all():
        raise InputError(f"{name} must contain only 0/1 entries")
    if n is not None and W.shape[1] != n:
        raise InputError(f"{name} has {W.shape[1]} columns, expected code length {n}")
    return W.astype(np.uint8, copy=False)


def check_positive_int(value, name, minimum=1):
    if isinstance(value, (bool, np.bool_)) or int(value) != value or value < minimum:
        raise InputError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
