"""scikit-learn style front end.

>>> from ddecc_lab import DiffusionDecoder, hamming_7_4
>>> dec = DiffusionDecoder(hamming_7_4(), sampling="cosine", T=64, lr_start=1e-2, lr_end=5e-4)
>>> dec.fit()                      # doctest: +SKIP
>>> bits = dec.predict(received)   # doctest: +SKIP
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_hard_words, check_soft_words
from .channel import modulate
from .denoiser import NeuralDenoiser, OracleDenoiser, load_checkpoint, save_checkpoint
from .exceptions import ConfigurationError
from .sampler import DEFAULT_LAMBDA_GRID, SamplingMethod, decode
from .trainer import TrainConfig, train


class DiffusionDecoder(BaseEstimator):
    """Diffusion decoder for a fixed linear code.

    ``fit`` trains the neural denoiser (``training`` selects the noising
    schedule); ``predict`` maps received soft words to hard codeword
    estimates. With ``denoiser="oracle"`` nothing is trained and the true
    transmitted bits must be passed to :meth:`decode` as ``reference``.

    Parameters follow :class:`~ddecc_lab.trainer.TrainConfig`; ``T=None``
    means the number of parity rows and ``budget=None`` means ``2 * T``.
    """

    def __init__(self, code=None, sampling="cosine", training="linear", denoiser="neural",
                 T=None, budget=None, lambda_grid=DEFAULT_LAMBDA_GRID, hidden=16, n_layers=2,
                 activation="tanh", epochs=20, minibatches_per_epoch=100, batch_size=128,
                 lr_start=1e-4, lr_end=5e-6, random_state=0):
        self.code = code
        self.sampling = sampling
        self.training = training
        self.denoiser = denoiser
        self.T = T
        self.budget = budget
        self.lambda_grid = lambda_grid
        self.hidden = hidden
        self.n_layers = n_layers
        self.activation = activation
        self.epochs = epochs
        self.minibatches_per_epoch = minibatches_per_epoch
        self.batch_size = batch_size
        self.lr_start = lr_start
        self.lr_end = lr_end
        self.random_state = random_state

    def _check_code(self):
        if self.code is None:
            raise ConfigurationError("DiffusionDecoder needs a LinearCode")
        return self.code

    def fit(self, X=None, y=None):
        """Train the denoiser. ``X`` and ``y`` are ignored: training data is synthesised from the code."""
        code = self._check_code()
        self.method_ = SamplingMethod(self.sampling, tuple(self.lambda_grid))
        self.T_ = self.T or code.m
        if self.denoiser == "oracle":
            self.params_ = None
            self.history_ = []
            return self
        if self.denoiser != "neural":
            raise ConfigurationError(f"denoiser must be 'neural' or 'oracle', got {self.denoiser!r}")
        cfg = TrainConfig(
            code, self.training, batch_size=self.batch_size, epochs=self.epochs,
            minibatches_per_epoch=self.minibatches_per_epoch, lr_start=self.lr_start,
            lr_end=self.lr_end, T=self.T_, seed=self.random_state, hidden=self.hidden,
            n_layers=self.n_layers, activation=self.activation,
        )
        result = train(cfg)
        self.params_ = result.params
        self.history_ = result.history
        return self

    def decode(self, Y, reference=None):
        """Full :class:`~ddecc_lab.sampler.DecodeResult` for received words ``Y``."""
        check_is_fitted(self, "method_")
        code = self._check_code()
        Y = check_soft_words(Y, code.n, name="Y")
        if self.params_ is None:
            if reference is None:
                raise ConfigurationError("the oracle denoiser needs the transmitted bits as 'reference'")
            den = OracleDenoiser(modulate(check_hard_words(reference, code.n, name="reference")))
        else:
            den = NeuralDenoiser(self.params_)
        return decode(Y, code, den, self.method_, budget=self.budget, T=self.T_)

    def predict(self, Y, reference=None):
        return self.decode(Y, reference).decoded

    def score(self, Y, X_true):
        """``1 - BER`` of the decoded words against the transmitted bits."""
        X_true = check_hard_words(X_true, self.code.n)
        ref = X_true if self.params_ is None else None
        return 1.0 - float(np.mean(self.predict(Y, ref) != X_true))

    def save(self, path):
        check_is_fitted(self, "params_")
        if self.params_ is None:
            raise ConfigurationError("oracle decoders have no weights to save")
        save_checkpoint(self.params_, path)

    @classmethod
    def from_checkpoint(cls, path, code, **kwargs):
        params = load_checkpoint(path, code)
        kwargs.setdefault("T", params.T or None)
        if params.schedule_kind == "cosine":
            kwargs.setdefault("training", "cosine")
        est = cls(code=code, **kwargs)
        est.method_ = SamplingMethod(est.sampling, tuple(est.lambda_grid))
        est.T_ = est.T or code.m
        est.params_ = params
        est.history_ = []
        return est
