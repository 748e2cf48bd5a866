from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .._rng import Xoshiro256, derive_seed
from .._validation import as_patch_matrix
from ..exceptions import DivergenceError


class BaseDetector(BaseEstimator):
    """Shared train/score/snapshot contract for one-class detectors.

    Subclasses implement ``_init_params``, ``_loss_and_grad``, ``_params``,
    ``_score`` and the checkpoint block hooks. Scores follow one convention
    everywhere: nonnegative, higher means more anomalous. ``score_samples``
    returns the negated score to match scikit-learn's outlier detectors, where
    larger means more normal.
    """

    kind = ""

    def fit(self, X, y=None):
        """Initialize on ``X`` and run ``n_epochs`` epochs of minibatch SGD."""
        X = as_patch_matrix(X, self.side)
        self.initialize(X)
        for _ in range(int(getattr(self, "n_epochs", 0))):
            self.train_epoch(X)
        return self

    def initialize(self, X):
        X = as_patch_matrix(X, self.side)
        self._init_params(X)
        self.epoch_ = 0
        return self

    def train_epoch(self, X) -> float:
        """One seeded-shuffled pass of minibatch gradient descent; return the epoch loss.

        The loss of each minibatch is taken before its update and the epoch loss
        is their sample-weighted mean.
        """
        check_is_fitted(self, "epoch_")
        X = as_patch_matrix(X, self.side)
        n = X.shape[0]
        epoch = self.epoch_ + 1
        order = Xoshiro256(derive_seed(self.seed, "shuffle", epoch)).permutation(n)
        bs = max(1, int(self.batch_size))
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start : start + bs]
            loss = self._train_batch(X[idx])
            if not math.isfinite(loss):
                raise DivergenceError(epoch, loss)
            total += loss * len(idx)
        self.epoch_ = epoch
        return total / n

    def _train_batch(self, Xb) -> float:
        loss, grads = self._loss_and_grad(Xb)
        if math.isfinite(loss):
            lr = float(self.learning_rate)
            for p, g in zip(self._params(), grads):
                p -= lr * g
        return loss

    def anomaly_score(self, X) -> np.ndarray:
        check_is_fitted(self, "epoch_")
        return self._score(as_patch_matrix(X, self.side))

    def score_samples(self, X) -> np.ndarray:
        return -self.anomaly_score(X)

    def evaluation_loss(self, X) -> float:
        """Mean anomaly score, i.e. the unregularized training objective on ``X``."""
        return float(np.mean(self.anomaly_score(X)))

    def to_bytes(self) -> bytes:
        from .checkpoint import snapshot

        return snapshot(self)

    @classmethod
    def from_bytes(cls, data: bytes):
        from .checkpoint import restore

        det = restore(data)
        if not isinstance(det, cls):
            raise TypeError(f"checkpoint holds a {type(det).__name__}, not {cls.__name__}")
        return det

    @property
    def n_inputs(self) -> int:
        return int(self.side) ** 2
