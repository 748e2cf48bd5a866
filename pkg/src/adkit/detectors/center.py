from __future__ import annotations

import numpy as np

from .._rng import Xoshiro256, derive_seed
from . import _mlp
from .base import BaseDetector
from .features import RandomLogFeatures


class CenterDistanceDetector(BaseDetector):
    """Compactness detector: a linear head on frozen features, pulled toward a fixed center.

    The head ``g(z) = z @ W + b`` starts from Glorot weights; the center is the
    mean head output over the training set at initialization and never moves.
    Training minimizes ``mean ||g(phi(x)) - c||^2 + lambda_elastic * ||theta - theta0||^2``
    where ``theta0`` is the initial head. The squared distance to the center is
    the anomaly score.

    The elastic term is applied as a proximal step,
    ``theta <- (theta - lr * grad_data + 2 lr lambda theta0) / (1 + 2 lr lambda)``,
    which equals plain SGD to first order in ``lr * lambda`` and stays stable
    as ``lambda`` grows (the head freezes at ``theta0``).

    Parameters
    ----------
    side : int, default=32
    n_features : int, default=128
    embed_dim : int, default=32
    lambda_elastic : float, default=0.1
    learning_rate : float, default=0.1
    batch_size : int, default=16
    n_epochs : int, default=20
    seed : int, default=0
    """

    kind = "center_distance"

    def __init__(
        self,
        side=32,
        n_features=128,
        embed_dim=32,
        lambda_elastic=0.1,
        learning_rate=0.1,
        batch_size=16,
        n_epochs=20,
        seed=0,
    ):
        self.side = side
        self.n_features = n_features
        self.embed_dim = embed_dim
        self.lambda_elastic = lambda_elastic
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.n_epochs = n_epochs
        self.seed = seed

    def _init_params(self, X):
        if self.lambda_elastic < 0:
            raise ValueError("lambda_elastic must be nonnegative")
        self.features_ = RandomLogFeatures(
            self.n_features, derive_seed(self.seed, "features")
        ).fit(X)
        rng = Xoshiro256(derive_seed(self.seed, "init"))
        (w,), (b,) = _mlp.glorot_uniform(rng, [int(self.n_features), int(self.embed_dim)])
        self.head_weight_, self.head_bias_ = w, b
        self.head_weight0_, self.head_bias0_ = w.copy(), b.copy()
        self.head_weight0_.setflags(write=False)
        self.head_bias0_.setflags(write=False)
        self.center_ = self.embed(X).mean(axis=0)
        self.center_.setflags(write=False)

    def embed(self, X):
        return self.features_.transform(X) @ self.head_weight_ + self.head_bias_

    def _params(self):
        return [self.head_weight_, self.head_bias_]

    def _data_loss_and_grad(self, Xb):
        z = self.features_.transform(Xb)
        d = z @ self.head_weight_ + self.head_bias_ - self.center_
        n = Xb.shape[0]
        loss = float(np.sum(d * d) / n)
        g = 2.0 * d / n
        return loss, [z.T @ g, g.sum(axis=0)]

    def _elastic(self):
        dw = self.head_weight_ - self.head_weight0_
        db = self.head_bias_ - self.head_bias0_
        lam = float(self.lambda_elastic)
        return lam * float(np.sum(dw * dw) + np.sum(db * db)), [2 * lam * dw, 2 * lam * db]

    def _loss_and_grad(self, Xb):
        loss, grads = self._data_loss_and_grad(Xb)
        reg, reg_grads = self._elastic()
        return loss + reg, [g + r for g, r in zip(grads, reg_grads)]

    def _train_batch(self, Xb):
        loss, grads = self._data_loss_and_grad(Xb)
        reg, _ = self._elastic()
        loss += reg
        if np.isfinite(loss):
            lr = float(self.learning_rate)
            shrink = 1.0 + 2.0 * lr * float(self.lambda_elastic)
            for p, p0, g in zip(self._params(), (self.head_weight0_, self.head_bias0_), grads):
                p[...] = (p - lr * g + (shrink - 1.0) * p0) / shrink
        return loss

    def _score(self, X):
        d = self.embed(X) - self.center_
        return np.sum(d * d, axis=1)

    def _blocks(self):
        return [
            ("feature.offset", self.features_.offset_),
            ("feature.projection", self.features_.projection_),
            ("head.weight", self.head_weight_),
            ("head.bias", self.head_bias_),
            ("head.weight0", self.head_weight0_),
            ("head.bias0", self.head_bias0_),
            ("center", self.center_),
        ]

    def _load_blocks(self, blocks):
        proj = blocks["feature.projection"]
        fm = RandomLogFeatures(proj.shape[1], derive_seed(self.seed, "features"))
        fm.n_features_in_ = proj.shape[0]
        fm.projection_ = proj
        fm.offset_ = blocks["feature.offset"]
        self.features_ = fm
        self.head_weight_ = blocks["head.weight"]
        self.head_bias_ = blocks["head.bias"]
        self.head_weight0_ = blocks["head.weight0"]
        self.head_bias0_ = blocks["head.bias0"]
        self.center_ = blocks["center"]
        for a in (self.head_weight0_, self.head_bias0_, self.center_):
            a.setflags(write=False)
