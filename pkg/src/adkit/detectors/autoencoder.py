"""Reconstruction detectors: an MLP autoencoder scored in pixel or feature space."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_is_fitted

from .._rng import Xoshiro256, derive_seed
from .._validation import as_patch_matrix
from . import _mlp
from .base import BaseDetector
from .features import RandomLogFeatures


class AutoencoderDetector(BaseDetector):
    """Autoencoder trained and scored with the per-pixel squared error.

    Layer widths mirror ``hidden_sizes`` around the bottleneck:
    ``[D, h1, h2, b, h2, h1, D]`` for ``hidden_sizes=(h1, h2, b)`` and
    ``D = side**2``. Hidden layers use a leaky ReLU, the output a sigmoid so
    reconstructions stay in [0, 1].

    Parameters
    ----------
    side : int, default=32
    hidden_sizes : tuple of int, default=(128, 64, 16)
        Encoder widths, the last one being the bottleneck.
    learning_rate : float, default=20.0
        The loss is averaged over pixels, hence the large step.
    batch_size : int, default=16
    n_epochs : int, default=60
        Epochs run by :meth:`fit`.
    seed : int, default=0

    Attributes
    ----------
    weights_, biases_ : list of ndarray
    epoch_ : int
        Number of completed training epochs.
    """

    kind = "ae_pixel"

    def __init__(
        self,
        side=32,
        hidden_sizes=(128, 64, 16),
        learning_rate=20.0,
        batch_size=16,
        n_epochs=60,
        seed=0,
    ):
        self.side = side
        self.hidden_sizes = hidden_sizes
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.n_epochs = n_epochs
        self.seed = seed

    @property
    def layer_sizes(self) -> list[int]:
        h = [int(v) for v in self.hidden_sizes]
        return [self.n_inputs, *h, *reversed(h[:-1]), self.n_inputs]

    def _init_params(self, X):
        if not self.hidden_sizes:
            raise ValueError("hidden_sizes must name at least the bottleneck width")
        if int(self.hidden_sizes[-1]) >= self.n_inputs:
            raise ValueError(
                f"bottleneck {self.hidden_sizes[-1]} must be smaller than input size {self.n_inputs}"
            )
        rng = Xoshiro256(derive_seed(self.seed, "init"))
        self.weights_, self.biases_ = _mlp.glorot_uniform(rng, self.layer_sizes)
        self.input_mean_ = X.mean(axis=0)
        self.input_mean_.setflags(write=False)

    def _forward(self, X):
        return _mlp.forward(X - self.input_mean_, self.weights_, self.biases_)

    def _params(self):
        return [*self.weights_, *self.biases_]

    def reconstruct(self, X) -> np.ndarray:
        check_is_fitted(self, "weights_")
        out, _ = self._forward(as_patch_matrix(X, self.side))
        return out

    def _loss_and_grad(self, Xb):
        out, cache = self._forward(Xb)
        diff = out - Xb
        n, d = Xb.shape
        loss = float(np.sum(diff * diff) / (n * d))
        gw, gb, _ = _mlp.backward(cache, 2.0 * diff / (n * d), self.weights_)
        return loss, [*gw, *gb]

    def _score(self, X):
        out, _ = self._forward(X)
        return np.sum((X - out) ** 2, axis=1) / X.shape[1]

    def _blocks(self):
        blocks = [("input.mean", self.input_mean_)]
        blocks += [(f"weight.{i}", w) for i, w in enumerate(self.weights_)]
        blocks += [(f"bias.{i}", b) for i, b in enumerate(self.biases_)]
        return blocks

    def _load_blocks(self, blocks):
        n = len(self.layer_sizes) - 1
        self.input_mean_ = blocks["input.mean"]
        self.input_mean_.setflags(write=False)
        self.weights_ = [blocks[f"weight.{i}"] for i in range(n)]
        self.biases_ = [blocks[f"bias.{i}"] for i in range(n)]


class FeatureAutoencoderDetector(AutoencoderDetector):
    """Autoencoder whose loss and score compare inputs and reconstructions in a
    frozen random feature space (:class:`RandomLogFeatures`).

    Gradients flow through the feature map into the decoder; the map itself
    never changes.
    """

    kind = "ae_feature"

    def __init__(
        self,
        side=32,
        hidden_sizes=(128, 64, 16),
        n_features=128,
        learning_rate=20.0,
        batch_size=16,
        n_epochs=60,
        seed=0,
    ):
        super().__init__(
            side=side,
            hidden_sizes=hidden_sizes,
            learning_rate=learning_rate,
            batch_size=batch_size,
            n_epochs=n_epochs,
            seed=seed,
        )
        self.n_features = n_features

    def _init_params(self, X):
        super()._init_params(X)
        self.features_ = RandomLogFeatures(
            self.n_features, derive_seed(self.seed, "features")
        ).fit(X)

    def _loss_and_grad(self, Xb):
        out, cache = self._forward(Xb)
        diff = self.features_.transform(out) - self.features_.transform(Xb)
        n, f = diff.shape
        loss = float(np.sum(diff * diff) / (n * f))
        grad_out = self.features_.vjp(out, 2.0 * diff / (n * f))
        gw, gb, _ = _mlp.backward(cache, grad_out, self.weights_)
        return loss, [*gw, *gb]

    def _score(self, X):
        out, _ = self._forward(X)
        diff = self.features_.transform(out) - self.features_.transform(X)
        return np.sum(diff * diff, axis=1) / diff.shape[1]

    def _blocks(self):
        return [*super()._blocks(), ("feature.offset", self.features_.offset_),
            ("feature.projection", self.features_.projection_)]

    def _load_blocks(self, blocks):
        super()._load_blocks(blocks)
        proj = blocks["feature.projection"]
        fm = RandomLogFeatures(proj.shape[1], derive_seed(self.seed, "features"))
        fm.n_features_in_ = proj.shape[0]
        fm.projection_ = proj
        fm.offset_ = blocks["feature.offset"]
        self.features_ = fm
