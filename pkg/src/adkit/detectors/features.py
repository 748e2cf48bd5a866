from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .._rng import Xoshiro256
from .._validation import as_patch_matrix


class RandomLogFeatures(TransformerMixin, BaseEstimator):
    """Frozen nonlinear feature map ``x -> log(1 + |(x - offset) @ P|)``.

    ``P`` has i.i.d. standard normal entries scaled by ``1/sqrt(n_inputs)``,
    drawn from the seeded generator in row-major order, so it depends only on
    the seed and the input width. ``offset`` is the mean training patch when
    ``center=True`` (zero otherwise); without it the projections mostly encode
    overall brightness rather than texture. Both are fixed once fitted.

    Parameters
    ----------
    n_features : int, default=128
        Output dimension.
    seed : int, default=0
    center : bool, default=True
    """

    def __init__(self, n_features=128, seed=0, center=True):
        self.n_features = n_features
        self.seed = seed
        self.center = center

    def fit(self, X, y=None):
        X = as_patch_matrix(X)
        self._draw(X.shape[1])
        if self.center:
            self.offset_ = X.mean(axis=0)
        return self

    def _draw(self, n_inputs):
        rng = Xoshiro256(self.seed)
        d, f = int(n_inputs), int(self.n_features)
        self.n_features_in_ = d
        self.projection_ = rng.normal(d * f).reshape(d, f) / np.sqrt(d)
        self.offset_ = np.zeros(d)
        return self

    def transform(self, X):
        check_is_fitted(self, "projection_")
        X = np.asarray(X, dtype=np.float64)
        return np.log1p(np.abs((X - self.offset_) @ self.projection_))

    def vjp(self, X, grad):
        """Pull ``grad`` (w.r.t. the features of ``X``) back to the input space."""
        u = (X - self.offset_) @ self.projection_
        return (grad * np.sign(u) / (1.0 + np.abs(u))) @ self.projection_.T
