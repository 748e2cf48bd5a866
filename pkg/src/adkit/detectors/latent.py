from __future__ import annotations

import numpy as np
from sklearn.utils.extmath import svd_flip
from sklearn.utils.validation import check_is_fitted

from .._validation import as_patch_matrix
from .base import BaseDetector


class LatentGaussianDetector(BaseDetector):
    """Density detector: diagonal Gaussian over a PCA latent plus a residual term.

    Fitting is closed form and happens in :meth:`initialize`; ``train_epoch``
    leaves the parameters alone and reports the mean score of the batch it is
    given. The score is the Gaussian negative log-likelihood of the latent code
    minus its minimum over the latent space (the ``nll_floor_``), plus
    ``residual_weight`` times the squared PCA reconstruction error::

        0.5 * sum_j (z_j - mu_j)**2 / var_j + residual_weight * ||x - x_pca||**2

    Parameters
    ----------
    side : int, default=32
    n_components : int, default=16
    residual_weight : float, default=10.0
        Scale of the squared residual (pixel units) relative to the latent
        Mahalanobis term (units of latent standard deviation).
    var_floor : float, default=1e-6
        Lower bound on each latent variance.
    """

    kind = "latent_gaussian"

    def __init__(self, side=32, n_components=16, residual_weight=10.0, var_floor=1e-6, batch_size=16, seed=0):
        self.side = side
        self.n_components = n_components
        self.residual_weight = residual_weight
        self.var_floor = var_floor
        self.batch_size = batch_size
        self.seed = seed

    n_epochs = 0

    def _init_params(self, X):
        m, d = int(self.n_components), self.n_inputs
        if not 1 <= m <= d:
            raise ValueError(f"n_components must be in [1, {d}], got {m}")
        self.pca_mean_ = X.mean(axis=0)
        Xc = X - self.pca_mean_
        full = m > min(Xc.shape)
        U, S, Vt = np.linalg.svd(Xc, full_matrices=full)
        if full:
            # svd_flip needs U and Vt of matching rank
            k = min(Xc.shape)
            _, Vt_head = svd_flip(U[:, :k], Vt[:k])
            Vt = np.vstack([Vt_head, Vt[k:]])
        else:
            _, Vt = svd_flip(U, Vt)
        self.pca_basis_ = np.ascontiguousarray(Vt[:m].T)
        Z = Xc @ self.pca_basis_
        self.latent_mean_ = Z.mean(axis=0)
        self.latent_var_ = np.maximum(Z.var(axis=0), float(self.var_floor))

    @property
    def nll_floor_(self) -> float:
        check_is_fitted(self, "latent_var_")
        return float(0.5 * np.sum(np.log(2.0 * np.pi * self.latent_var_)))

    def train_epoch(self, X) -> float:
        check_is_fitted(self, "epoch_")
        loss = self.evaluation_loss(X)
        self.epoch_ += 1
        return loss

    def latent(self, X):
        X = as_patch_matrix(X, self.side)
        return (X - self.pca_mean_) @ self.pca_basis_

    def residual(self, X) -> np.ndarray:
        """Squared distance from each sample to its PCA reconstruction."""
        X = as_patch_matrix(X, self.side)
        if self.pca_basis_.shape[1] == self.n_inputs:
            return np.zeros(X.shape[0])
        Xc = X - self.pca_mean_
        r = Xc - (Xc @ self.pca_basis_) @ self.pca_basis_.T
        return np.sum(r * r, axis=1)

    def nll(self, X) -> np.ndarray:
        """Unshifted negative log-likelihood plus the weighted residual."""
        return self.anomaly_score(X) + self.nll_floor_

    def _score(self, X):
        z = (X - self.pca_mean_) @ self.pca_basis_
        maha = 0.5 * np.sum((z - self.latent_mean_) ** 2 / self.latent_var_, axis=1)
        return maha + float(self.residual_weight) * self.residual(X)

    def _params(self):
        return []

    def _blocks(self):
        return [
            ("pca.mean", self.pca_mean_),
            ("pca.basis", self.pca_basis_),
            ("latent.mean", self.latent_mean_),
            ("latent.var", self.latent_var_),
        ]

    def _load_blocks(self, blocks):
        self.pca_mean_ = blocks["pca.mean"]
        self.pca_basis_ = blocks["pca.basis"]
        self.latent_mean_ = blocks["latent.mean"]
        self.latent_var_ = blocks["latent.var"]
