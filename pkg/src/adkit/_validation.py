"""Input validation helpers shared by the estimators and scoring functions."""

from __future__ import annotations

import numpy as np
from sklearn.utils import check_array


def as_patch_matrix(X, side: int | None = None) -> np.ndarray:
    """Coerce patches to a float64 ``(n_samples, side * side)`` matrix.

    Accepts a sequence of :class:`~adkit.data.Patch`, a 3-d array of images, or
    an already flattened 2-d array.
    """
    if isinstance(X, (list, tuple)) and X and hasattr(X[0], "pixels"):
        X = np.stack([np.asarray(p.pixels, dtype=np.float64).ravel() for p in X])
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 3:
        X = X.reshape(X.shape[0], -1)
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if side is not None and X.shape[1] != side * side:
        raise ValueError(
            f"patch dimension mismatch: got {X.shape[1]} pixels per sample, "
            f"expected {side}x{side}={side * side}"
        )
    return X


def as_score_vector(scores, name: str = "scores", min_len: int = 1) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1:
        s = s.ravel()
    if s.size < min_len:
        raise ValueError(f"{name} needs at least {min_len} value(s), got {s.size}")
    if not np.all(np.isfinite(s)):
        raise ValueError(f"{name} contains non-finite values")
    return s
