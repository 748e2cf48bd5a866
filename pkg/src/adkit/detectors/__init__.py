"""One-class detectors sharing a fit / train_epoch / anomaly_score / snapshot contract."""

from __future__ import annotations

from enum import Enum

from .autoencoder import AutoencoderDetector, FeatureAutoencoderDetector
from .base import BaseDetector
from .center import CenterDistanceDetector
from .checkpoint import DETECTOR_CLASSES, read_header, restore, snapshot
from .features import RandomLogFeatures
from .latent import LatentGaussianDetector


class DetectorKind(str, Enum):
    ae_pixel = "ae_pixel"
    ae_feature = "ae_feature"
    center_distance = "center_distance"
    latent_gaussian = "latent_gaussian"


def make_detector(kind, **params) -> BaseDetector:
    """Construct an unfitted detector of ``kind``; unknown parameters raise ``TypeError``."""
    return DETECTOR_CLASSES[DetectorKind(kind).value](**params)


def init_detector(kind, side, config, seed, train_samples) -> BaseDetector:
    """Build and initialize a detector on its training patches (no epochs run)."""
    params = dict(config or {})
    params.update(side=side, seed=seed)
    return make_detector(kind, **params).initialize(train_samples)


def train_epoch(state: BaseDetector, train_samples):
    loss = state.train_epoch(train_samples)
    return state, loss


def score(state: BaseDetector, patch) -> float:
    return float(state.anomaly_score([patch])[0])


__all__ = [
    "AutoencoderDetector",
    "BaseDetector",
    "CenterDistanceDetector",
    "DETECTOR_CLASSES",
    "DetectorKind",
    "FeatureAutoencoderDetector",
    "LatentGaussianDetector",
    "RandomLogFeatures",
    "init_detector",
    "make_detector",
    "read_header",
    "restore",
    "score",
    "snapshot",
    "train_epoch",
]
