"""Score normalization against validation normals and decision-level averaging.

Each member's raw test scores are mapped through
``(score - min(N)) / (max(N) - min(N))`` where ``N`` holds that member's scores
on the validation normals, then the normalized vectors are averaged. Values
outside [0, 1] are kept as is: clipping would tie distinct test scores and
change the ROC-AUC.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, OneToOneFeatureMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_score_vector
from .exceptions import DegenerateRangeError

MIN_RANGE = 1e-12


@dataclass(frozen=True)
class NormalizationStats:
    min_n: float
    max_n: float
    source_count: int

    def __post_init__(self):
        if self.max_n < self.min_n:
            raise ValueError("max_n must be >= min_n")
        if self.source_count < 2:
            raise ValueError("normalization needs at least two validation scores")

    @property
    def span(self) -> float:
        return self.max_n - self.min_n


@dataclass
class MemberScores:
    name: str
    raw: np.ndarray
    normalized: np.ndarray
    stats: NormalizationStats


@dataclass
class EnsembleScores:
    members: list[MemberScores]
    combined: np.ndarray


def fit_normalization(val_normal_scores) -> NormalizationStats:
    s = as_score_vector(val_normal_scores, "val_normal_scores", min_len=2)
    lo, hi = float(s.min()), float(s.max())
    if hi - lo < MIN_RANGE:
        raise DegenerateRangeError(
            f"validation-normal scores span {hi - lo!r} (< {MIN_RANGE}); the member is uninformative"
        )
    return NormalizationStats(lo, hi, int(s.size))


def normalize(raw, stats: NormalizationStats) -> np.ndarray:
    if stats.span < MIN_RANGE:
        raise DegenerateRangeError("cannot normalize with a degenerate score range")
    r = as_score_vector(raw, "raw scores")
    return (r - stats.min_n) / stats.span


def make_member(name: str, raw, val_normal_scores) -> MemberScores:
    stats = fit_normalization(val_normal_scores)
    raw = as_score_vector(raw, f"{name} raw scores")
    return MemberScores(name, raw, normalize(raw, stats), stats)


def average_ensemble(members) -> EnsembleScores:
    members = list(members)
    if not members:
        raise ValueError("ensemble needs at least one member")
    n = len(members[0].normalized)
    for m in members:
        if len(m.normalized) != n or len(m.raw) != n:
            raise ValueError(
                f"member {m.name!r} scores {len(m.normalized)} samples, expected {n}"
            )
    combined = np.mean(np.stack([m.normalized for m in members]), axis=0)
    return EnsembleScores(members, combined)


class ScoreNormalizer(OneToOneFeatureMixin, TransformerMixin, BaseEstimator):
    """Min-max scaler fitted on validation-normal scores, one column per detector.

    Unlike :class:`sklearn.preprocessing.MinMaxScaler` it rejects columns whose
    validation range is degenerate instead of silently dividing by one.
    """

    def fit(self, X, y=None):
        X = _as_columns(X)
        stats = [fit_normalization(X[:, j]) for j in range(X.shape[1])]
        self.n_features_in_ = X.shape[1]
        self.min_ = np.array([s.min_n for s in stats])
        self.range_ = np.array([s.span for s in stats])
        return self

    def transform(self, X):
        check_is_fitted(self, "min_")
        X = _as_columns(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} score columns, got {X.shape[1]}")
        return (X - self.min_) / self.range_


class AverageEnsemble(BaseEstimator):
    """Average of per-detector normalized scores; ``fit`` takes validation-normal scores."""

    def fit(self, X, y=None):
        self.normalizer_ = ScoreNormalizer().fit(X)
        return self

    def anomaly_score(self, X):
        check_is_fitted(self, "normalizer_")
        return self.normalizer_.transform(X).mean(axis=1)


def _as_columns(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or not np.all(np.isfinite(X)):
        raise ValueError("scores must be a finite 1-d or 2-d array")
    return X


def format_member_table(paths, labels, member: MemberScores) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample_path", "label", "raw", "normalized"])
    for p, lab, r, z in zip(paths, labels, member.raw, member.normalized):
        w.writerow([p, lab, repr(float(r)), repr(float(z))])
    return buf.getvalue()


def format_combined_table(paths, labels, combined) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample_path", "label", "score"])
    for p, lab, s in zip(paths, labels, combined):
        w.writerow([p, lab, repr(float(s))])
    return buf.getvalue()
