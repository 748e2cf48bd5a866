"""Periodic checkpointing and the four training-epoch selection strategies.

Only :func:`select_by_val_auc` accepts abnormal data; the other strategies see
normal validation scores and nothing else.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from ._validation import as_patch_matrix
from .detectors import init_detector, restore
from .detectors.checkpoint import read_header
from .evaluation import roc_auc

EPS = 1e-12


class SelectionStrategy(str, Enum):
    last_epoch = "last_epoch"
    normal_val_loss = "normal_val_loss"
    sample_wise = "sample_wise"
    complete_validation = "complete_validation"


@dataclass
class CheckpointRecord:
    epoch: int
    checkpoint: bytes
    normal_val_scores: np.ndarray
    normal_val_loss: float

    def __post_init__(self):
        self.normal_val_scores = np.asarray(self.normal_val_scores, dtype=np.float64)
        s = self.normal_val_scores
        if s.ndim != 1 or not np.all(np.isfinite(s)) or np.any(s < 0):
            raise ValueError("normal_val_scores must be a finite, nonnegative vector")

    def detector(self):
        return restore(self.checkpoint)

    @property
    def normal_mean(self) -> float:
        return float(np.mean(self.normal_val_scores))


@dataclass
class CheckpointStore:
    detector_kind: str
    cadence: int
    records: list[CheckpointRecord] = field(default_factory=list)

    def append(self, record: CheckpointRecord) -> None:
        if self.records and record.epoch <= self.records[-1].epoch:
            raise ValueError("checkpoint epochs must be strictly increasing")
        if self.records and len(record.normal_val_scores) != len(self.records[0].normal_val_scores):
            raise ValueError("every checkpoint must score the same validation normals")
        self.records.append(record)

    @property
    def epochs(self) -> list[int]:
        return [r.epoch for r in self.records]

    def __len__(self):
        return len(self.records)

    def record(self, epoch: int) -> CheckpointRecord:
        for r in self.records:
            if r.epoch == epoch:
                return r
        raise KeyError(f"no checkpoint at epoch {epoch}")


def checkpoint_epochs(total_epochs: int, cadence: int) -> list[int]:
    """Multiples of ``cadence`` up to ``total_epochs``, plus the final epoch."""
    if cadence < 1 or total_epochs < cadence:
        raise ValueError(f"need total_epochs >= cadence >= 1, got {total_epochs}, {cadence}")
    epochs = list(range(cadence, total_epochs + 1, cadence))
    if epochs[-1] != total_epochs:
        epochs.append(total_epochs)
    return epochs


def train_with_checkpoints(kind, train, val_normal, total_epochs, cadence, config=None, seed=0, side=None):
    """Train a detector and snapshot it every ``cadence`` epochs and at the end.

    A detector without trainable parameters (``latent_gaussian``) is fitted once
    and stored as a single record at epoch 0, so every strategy returns it.
    """
    epochs = checkpoint_epochs(int(total_epochs), int(cadence))
    X = as_patch_matrix(train, side)
    V = as_patch_matrix(val_normal, side)
    if side is None:
        side = int(round(math.sqrt(X.shape[1])))
    det = init_detector(kind, side, config, seed, X)
    store = CheckpointStore(detector_kind=det.kind, cadence=int(cadence))
    if not det._params():
        store.append(_record(det, V))
        return store
    for epoch in range(1, epochs[-1] + 1):
        det.train_epoch(X)
        if epoch in epochs:
            store.append(_record(det, V))
    return store


def _record(det, V) -> CheckpointRecord:
    scores = det.anomaly_score(V)
    return CheckpointRecord(det.epoch_, det.to_bytes(), scores, float(np.mean(scores)))


def _require(store: CheckpointStore) -> None:
    if not store.records:
        raise ValueError("checkpoint store is empty")


def select_last(store: CheckpointStore) -> CheckpointRecord:
    _require(store)
    return max(store.records, key=lambda r: r.epoch)


def select_by_normal_loss(store: CheckpointStore) -> CheckpointRecord:
    """Checkpoint with the lowest mean validation-normal loss; earliest epoch on ties."""
    _require(store)
    for r in store.records:
        if not math.isfinite(r.normal_val_loss):
            raise ValueError(f"non-finite validation loss at epoch {r.epoch}")
    best = store.records[0]
    for r in store.records[1:]:
        if r.normal_val_loss < best.normal_val_loss:
            best = r
    return best


def _usable(store: CheckpointStore) -> list[CheckpointRecord]:
    _require(store)
    usable = [r for r in store.records if r.normal_mean > EPS]
    if not usable:
        raise ValueError("every checkpoint has a degenerate (near-zero) mean normal score")
    return usable


def sample_wise_scores(store: CheckpointStore, X, side=None):
    """Maximal ratio of each sample's score to the checkpoint's mean normal score.

    Returns ``(scores, epochs)``: the maximum over checkpoints of
    ``score_c(x) / mean(N_c)`` and the epoch attaining it (earliest on ties).
    Checkpoints whose mean normal score is at most 1e-12 are skipped.
    """
    usable = _usable(store)
    X = as_patch_matrix(X, side)
    ratios = np.stack([r.detector().anomaly_score(X) / r.normal_mean for r in usable])
    best = np.argmax(ratios, axis=0)  # first maximum -> earliest epoch
    epochs = np.array([r.epoch for r in usable])[best]
    return ratios[best, np.arange(X.shape[0])], epochs


def score_sample_wise(store: CheckpointStore, patch) -> tuple[float, int]:
    scores, epochs = sample_wise_scores(store, [patch])
    return float(scores[0]), int(epochs[0])


def sample_wise_normal_scores(store: CheckpointStore) -> np.ndarray:
    """Sample-wise scores of the validation normals, from the stored score vectors."""
    usable = _usable(store)
    ratios = np.stack([r.normal_val_scores / r.normal_mean for r in usable])
    return ratios.max(axis=0)


def select_by_val_auc(store: CheckpointStore, val_normal, val_abnormal, side=None) -> CheckpointRecord:
    """Checkpoint with the best validation ROC-AUC (reads abnormal data: an oracle)."""
    _require(store)
    V = as_patch_matrix(val_normal, side)
    if len(val_abnormal) == 0:
        raise ValueError("complete validation needs at least one abnormal validation sample")
    A = as_patch_matrix(val_abnormal, side)
    best, best_auc = None, -1.0
    for r in store.records:
        det = r.detector()
        auc = roc_auc(det.anomaly_score(V), det.anomaly_score(A)).auc
        if auc > best_auc:
            best, best_auc = r, auc
    return best


def select(store: CheckpointStore, strategy, val_normal=None, val_abnormal=None) -> CheckpointRecord:
    strategy = SelectionStrategy(strategy)
    if strategy is SelectionStrategy.last_epoch:
        return select_last(store)
    if strategy is SelectionStrategy.normal_val_loss:
        return select_by_normal_loss(store)
    if strategy is SelectionStrategy.complete_validation:
        return select_by_val_auc(store, val_normal, val_abnormal)
    raise ValueError("sample_wise scores each sample separately and selects no single checkpoint")


# persistence ---------------------------------------------------------------


def save_store(store: CheckpointStore, directory, sample_paths=None) -> None:
    """Write ``epoch_NNNN.adk`` files, ``index.csv`` and ``scores_NNNN.csv`` files."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    index = io.StringIO()
    w = csv.writer(index, lineterminator="\n")
    w.writerow(["epoch", "normal_val_loss"])
    for r in store.records:
        w.writerow([r.epoch, repr(float(r.normal_val_loss))])
        (directory / f"epoch_{r.epoch:04d}.adk").write_bytes(r.checkpoint)
        buf = io.StringIO()
        sw = csv.writer(buf, lineterminator="\n")
        sw.writerow(["sample_path", "score"])
        paths = sample_paths or [str(i) for i in range(len(r.normal_val_scores))]
        for p, s in zip(paths, r.normal_val_scores):
            sw.writerow([p, repr(float(s))])
        (directory / f"scores_{r.epoch:04d}.csv").write_bytes(buf.getvalue().encode("utf-8"))
    (directory / "index.csv").write_bytes(index.getvalue().encode("utf-8"))
    (directory / "store.csv").write_bytes(
        f"detector_kind,cadence\n{store.detector_kind},{store.cadence}\n".encode("utf-8")
    )


def load_store(directory) -> CheckpointStore:
    directory = Path(directory)
    with open(directory / "store.csv", newline="", encoding="utf-8") as fh:
        meta = next(csv.DictReader(fh))
    store = CheckpointStore(detector_kind=meta["detector_kind"], cadence=int(meta["cadence"]))
    with open(directory / "index.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        epoch = int(row["epoch"])
        data = (directory / f"epoch_{epoch:04d}.adk").read_bytes()
        if read_header(data)["epoch"] != epoch:
            raise ValueError(f"checkpoint file for epoch {epoch} holds a different epoch")
        with open(directory / f"scores_{epoch:04d}.csv", newline="", encoding="utf-8") as fh:
            scores = [float(r["score"]) for r in csv.DictReader(fh)]
        store.append(CheckpointRecord(epoch, data, np.array(scores), float(row["normal_val_loss"])))
    return store
