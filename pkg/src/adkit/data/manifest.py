"""Labeled patch records grouped by patient, stored as a four-column CSV."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path

from ..exceptions import ManifestError
from .patch import Patch, read_patch

HEADER = ("path", "label", "patient_id", "split")
LABELS = ("normal", "abnormal")
SPLITS = ("train", "val", "test", "unassigned")


@dataclass(frozen=True)
class ManifestRecord:
    path: str
    label: str
    patient_id: str
    split: str = "unassigned"

    def __post_init__(self):
        if self.label not in LABELS:
            raise ManifestError(f"unknown label {self.label!r}")
        if self.split not in SPLITS:
            raise ManifestError(f"unknown split {self.split!r}")
        if self.split == "train" and self.label != "normal":
            raise ManifestError(f"train record {self.path!r} must be labeled normal")


@dataclass
class Dataset:
    """An ordered list of records plus the directory their paths are relative to."""

    records: list[ManifestRecord]
    name: str = ""
    root: Path | None = field(default=None, compare=False)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        owner: dict[str, str] = {}
        for rec in self.records:
            if rec.split == "train" and rec.label != "normal":
                raise ManifestError(f"train record {rec.path!r} must be labeled normal")
            if rec.split == "unassigned":
                continue
            prev = owner.setdefault(rec.patient_id, rec.split)
            if prev != rec.split:
                raise ManifestError(
                    f"patient {rec.patient_id!r} appears in splits {prev!r} and {rec.split!r}"
                )

    def select(self, split: str, label: str | None = None) -> list[ManifestRecord]:
        return [
            r for r in self.records
            if r.split == split and (label is None or r.label == label)
        ]

    def patient_ids(self) -> list[str]:
        return list(dict.fromkeys(r.patient_id for r in self.records))

    def resolve(self, record: ManifestRecord) -> Path:
        p = Path(record.path)
        if not p.is_absolute() and self.root is not None:
            p = self.root / p
        return p

    def load(self, records) -> list[Patch]:
        return [read_patch(self.resolve(r)) for r in records]

    def with_splits(self, splits: dict[str, str]) -> "Dataset":
        """Copy with each record's split replaced by ``splits[patient_id]``."""
        recs = [replace(r, split=splits[r.patient_id]) for r in self.records]
        return Dataset(recs, name=self.name, root=self.root)


def parse_manifest(text: str, name: str = "", root=None) -> Dataset:
    rows = csv.reader(io.StringIO(text))
    records = []
    saw_header = False
    for lineno, row in enumerate(rows, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if not saw_header:
            if tuple(row) != HEADER:
                raise ManifestError(f"expected header {','.join(HEADER)!r}", line=lineno)
            saw_header = True
            continue
        if tuple(row) == HEADER:
            raise ManifestError("duplicate header", line=lineno)
        if len(row) != 4:
            raise ManifestError(f"expected 4 fields, got {len(row)}", line=lineno)
        path, label, pid, split = row
        if label not in LABELS:
            raise ManifestError(f"unknown label {label!r}", line=lineno)
        if split not in SPLITS:
            raise ManifestError(f"unknown split {split!r}", line=lineno)
        if split == "train" and label != "normal":
            raise ManifestError(f"train record {path!r} is labeled {label!r}", line=lineno)
        records.append(ManifestRecord(path, label, pid, split))
    if not saw_header:
        raise ManifestError("empty manifest: missing header", line=1)
    return Dataset(records, name=name, root=None if root is None else Path(root))


def load_manifest(path) -> Dataset:
    path = Path(path)
    text = path.read_bytes().decode("utf-8")
    return parse_manifest(text, name=path.stem, root=path.parent)


def format_manifest(dataset: Dataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in dataset.records:
        w.writerow((r.path, r.label, r.patient_id, r.split))
    return buf.getvalue()


def write_manifest(dataset: Dataset, path) -> None:
    Path(path).write_bytes(format_manifest(dataset).encode("utf-8"))
