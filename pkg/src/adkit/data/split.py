"""Patient-wise train/val/test assignment."""

from __future__ import annotations

import math

from .._rng import Xoshiro256
from ..exceptions import InfeasibleSplitError
from .manifest import Dataset

_SPLITS = ("train", "val", "test")


def split_by_patient(dataset: Dataset, ratios, seed: int) -> Dataset:
    """Assign whole patients to train/val/test, approximating ``ratios`` by record count.

    Patients are shuffled with the seeded generator, then each goes to the
    permitted split with the largest remaining record deficit (ties resolved in
    train, val, test order). Patients owning any abnormal record are never
    placed in train. When the patients left are only just enough to give every
    nonzero-ratio split one patient, they are routed to the empty splits.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 or not math.isfinite(r) for r in ratios):
        raise ValueError("ratios must be three nonnegative reals")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)!r}")
    if any(r.split != "unassigned" for r in dataset.records):
        raise ValueError("split_by_patient expects every record to be unassigned")

    groups: dict[str, list] = {}
    for rec in dataset.records:
        groups.setdefault(rec.patient_id, []).append(rec)
    order = list(groups)
    active = [k for k in range(3) if ratios[k] > 0]
    if len(order) < len(active):
        raise InfeasibleSplitError(
            f"{len(order)} patient(s) cannot fill {len(active)} nonzero splits"
        )

    Xoshiro256(seed).shuffle(order)
    total = len(dataset.records)
    targets = [r * total for r in ratios]
    filled = [0, 0, 0]
    n_patients = [0, 0, 0]
    assignment: dict[str, str] = {}
    for i, pid in enumerate(order):
        recs = groups[pid]
        allowed = [k for k in active if not (k == 0 and any(r.label != "normal" for r in recs))]
        empty = [k for k in active if n_patients[k] == 0]
        remaining = len(order) - i
        if remaining <= len(empty):
            allowed = [k for k in allowed if k in empty]
        if not allowed:
            raise InfeasibleSplitError(
                f"no admissible split for patient {pid!r} (abnormal patients cannot train)"
            )
        best = max(allowed, key=lambda k: (targets[k] - filled[k], -k))
        assignment[pid] = _SPLITS[best]
        filled[best] += len(recs)
        n_patients[best] += 1
    return dataset.with_splits(assignment)
