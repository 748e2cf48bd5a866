import numpy as np
import pytest

from adkit.data import Dataset, ManifestRecord, split_by_patient
from adkit.exceptions import InfeasibleSplitError


def random_manifest(rng, n_patients):
    records = []
    for p in range(n_patients):
        abnormal_patient = rng.random() < 0.3
        for i in range(int(rng.integers(1, 6))):
            label = "abnormal" if abnormal_patient and rng.random() < 0.6 else "normal"
            records.append(ManifestRecord(f"p{p}_{i}.pgm", label, f"p{p}", "unassigned"))
    return Dataset(records)


class TestSplitByPatient:
    def test_no_patient_crosses_splits_on_random_manifests(self, rng):
        for trial in range(100):
            ds = random_manifest(rng, int(rng.integers(3, 30)))
            try:
                out = split_by_patient(ds, (0.6, 0.2, 0.2), seed=trial)
            except InfeasibleSplitError:
                continue
            owner = {}
            for r in out.records:
                assert owner.setdefault(r.patient_id, r.split) == r.split
                assert r.split in ("train", "val", "test")
                if r.split == "train":
                    assert r.label == "normal"
            assert len(out.records) == len(ds.records)

    def test_deterministic(self, rng):
        ds = random_manifest(rng, 20)
        a = split_by_patient(ds, (0.6, 0.2, 0.2), seed=5)
        b = split_by_patient(ds, (0.6, 0.2, 0.2), seed=5)
        assert [r.split for r in a.records] == [r.split for r in b.records]

    def test_every_nonzero_split_filled(self, rng):
        ds = random_manifest(rng, 12)
        out = split_by_patient(ds, (0.5, 0.25, 0.25), seed=1)
        assert {r.split for r in out.records} == {"train", "val", "test"}

    def test_ratios_approximately_respected(self):
        ds = Dataset([ManifestRecord(f"{i}.pgm", "normal", f"p{i}", "unassigned") for i in range(100)])
        out = split_by_patient(ds, (0.6, 0.2, 0.2), seed=0)
        counts = {s: len(out.select(s)) for s in ("train", "val", "test")}
        assert counts == {"train": 60, "val": 20, "test": 20}

    def test_too_few_patients(self):
        ds = Dataset([ManifestRecord("a.pgm", "normal", "p1", "unassigned")])
        with pytest.raises(InfeasibleSplitError):
            split_by_patient(ds, (0.6, 0.2, 0.2), seed=0)

    @pytest.mark.parametrize("ratios", [(0.5, 0.5), (0.7, 0.2, 0.2), (-0.1, 0.6, 0.5)])
    def test_bad_ratios(self, ratios):
        ds = Dataset([ManifestRecord(f"{i}", "normal", f"p{i}", "unassigned") for i in range(5)])
        with pytest.raises(ValueError):
            split_by_patient(ds, ratios, seed=0)
