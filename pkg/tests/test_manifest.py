import pytest

from adkit.data import Dataset, ManifestRecord, format_manifest, load_manifest, parse_manifest
from adkit.exceptions import ManifestError

HEADER = "path,label,patient_id,split\n"


class TestParseManifest:
    def test_round_trip(self):
        text = HEADER + "a.pgm,normal,p1,train\nb.pgm,abnormal,p2,test\n"
        ds = parse_manifest(text)
        assert [r.path for r in ds.records] == ["a.pgm", "b.pgm"]
        assert format_manifest(ds) == text

    def test_blank_lines_skipped(self):
        ds = parse_manifest(HEADER + "\na.pgm,normal,p1,train\n\n")
        assert len(ds.records) == 1

    @pytest.mark.parametrize(
        "body, line, msg",
        [
            ("a.pgm,weird,p1,train\n", 2, "unknown label"),
            ("a.pgm,normal,p1,holdout\n", 2, "unknown split"),
            ("a.pgm,normal,p1,train\n" + HEADER, 3, "duplicate header"),
            ("a.pgm,abnormal,p1,train\n", 2, "train record"),
            ("a.pgm,normal,p1\n", 2, "expected 4 fields"),
        ],
    )
    def test_errors_carry_line_numbers(self, body, line, msg):
        with pytest.raises(ManifestError, match=f"line {line}: .*{msg}"):
            parse_manifest(HEADER + body)

    def test_missing_header(self):
        with pytest.raises(ManifestError):
            parse_manifest("a.pgm,normal,p1,train\n")

    def test_patient_in_two_splits(self):
        with pytest.raises(ManifestError, match="patient 'p1'"):
            parse_manifest(HEADER + "a.pgm,normal,p1,train\nb.pgm,normal,p1,val\n")

    def test_load_resolves_relative_to_manifest(self, tmp_path):
        (tmp_path / "m.csv").write_text(HEADER + "x/a.pgm,normal,p1,train\n")
        ds = load_manifest(tmp_path / "m.csv")
        assert ds.resolve(ds.records[0]) == tmp_path / "x" / "a.pgm"


class TestDataset:
    def test_select_filters(self):
        ds = Dataset([
            ManifestRecord("a", "normal", "p1", "train"),
            ManifestRecord("b", "normal", "p2", "val"),
            ManifestRecord("c", "abnormal", "p2", "val"),
        ])
        assert [r.path for r in ds.select("val")] == ["b", "c"]
        assert [r.path for r in ds.select("val", "abnormal")] == ["c"]
        assert ds.patient_ids() == ["p1", "p2"]
