import json

import numpy as np
import pytest

from adkit.evaluation import (
    AucResult,
    ResultTable,
    emit_report,
    format_report,
    format_roc_csv,
    rank_methods,
    roc_auc,
    roc_curve,
)
from oracles import brute_force_auc, trapezoid_area


def tied_instances(n_instances=200, seed=7):
    rng = np.random.default_rng(seed)
    for _ in range(n_instances):
        n, m = rng.integers(1, 51, size=2)
        levels = rng.integers(2, 12)  # few distinct values forces ties
        yield rng.integers(0, levels, n) / 4.0, rng.integers(0, levels, m) / 4.0 + rng.integers(0, 2)


class TestRocAuc:
    @pytest.mark.parametrize(
        "normal, abnormal, want",
        [([0.1, 0.2], [0.8, 0.9], 1.0), ([0.9], [0.1], 0.0), ([1, 2], [2, 3], 0.875)],
    )
    def test_examples(self, normal, abnormal, want):
        assert roc_auc(normal, abnormal).auc == want

    def test_counts(self):
        assert roc_auc([1, 2, 3], [4]) == AucResult(1.0, 3, 1)

    def test_matches_brute_force(self):
        for n, a in tied_instances():
            assert abs(roc_auc(n, a).auc - brute_force_auc(n, a)) <= 1e-12

    def test_label_swap_antisymmetry(self):
        for n, a in tied_instances(50):
            assert abs(roc_auc(n, a).auc + roc_auc(a, n).auc - 1.0) <= 1e-12

    def test_monotone_transform_invariance(self):
        for n, a in tied_instances(50):
            f = lambda s: np.exp(3 * s) + 7  # noqa: E731
            assert roc_auc(f(n), f(a)).auc == pytest.approx(roc_auc(n, a).auc, abs=1e-12)

    @pytest.mark.parametrize("normal, abnormal", [([], [1.0]), ([1.0], []), ([np.nan], [1.0])])
    def test_invalid(self, normal, abnormal):
        with pytest.raises(ValueError):
            roc_auc(normal, abnormal)


class TestRocCurve:
    def test_area_matches_auc(self):
        for n, a in tied_instances():
            _, fpr, tpr = roc_curve(n, a)
            assert abs(trapezoid_area(fpr, tpr) - roc_auc(n, a).auc) <= 1e-12

    def test_staircase_shape(self):
        for n, a in tied_instances(30):
            _, fpr, tpr = roc_curve(n, a)
            assert (fpr[0], tpr[0]) == (0.0, 0.0) and (fpr[-1], tpr[-1]) == (1.0, 1.0)
            assert np.all(np.diff(fpr) >= 0) and np.all(np.diff(tpr) >= 0)

    def test_perfect_separation_hits_corner(self):
        _, fpr, tpr = roc_curve([0.1, 0.2], [0.8, 0.9])
        assert any(f == 0.0 and t == 1.0 for f, t in zip(fpr, tpr))

    def test_constant_scores(self):
        _, fpr, tpr = roc_curve([1.0, 1.0], [1.0])
        assert list(zip(fpr, tpr)) == [(0.0, 0.0), (1.0, 1.0)]

    def test_csv(self):
        text = format_roc_csv(*roc_curve([0.0], [1.0]))
        assert text.splitlines() == ["threshold,fpr,tpr", "inf,0.0,0.0", "1.0,0.0,1.0", "0.0,1.0,1.0"]


def table_2x2():
    t = ResultTable(["A", "B"], ["c1", "c2"])
    t.set("A", "c1", 0.9)
    t.set("B", "c1", 0.8)
    t.set("A", "c2", 0.5)
    t.set("B", "c2", 0.7)
    return t


class TestRanking:
    def test_descending(self):
        ranks = rank_methods(table_2x2())
        assert ranks["c1"] == {"A": 1, "B": 2}
        assert ranks["c2"] == {"A": 2, "B": 1}

    def test_ties_share_minimum(self):
        t = ResultTable(["A", "B", "C"], ["c"])
        for r, v in zip("ABC", [0.9, 0.9, 0.8]):
            t.set(r, "c", v)
        assert rank_methods(t)["c"] == {"A": 1, "B": 1, "C": 3}

    def test_incomplete(self):
        t = ResultTable(["A", "B"], ["c"])
        t.set("A", "c", 0.5)
        with pytest.raises(ValueError, match="missing cell"):
            rank_methods(t)


class TestReports:
    def test_csv_layout(self):
        lines = format_report(table_2x2(), "csv").splitlines()
        assert lines[0] == "method,c1,c2,average"
        assert lines[1] == "A,0.900000,0.500000,0.700000"
        assert all(len(line.split(",")) == 4 for line in lines)

    def test_oracle_flag_and_notes(self):
        t = ResultTable(["A"], ["last_epoch", "complete_validation"], flags={"complete_validation": "oracle"},
                        row_notes={"A": "n/a"})
        t.set("A", "last_epoch", 0.5)
        t.set("A", "complete_validation", 0.6)
        header = format_report(t, "csv").splitlines()[0]
        assert header == "method,last_epoch,complete_validation[oracle],average,note"
        doc = json.loads(format_report(t, "json"))
        assert doc["columns"][1] == {"name": "complete_validation", "flag": "oracle"}
        assert doc["rows"][0]["note"] == "n/a"

    def test_json_contents(self):
        doc = json.loads(format_report(table_2x2(), "json"))
        row = doc["rows"][1]
        assert row["method"] == "B" and row["rank"] == {"c1": 2, "c2": 1}
        assert row["average"] == pytest.approx(0.75)

    def test_deterministic_files(self, tmp_path):
        for fmt in ("csv", "json"):
            emit_report(table_2x2(), fmt, tmp_path / f"a.{fmt}")
            emit_report(table_2x2(), fmt, tmp_path / f"b.{fmt}")
            assert (tmp_path / f"a.{fmt}").read_bytes() == (tmp_path / f"b.{fmt}").read_bytes()

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            format_report(table_2x2(), "xml")

    def test_unknown_cell(self):
        with pytest.raises(KeyError):
            table_2x2().set("Z", "c1", 0.5)
