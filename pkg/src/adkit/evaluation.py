"""ROC-AUC with tie correction, ROC curves, method ranking and report files."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

from ._validation import as_score_vector


@dataclass(frozen=True)
class AucResult:
    auc: float
    n_normal: int
    n_abnormal: int


def roc_auc(normal_scores, abnormal_scores) -> AucResult:
    """Probability that an abnormal sample outscores a normal one, ties counted 1/2.

    Computed from midranks of the pooled scores (the Mann-Whitney U statistic),
    which matches the pairwise count exactly because midranks are half-integers.
    """
    n = as_score_vector(normal_scores, "normal_scores")
    a = as_score_vector(abnormal_scores, "abnormal_scores")
    ranks = rankdata(np.concatenate([n, a]), method="average")
    u = ranks[n.size :].sum() - a.size * (a.size + 1) / 2.0
    return AucResult(float(u / (n.size * a.size)), int(n.size), int(a.size))


def roc_curve(normal_scores, abnormal_scores):
    """ROC staircase as ``(thresholds, fpr, tpr)``.

    The first point is (0, 0) at threshold +inf; each following point predicts
    "abnormal" for scores >= the threshold, one point per distinct score.
    """
    n = as_score_vector(normal_scores, "normal_scores")
    a = as_score_vector(abnormal_scores, "abnormal_scores")
    thresholds = np.unique(np.concatenate([n, a]))[::-1]
    n_sorted = np.sort(n)
    a_sorted = np.sort(a)
    fp = n.size - np.searchsorted(n_sorted, thresholds, side="left")
    tp = a.size - np.searchsorted(a_sorted, thresholds, side="left")
    fpr = np.concatenate([[0.0], fp / n.size])
    tpr = np.concatenate([[0.0], tp / a.size])
    return np.concatenate([[np.inf], thresholds]), fpr, tpr


def format_roc_csv(thresholds, fpr, tpr) -> str:
    lines = ["threshold,fpr,tpr"]
    for t, f, p in zip(thresholds, fpr, tpr):
        lines.append(f"{_num(t)},{_num(f)},{_num(p)}")
    return "\n".join(lines) + "\n"


@dataclass
class ResultTable:
    """Grid of AUC cells: ``rows`` (methods) by ``columns`` (cohorts or strategies).

    ``flags`` marks columns that need a caveat in reports; the complete
    validation strategy is flagged ``"oracle"`` because it reads abnormal data.
    """

    rows: list[str]
    columns: list[str]
    cells: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    row_notes: dict = field(default_factory=dict)

    def set(self, row, column, value) -> None:
        if row not in self.rows or column not in self.columns:
            raise KeyError(f"unknown cell ({row!r}, {column!r})")
        if not isinstance(value, AucResult):
            value = AucResult(float(value), 0, 0)
        self.cells[(row, column)] = value

    def get(self, row, column) -> AucResult:
        try:
            return self.cells[(row, column)]
        except KeyError:
            raise ValueError(f"missing cell ({row!r}, {column!r})") from None

    def check_complete(self) -> None:
        for r in self.rows:
            for c in self.columns:
                self.get(r, c)

    def average(self, row) -> float:
        return float(np.mean([self.get(row, c).auc for c in self.columns]))


def rank_methods(table: ResultTable) -> dict:
    """Per column, competition ranks by descending AUC (ties share the minimum rank)."""
    table.check_complete()
    ranks = {}
    for c in table.columns:
        aucs = {r: table.get(r, c).auc for r in table.rows}
        ranks[c] = {r: 1 + sum(v > aucs[r] for v in aucs.values()) for r in table.rows}
    return ranks


def _num(x: float) -> str:
    return repr(float(x))


def _column_header(table: ResultTable, column: str) -> str:
    flag = table.flags.get(column)
    return f"{column}[{flag}]" if flag else column


def format_report(table: ResultTable, fmt: str) -> str:
    table.check_complete()
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        header = ["method", *(_column_header(table, c) for c in table.columns), "average"]
        if table.row_notes:
            header.append("note")
        w.writerow(header)
        for r in table.rows:
            row = [r, *(f"{table.get(r, c).auc:.6f}" for c in table.columns), f"{table.average(r):.6f}"]
            if table.row_notes:
                row.append(table.row_notes.get(r, ""))
            w.writerow(row)
        return buf.getvalue()
    if fmt == "json":
        ranks = rank_methods(table)
        doc = {
            "columns": [
                {"name": c, **({"flag": table.flags[c]} if c in table.flags else {})}
                for c in table.columns
            ],
            "rows": [
                {
                    "method": r,
                    "auc": {c: table.get(r, c).auc for c in table.columns},
                    "average": table.average(r),
                    "rank": {c: ranks[c][r] for c in table.columns},
                    **({"note": table.row_notes[r]} if r in table.row_notes else {}),
                }
                for r in table.rows
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    raise ValueError(f"unknown report format {fmt!r} (expected 'csv' or 'json')")


def emit_report(table: ResultTable, fmt: str, path) -> None:
    """Write ``table`` as CSV (methods x columns + average) or JSON."""
    text = format_report(table, fmt)
    Path(path).write_bytes(text.encode("utf-8"))
