"""Config-driven experiment pipeline with resumable stages and an abnormal-access audit.

Stages run in a fixed order and each consumes the artifacts of the previous
one. ``ledger.json`` in the output directory records the config hash and the
completed stages, so a finished stage is skipped on rerun and a stage whose
predecessor has not finished raises :class:`~adkit.exceptions.DependencyError`.

Output layout::

    ledger.json                  config hash and stage completion markers
    config.txt                   normalized settings the hash is taken over
    audit.csv                    every abnormal-record access (all stages)
    audit/<stage>.csv            the same, per stage
    data/<cohort>/seed<s>/       manifest.csv (+ patches/ for synthetic cohorts)
    stores/<cohort>/seed<s>/<detector>/
                                 checkpoints and validation-normal scores
    selection/<cohort>/seed<s>/<detector>.csv
                                 chosen epoch per strategy
    scores/<cohort>/seed<s>/<detector>/<strategy>.csv
                                 test scores; <strategy>.normal.csv holds the
                                 matching validation-normal scores
    ensemble/<cohort>/seed<s>/<strategy>/<detector>.csv, combined.csv
    evaluation/results.csv       one AUC per (cohort, seed, method, strategy)
    evaluation/roc/<cohort>/seed<s>/<method>/<strategy>.csv
    reports/                     per-cohort and per-strategy tables, ranks

Audit rows carry a ``phase``: ``evaluation`` for reads of the test split and
``validation`` for the abnormal validation reads of the complete-validation
strategy. A run without that strategy therefore logs evaluation rows only.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import shutil
from collections import defaultdict
from pathlib import Path

import numpy as np

from ._rng import derive_seed
from .config import RunConfig
from .data.manifest import Dataset, load_manifest, write_manifest
from .data.split import split_by_patient
from .data.synthetic import generate_synthetic_cohort
from .ensemble import average_ensemble, format_combined_table, format_member_table, make_member
from .evaluation import AucResult, ResultTable, format_report, format_roc_csv, rank_methods, roc_auc, roc_curve
from .exceptions import AdkitError, DependencyError, ManifestError, StageError
from .selection import (
    SelectionStrategy,
    load_store,
    sample_wise_normal_scores,
    sample_wise_scores,
    save_store,
    select,
    train_with_checkpoints,
)

log = logging.getLogger(__name__)

STAGES = ("generate-data", "train", "select", "score", "ensemble", "evaluate", "report")
AUDIT_HEADER = ("phase", "stage", "cohort", "seed", "split", "path")
ENSEMBLE = "ensemble"
SINGLE_CHECKPOINT_NOTE = "not applicable: single checkpoint"


class RunLedger:
    """Config hash plus per-stage completion markers, persisted as JSON."""

    def __init__(self, path, config_hash: str, stages=None):
        self.path = Path(path)
        self.config_hash = config_hash
        self.stages: dict[str, list[str]] = dict(stages or {})

    @classmethod
    def open(cls, path, config_hash: str) -> "RunLedger":
        path = Path(path)
        if not path.exists():
            return cls(path, config_hash)
        doc = json.loads(path.read_text(encoding="utf-8"))
        if doc.get("config_hash") != config_hash:
            raise AdkitError(
                f"{path.parent} holds a run for a different config "
                f"(hash {doc.get('config_hash', '?')[:12]}); use another output directory"
            )
        return cls(path, config_hash, doc.get("stages"))

    def is_complete(self, stage: str) -> bool:
        return stage in self.stages

    def mark(self, stage: str, artifacts) -> None:
        self.stages[stage] = sorted(artifacts)
        self.save()

    def save(self) -> None:
        doc = {"config_hash": self.config_hash, "stages": self.stages}
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue().encode("utf-8")


def _read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


class Pipeline:
    """Runs the stages of one config into one output directory."""

    def __init__(self, config: RunConfig, out_dir=None):
        self.config = config
        out = out_dir if out_dir is not None else (config.output or "adkit-out")
        self.out = Path(out)
        self.ledger = RunLedger.open(self.out / "ledger.json", config.hash())
        self._audit: list[tuple] = []
        self._artifacts: set[str] = set()

    # ---------------------------------------------------------------- driver

    def run(self, stages=STAGES) -> None:
        for stage in stages:
            self.run_stage(stage)

    def run_stage(self, stage: str) -> bool:
        """Run ``stage`` unless already complete; returns whether it ran."""
        if stage not in STAGES:
            raise ValueError(f"unknown stage {stage!r}")
        if self.ledger.is_complete(stage):
            log.info("stage %s already complete, skipping", stage)
            return False
        for prev in STAGES[: STAGES.index(stage)]:
            if not self.ledger.is_complete(prev):
                raise DependencyError(stage, prev)
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / "config.txt").write_text(self.config.canonical_text(), encoding="utf-8")
        self._audit = []
        self._artifacts = set()
        log.info("stage %s", stage)
        getattr(self, "_stage_" + stage.replace("-", "_"))()
        self._write_audit(stage)
        self.ledger.mark(stage, self._artifacts)
        return True

    def _units(self):
        for cohort in self.config.cohorts:
            for seed in self.config.seeds:
                yield cohort, seed

    def _guard(self, stage, context):
        return _StageGuard(stage, context)

    # ----------------------------------------------------------------- paths

    def _data_dir(self, cohort, seed) -> Path:
        return self.out / "data" / cohort / f"seed{seed}"

    def _store_dir(self, cohort, seed, det) -> Path:
        return self.out / "stores" / cohort / f"seed{seed}" / det

    def _selection_path(self, cohort, seed, det) -> Path:
        return self.out / "selection" / cohort / f"seed{seed}" / f"{det}.csv"

    def _score_path(self, cohort, seed, det, strategy, normal=False) -> Path:
        suffix = ".normal.csv" if normal else ".csv"
        return self.out / "scores" / cohort / f"seed{seed}" / det / f"{strategy}{suffix}"

    def _write(self, path: Path, data: bytes) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self._artifacts.add(path.relative_to(self.out).as_posix())

    def _track(self, path: Path) -> None:
        self._artifacts.add(path.relative_to(self.out).as_posix())

    # ----------------------------------------------------------- data access

    def _dataset(self, cohort, seed) -> Dataset:
        return load_manifest(self._data_dir(cohort, seed) / "manifest.csv")

    def _load(self, ds: Dataset, records, stage, phase, cohort, seed):
        for r in records:
            if r.label == "abnormal":
                self._audit.append((phase, stage, cohort, seed, r.split, r.path))
        return ds.load(records)

    def _write_audit(self, stage) -> None:
        audit_dir = self.out / "audit"
        self._write(audit_dir / f"{stage}.csv", _csv_bytes(AUDIT_HEADER, self._audit))
        rows = []
        for s in STAGES:
            p = audit_dir / f"{s}.csv"
            if p.exists():
                rows.extend(tuple(r[h] for h in AUDIT_HEADER) for r in _read_csv(p))
        (self.out / "audit.csv").write_bytes(_csv_bytes(AUDIT_HEADER, rows))

    # ---------------------------------------------------------------- stages

    def _stage_generate_data(self):
        cfg = self.config
        for cohort, seed in self._units():
            out = self._data_dir(cohort.name, seed)
            with self._guard("generate-data", f"cohort {cohort.name}, seed {seed}"):
                if out.exists():
                    shutil.rmtree(out)
                if cohort.synthetic:
                    c = cohort.counts
                    generate_synthetic_cohort(
                        cohort.kind, c["n_train"], c["n_val_normal"], c["n_val_abnormal"],
                        c["n_test_normal"], c["n_test_abnormal"], side=cfg.side,
                        seed=derive_seed(seed, "data", cohort.name), out_dir=out, name=cohort.name,
                    )
                else:
                    ds = load_manifest(cfg.manifest_path(cohort))
                    if any(r.split == "unassigned" for r in ds.records):
                        ds = split_by_patient(ds, cohort.ratios, derive_seed(seed, "split", cohort.name))
                    labels = {r.label for r in ds.select("test")}
                    if labels != {"normal", "abnormal"}:
                        raise ManifestError("test split needs both normal and abnormal records")
                    if not ds.select("train"):
                        raise ManifestError("train split is empty")
                    absolute = Dataset(
                        [type(r)(str(ds.resolve(r).resolve()), r.label, r.patient_id, r.split)
                         for r in ds.records],
                        name=cohort.name,
                    )
                    out.mkdir(parents=True, exist_ok=True)
                    write_manifest(absolute, out / "manifest.csv")
            self._track(out)

    def _stage_train(self):
        cfg = self.config
        for cohort, seed in self._units():
            ctx = f"cohort {cohort.name}, seed {seed}"
            with self._guard("train", ctx):
                ds = self._dataset(cohort.name, seed)
                val_records = ds.select("val", "normal")
                X = self._load(ds, ds.select("train"), "train", "training", cohort.name, seed)
                V = self._load(ds, val_records, "train", "training", cohort.name, seed)
            for det in cfg.detectors:
                with self._guard("train", f"{ctx}, detector {det.id}"):
                    store = train_with_checkpoints(
                        det.kind, X, V, det.epochs, det.cadence, config=det.params,
                        seed=derive_seed(seed, "detector", det.id), side=cfg.side,
                    )
                    d = self._store_dir(cohort.name, seed, det.id)
                    save_store(store, d, sample_paths=[r.path for r in val_records])
                self._track(d)

    def _stage_select(self):
        cfg = self.config
        oracle = SelectionStrategy.complete_validation.value in cfg.strategies
        for cohort, seed in self._units():
            ctx = f"cohort {cohort.name}, seed {seed}"
            with self._guard("select", ctx):
                ds = self._dataset(cohort.name, seed)
                if oracle:
                    V = self._load(ds, ds.select("val", "normal"), "select", "validation", cohort.name, seed)
                    A = self._load(ds, ds.select("val", "abnormal"), "select", "validation", cohort.name, seed)
            for det in cfg.detectors:
                rows = []
                with self._guard("select", f"{ctx}, detector {det.id}"):
                    store = load_store(self._store_dir(cohort.name, seed, det.id))
                    for strategy in cfg.strategies:
                        if strategy == SelectionStrategy.sample_wise.value:
                            rows.append((strategy, "per_sample"))
                        elif strategy == SelectionStrategy.complete_validation.value:
                            rows.append((strategy, select(store, strategy, V, A).epoch))
                        else:
                            rows.append((strategy, select(store, strategy).epoch))
                self._write(self._selection_path(cohort.name, seed, det.id), _csv_bytes(("strategy", "epoch"), rows))

    def _stage_score(self):
        cfg = self.config
        for cohort, seed in self._units():
            ctx = f"cohort {cohort.name}, seed {seed}"
            with self._guard("score", ctx):
                ds = self._dataset(cohort.name, seed)
                test = ds.select("test")
                val_paths = [r.path for r in ds.select("val", "normal")]
                T = self._load(ds, test, "score", "evaluation", cohort.name, seed)
            for det in cfg.detectors:
                with self._guard("score", f"{ctx}, detector {det.id}"):
                    store = load_store(self._store_dir(cohort.name, seed, det.id))
                    chosen = {
                        r["strategy"]: r["epoch"]
                        for r in _read_csv(self._selection_path(cohort.name, seed, det.id))
                    }
                    for strategy in cfg.strategies:
                        if strategy == SelectionStrategy.sample_wise.value:
                            scores, epochs = sample_wise_scores(store, T, side=cfg.side)
                            normal = sample_wise_normal_scores(store)
                        else:
                            record = store.record(int(chosen[strategy]))
                            scores = record.detector().anomaly_score(T)
                            epochs = np.full(len(test), record.epoch)
                            normal = record.normal_val_scores
                        self._write(
                            self._score_path(cohort.name, seed, det.id, strategy),
                            _csv_bytes(
                                ("sample_path", "label", "score", "epoch"),
                                [(r.path, r.label, repr(float(s)), int(e))
                                 for r, s, e in zip(test, scores, epochs)],
                            ),
                        )
                        self._write(
                            self._score_path(cohort.name, seed, det.id, strategy, normal=True),
                            _csv_bytes(("sample_path", "score"),
                                       [(p, repr(float(s))) for p, s in zip(val_paths, normal)]),
                        )

    def _read_scores(self, cohort, seed, det, strategy):
        rows = _read_csv(self._score_path(cohort, seed, det, strategy))
        normal = _read_csv(self._score_path(cohort, seed, det, strategy, normal=True))
        return (
            [r["sample_path"] for r in rows],
            [r["label"] for r in rows],
            np.array([float(r["score"]) for r in rows]),
            np.array([float(r["score"]) for r in normal]),
        )

    def _ensemble_dir(self, cohort, seed, strategy) -> Path:
        return self.out / "ensemble" / cohort / f"seed{seed}" / strategy

    def _stage_ensemble(self):
        cfg = self.config
        for cohort, seed in self._units():
            for strategy in cfg.strategies:
                ctx = f"cohort {cohort.name}, seed {seed}, strategy {strategy}"
                d = self._ensemble_dir(cohort.name, seed, strategy)
                members = []
                for det_id in cfg.ensemble_members:
                    with self._guard("ensemble", f"{ctx}, member {det_id}"):
                        paths, labels, raw, normal = self._read_scores(cohort.name, seed, det_id, strategy)
                        member = make_member(det_id, raw, normal)
                    members.append(member)
                    self._write(d / f"{det_id}.csv", format_member_table(paths, labels, member).encode("utf-8"))
                with self._guard("ensemble", ctx):
                    combined = average_ensemble(members).combined
                self._write(d / "combined.csv", format_combined_table(paths, labels, combined).encode("utf-8"))

    def _stage_evaluate(self):
        cfg = self.config
        results = []
        for cohort, seed in self._units():
            for strategy in cfg.strategies:
                sources = [
                    (det.id, self._score_path(cohort.name, seed, det.id, strategy))
                    for det in cfg.detectors
                ]
                sources.append((ENSEMBLE, self._ensemble_dir(cohort.name, seed, strategy) / "combined.csv"))
                for method, path in sources:
                    with self._guard("evaluate", f"cohort {cohort.name}, seed {seed}, {method}/{strategy}"):
                        rows = _read_csv(path)
                        s = np.array([float(r["score"]) for r in rows])
                        lab = np.array([r["label"] == "abnormal" for r in rows])
                        res = roc_auc(s[~lab], s[lab])
                        roc = roc_curve(s[~lab], s[lab])
                    results.append(
                        (cohort.name, seed, method, strategy, repr(res.auc), res.n_normal, res.n_abnormal)
                    )
                    roc_path = self.out / "evaluation" / "roc" / cohort.name / f"seed{seed}" / method / f"{strategy}.csv"
                    self._write(roc_path, format_roc_csv(*roc).encode("utf-8"))
        self._write(
            self.out / "evaluation" / "results.csv",
            _csv_bytes(("cohort", "seed", "method", "strategy", "auc", "n_normal", "n_abnormal"), results),
        )

    def results(self) -> list[dict]:
        path = self.out / "evaluation" / "results.csv"
        if not path.exists():
            raise DependencyError("report", "evaluate")
        return _read_csv(path)

    def _stage_report(self):
        cfg = self.config
        tables = build_tables(cfg, self.results())
        for name, table in tables.items():
            for fmt in cfg.report_formats:
                self._write(self.out / "reports" / f"{name}.{fmt}", format_report(table, fmt).encode("utf-8"))
        rank_rows = []
        for name, table in tables.items():
            if not name.startswith("table2"):
                continue
            for column, ranks in rank_methods(table).items():
                for method in table.rows:
                    rank_rows.append((name, column, method, ranks[method]))
        self._write(self.out / "reports" / "ranks.csv", _csv_bytes(("table", "cohort", "method", "rank"), rank_rows))

    def table(self, name: str = "table2") -> ResultTable:
        return build_tables(self.config, self.results())[name]


class _StageGuard:
    """Re-raises failures inside a stage as :class:`StageError` with context."""

    def __init__(self, stage, context):
        self.stage, self.context = stage, context

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is None or isinstance(exc, (StageError, DependencyError)):
            return False
        if isinstance(exc, (AdkitError, ValueError, ArithmeticError, OSError, KeyError)):
            raise StageError(self.stage, self.context, exc) from exc
        return False


def build_tables(config: RunConfig, results) -> dict[str, ResultTable]:
    """Aggregate evaluation rows into the report tables.

    ``table2_seed<s>`` and ``table2`` (seed mean) put methods against cohorts
    using ``ensemble.strategy``. ``table3`` puts methods against strategies,
    averaged over cohorts and seeds; ``table3_<cohort>`` averages over seeds.
    """
    cells = defaultdict(list)
    for r in results:
        key = (r["cohort"], int(r["seed"]), r["method"], r["strategy"])
        cells[key].append(AucResult(float(r["auc"]), int(r["n_normal"]), int(r["n_abnormal"])))
    methods = [d.id for d in config.detectors] + [ENSEMBLE]
    cohorts = [c.name for c in config.cohorts]
    notes = {d.id: SINGLE_CHECKPOINT_NOTE for d in config.detectors if d.kind == "latent_gaussian"}
    flags = {"complete_validation": "oracle"}

    def mean(keys) -> AucResult:
        got = [cells[k][0] for k in keys if cells.get(k)]
        if len(got) != len(keys):
            raise DependencyError("report", "evaluate")
        return AucResult(
            float(np.mean([g.auc for g in got])),
            sum(g.n_normal for g in got),
            sum(g.n_abnormal for g in got),
        )

    tables = {}
    strat = config.ensemble_strategy
    for seed in config.seeds:
        t = ResultTable(methods, cohorts)
        for m in methods:
            for c in cohorts:
                t.set(m, c, mean([(c, seed, m, strat)]))
        tables[f"table2_seed{seed}"] = t
    t = ResultTable(methods, cohorts)
    for m in methods:
        for c in cohorts:
            t.set(m, c, mean([(c, s, m, strat) for s in config.seeds]))
    tables["table2"] = t

    strategies = list(config.strategies)
    t = ResultTable(methods, strategies, flags=dict(flags), row_notes=dict(notes))
    for m in methods:
        for st in strategies:
            t.set(m, st, mean([(c, s, m, st) for c in cohorts for s in config.seeds]))
    tables["table3"] = t
    for c in cohorts:
        t = ResultTable(methods, strategies, flags=dict(flags), row_notes=dict(notes))
        for m in methods:
            for st in strategies:
                t.set(m, st, mean([(c, s, m, st) for s in config.seeds]))
        tables[f"table3_{c}"] = t
    return tables


def run_pipeline(config: RunConfig, out_dir=None) -> ResultTable:
    """Run every stage (skipping completed ones) and return the seed-mean cohort table."""
    pipeline = Pipeline(config, out_dir)
    pipeline.run()
    return pipeline.table("table2")
