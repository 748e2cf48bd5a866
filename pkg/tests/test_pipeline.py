import csv
import hashlib

import pytest

from adkit.cli import main
from adkit.config import build_config, parse_config_text
from adkit.data import Dataset, ManifestRecord, write_manifest
from adkit.data.synthetic import generate_synthetic_cohort
from adkit.exceptions import AdkitError, DependencyError, StageError
from adkit.pipeline import STAGES, Pipeline, run_pipeline
from conftest import smoke_text


def build(text):
    return build_config(parse_config_text(text))


def digest_tree(root, exclude=()):
    out = {}
    for p in sorted(root.rglob("*")):
        rel = p.relative_to(root).as_posix()
        if p.is_file() and rel not in exclude:
            out[rel] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


def audit_rows(out):
    with open(out / "audit.csv", newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def smoke_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = build(smoke_text())
    table = run_pipeline(cfg, out)
    return cfg, out, table


class TestRunPipeline:
    def test_completes_with_all_artifacts(self, smoke_run):
        cfg, out, table = smoke_run
        assert table.rows == ["ae", "lg", "ensemble"] and table.columns == ["structural"]
        table.check_complete()
        for name in ("table2.csv", "table2.json", "table2_seed0.csv", "table3.csv", "table3_structural.csv", "ranks.csv"):
            assert (out / "reports" / name).exists()
        assert (out / "stores/structural/seed0/ae/epoch_0010.adk").exists()
        assert (out / "stores/structural/seed0/lg/epoch_0000.adk").exists()
        assert (out / "evaluation/roc/structural/seed0/ensemble/sample_wise.csv").exists()

    def test_table3_marks_oracle_and_single_checkpoint(self, smoke_run):
        _, out, _ = smoke_run
        lines = (out / "reports/table3.csv").read_text().splitlines()
        assert lines[0] == "method,last_epoch,normal_val_loss,sample_wise,complete_validation[oracle],average,note"
        assert lines[2].startswith("lg,") and lines[2].endswith("not applicable: single checkpoint")

    def test_byte_identical_rerun(self, smoke_run, tmp_path):
        cfg, out, _ = smoke_run
        run_pipeline(cfg, tmp_path)
        assert digest_tree(tmp_path) == digest_tree(out)

    def test_stages_compose_to_full_run(self, smoke_run, tmp_path):
        cfg, out, _ = smoke_run
        p = Pipeline(cfg, tmp_path)
        for stage in STAGES:
            assert p.run_stage(stage)
        assert digest_tree(tmp_path) == digest_tree(out)

    def test_completed_stage_is_skipped(self, smoke_run):
        cfg, out, _ = smoke_run
        before = (out / "stores/structural/seed0/ae/epoch_0005.adk").stat().st_mtime_ns
        assert Pipeline(cfg, out).run_stage("train") is False
        assert (out / "stores/structural/seed0/ae/epoch_0005.adk").stat().st_mtime_ns == before

    def test_other_config_refuses_directory(self, smoke_run):
        _, out, _ = smoke_run
        with pytest.raises(AdkitError, match="different config"):
            Pipeline(build(smoke_text(extra="detector.ae.learning_rate = 1\n")), out)


class TestDependencies:
    def test_select_before_train(self, tmp_path):
        p = Pipeline(build(smoke_text()), tmp_path)
        p.run_stage("generate-data")
        with pytest.raises(DependencyError, match="'train'"):
            p.run_stage("select")

    def test_report_without_evaluations(self, tmp_path):
        with pytest.raises(DependencyError, match="report"):
            Pipeline(build(smoke_text()), tmp_path).run_stage("report")

    def test_unknown_stage(self, tmp_path):
        with pytest.raises(ValueError):
            Pipeline(build(smoke_text()), tmp_path).run_stage("deploy")


class TestAudit:
    def test_complete_validation_reads_are_validation_phase(self, smoke_run):
        _, _, _ = smoke_run
        rows = audit_rows(smoke_run[1])
        phases = {(r["phase"], r["stage"], r["split"]) for r in rows}
        assert phases == {("validation", "select", "val"), ("evaluation", "score", "test")}
        assert sum(r["phase"] == "evaluation" for r in rows) == 20

    def test_normal_only_strategies_log_evaluation_only(self, tmp_path):
        cfg = build(smoke_text(strategies="last_epoch, normal_val_loss, sample_wise"))
        run_pipeline(cfg, tmp_path)
        rows = audit_rows(tmp_path)
        assert rows and {r["phase"] for r in rows} == {"evaluation"}


class TestManifestCohort:
    def test_unassigned_manifest_is_split_and_run(self, tmp_path):
        src = generate_synthetic_cohort("structural", 60, 20, 20, 40, 40, side=16, seed=1, out_dir=tmp_path / "src")
        # forget the splits; abnormal patients must land in val or test
        records = [ManifestRecord(r.path, r.label, r.patient_id, "unassigned") for r in src.records]
        write_manifest(Dataset(records), tmp_path / "src" / "pool.csv")
        text = smoke_text(strategies="last_epoch, sample_wise").replace(
            "cohort.structural.kind = structural", "cohort.pool.manifest = src/pool.csv\ncohort.pool.ratios = 0.5, 0.25, 0.25"
        )
        cfg_path = tmp_path / "run.cfg"
        cfg_path.write_text(text)
        assert main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "out")]) == 0
        assert (tmp_path / "out/reports/table2.csv").read_text().startswith("method,pool,average")


class TestStageErrors:
    def test_degenerate_member_names_context(self, tmp_path):
        p = Pipeline(build(smoke_text(strategies="last_epoch")), tmp_path)
        for stage in STAGES[:4]:
            p.run_stage(stage)
        normal = tmp_path / "scores/structural/seed0/lg/last_epoch.normal.csv"
        rows = normal.read_text().splitlines()
        normal.write_text("\n".join([rows[0], *(r.rsplit(",", 1)[0] + ",1.0" for r in rows[1:])]) + "\n")
        with pytest.raises(StageError) as info:
            p.run_stage("ensemble")
        assert info.value.stage == "ensemble"
        assert "cohort structural, seed 0, strategy last_epoch, member lg" in str(info.value)
        assert not p.ledger.is_complete("ensemble")
        assert p.ledger.is_complete("score")


class TestCli:
    def test_exit_codes(self, tmp_path, capsys):
        good = tmp_path / "good.cfg"
        good.write_text(smoke_text(strategies="last_epoch, sample_wise"))
        bad = tmp_path / "bad.cfg"
        bad.write_text(smoke_text(extra="ensemble.members = ghost\n"))
        assert main(["select", "--config", str(good), "--out", str(tmp_path / "o")]) == 1
        assert "requires stage 'generate-data'" in capsys.readouterr().err
        assert main(["train", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
        assert main(["generate-data", "--config", str(good), "--out", str(tmp_path / "o")]) == 0

    def test_seed_override(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text(smoke_text(strategies="last_epoch, sample_wise"))
        assert main(["generate-data", "--config", str(cfg), "--out", str(tmp_path / "o"), "--seed", "9"]) == 0
        assert (tmp_path / "o/data/structural/seed9/manifest.csv").exists()
        assert "run.seeds = 9" in (tmp_path / "o/config.txt").read_text()

    def test_missing_config(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.cfg")]) == 2

    def test_subcommands_listed(self):
        from adkit.cli import build_parser

        text = build_parser().format_help()
        for stage in (*STAGES, "run"):
            assert stage in text
