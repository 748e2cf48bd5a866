import pytest

from adkit.config import build_config, default_config, load_config, parse_config_text
from adkit.exceptions import ConfigError
from conftest import smoke_text


def build(text):
    return build_config(parse_config_text(text))


class TestGrammar:
    def test_values(self):
        s = parse_config_text("# c\n\n a.b = 3 \nc.d = 0.5\ne.f = x, y\ng.h = 1,2\n")
        assert s == {"a.b": 3, "c.d": 0.5, "e.f": ["x", "y"], "g.h": [1, 2]}

    @pytest.mark.parametrize("text, msg", [("a.b 3\n", "line 1"), ("a.b = 1\na.b = 2\n", "duplicate"), ("a..b = 1\n", "malformed")])
    def test_syntax_errors(self, text, msg):
        with pytest.raises(ConfigError, match=msg):
            parse_config_text(text)


class TestValidation:
    def test_smoke_profile(self):
        cfg = build(smoke_text())
        assert [d.id for d in cfg.detectors] == ["ae", "lg"]
        assert cfg.detector("ae").params["hidden_sizes"] == (32, 16, 8)
        assert cfg.ensemble_members == ["ae", "lg"]
        assert cfg.cohorts[0].counts["n_train"] == 40

    def test_default_profile(self):
        cfg = default_config()
        assert cfg.seeds == [0, 1, 2] and cfg.side == 32 and cfg.epochs == 60 and cfg.cadence == 10
        cd = cfg.detector("center_distance")
        assert (cd.epochs, cd.cadence) == (20, 2)
        assert cfg.ensemble_strategy == "sample_wise"

    @pytest.mark.parametrize(
        "extra, msg",
        [
            ("ensemble.members = ae, ghost\n", "ghost"),
            ("detector.x.kind = svm\n", "unknown or missing kind"),
            ("detector.ae.learnin_rate = 1\n", "detector 'ae'"),
            ("detector.ae.seed = 1\n", "seed and side"),
            ("cohort.c2.kind = weird\n", "unknown kind"),
            ("cohort.c3.kind = density\ncohort.c3.manifest = m.csv\n", "exactly one"),
            ("cohort.c4.manifest = m.csv\ncohort.c4.ratios = 0.5, 0.5\n", "ratios"),
            ("bogus.key = 1\n", "unknown setting"),
            ("ensemble.strategy = complete_validation\n", "not among"),
        ],
    )
    def test_errors(self, extra, msg):
        with pytest.raises(ConfigError, match=msg):
            build(smoke_text(strategies="last_epoch, sample_wise", extra=extra))

    def test_unknown_strategy(self):
        with pytest.raises(ConfigError):
            build(smoke_text(strategies="last_epoch, best_guess"))

    def test_cadence_above_epochs(self):
        with pytest.raises(ConfigError):
            build(smoke_text(extra="detector.ae.epochs = 3\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.cfg")


class TestHash:
    def test_stable_under_formatting(self):
        a = build(smoke_text())
        b = build("# leading comment\n" + smoke_text().replace(" = ", "=").replace(", ", ","))
        assert a.hash() == b.hash()

    def test_sensitive_to_settings(self):
        assert build(smoke_text()).hash() != build(smoke_text(extra="detector.ae.learning_rate = 2\n")).hash()

    def test_output_excluded(self):
        assert build(smoke_text()).hash() == build(smoke_text(extra="run.output = elsewhere\n")).hash()

    def test_with_seeds(self):
        cfg = build(smoke_text()).with_seeds([7])
        assert cfg.seeds == [7] and cfg.hash() != build(smoke_text()).hash()
