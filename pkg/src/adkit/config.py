"""Run configuration in a flat ``key = value`` text format.

Grammar
-------
* One setting per line: ``dotted.key = value``. Whitespace around the key,
  the ``=`` and the value is ignored.
* Blank lines and lines whose first non-blank character is ``#`` are skipped.
* Lists are comma separated. Numbers parse as ``int`` when possible, then
  ``float``; anything else is a string.
* A key may appear only once.

Keys
----
``run.seeds``, ``run.side``, ``run.epochs``, ``run.cadence``,
``run.batch_size``, ``run.strategies``, ``run.report_formats``, ``run.output``
    global settings (``run.output`` is overridden by ``--out``).
``data.n_train``, ``data.n_val_normal``, ``data.n_val_abnormal``,
``data.n_test_normal``, ``data.n_test_abnormal``
    default sample counts for synthetic cohorts.
``cohort.<name>.kind`` *or* ``cohort.<name>.manifest``
    a synthetic cohort (``structural``, ``artifact``, ``density``) or a
    manifest CSV; ``cohort.<name>.ratios`` gives train/val/test ratios used
    when the manifest leaves splits unassigned, and ``cohort.<name>.n_*``
    override the synthetic counts.
``detector.<id>.kind``
    one of ``ae_pixel``, ``ae_feature``, ``center_distance``,
    ``latent_gaussian``. ``detector.<id>.epochs`` / ``.cadence`` override
    the run defaults; every other ``detector.<id>.<param>`` is passed to the
    estimator constructor.
``ensemble.members``, ``ensemble.strategy``
    detector ids averaged by the ensemble (default: all), and the strategy
    whose scores feed the per-cohort comparison table (default:
    ``sample_wise`` when listed, else the first strategy).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .data.synthetic import CohortKind
from .detectors import DetectorKind, make_detector
from .exceptions import ConfigError
from .selection import SelectionStrategy

COUNT_KEYS = ("n_train", "n_val_normal", "n_val_abnormal", "n_test_normal", "n_test_abnormal")
RUN_KEYS = {"seeds", "side", "epochs", "cadence", "batch_size", "strategies", "report_formats", "output"}


@dataclass
class CohortSpec:
    name: str
    kind: str | None = None
    manifest: str | None = None
    ratios: tuple = (0.6, 0.2, 0.2)
    counts: dict = field(default_factory=dict)

    @property
    def synthetic(self) -> bool:
        return self.kind is not None


@dataclass
class DetectorSpec:
    id: str
    kind: str
    epochs: int
    cadence: int
    params: dict = field(default_factory=dict)


@dataclass
class RunConfig:
    cohorts: list[CohortSpec]
    detectors: list[DetectorSpec]
    strategies: list[str]
    ensemble_members: list[str]
    ensemble_strategy: str
    seeds: list[int]
    side: int = 32
    epochs: int = 60
    cadence: int = 10
    batch_size: int = 16
    report_formats: list[str] = field(default_factory=lambda: ["csv", "json"])
    output: str | None = None
    base_dir: Path | None = None
    source: dict = field(default_factory=dict, repr=False)

    def detector(self, det_id: str) -> DetectorSpec:
        for d in self.detectors:
            if d.id == det_id:
                return d
        raise KeyError(det_id)

    def canonical_text(self) -> str:
        """Normalized settings, one per line, sorted; the basis of :meth:`hash`."""
        lines = [f"{k} = {_fmt(v)}" for k, v in sorted(self.source.items()) if k != "run.output"]
        return "\n".join(lines) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()

    def with_seeds(self, seeds) -> "RunConfig":
        src = dict(self.source)
        src["run.seeds"] = [int(s) for s in seeds]
        return build_config(src, base_dir=self.base_dir)

    def manifest_path(self, cohort: CohortSpec) -> Path:
        p = Path(cohort.manifest)
        if not p.is_absolute() and self.base_dir is not None:
            p = self.base_dir / p
        return p


def _fmt(v) -> str:
    if isinstance(v, (list, tuple)):
        return ", ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _scalar(text: str):
    text = text.strip()
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def parse_value(text: str):
    if "," in text:
        return [_scalar(t) for t in text.split(",") if t.strip()]
    return _scalar(text)


def parse_config_text(text: str) -> dict:
    settings: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if not key or any(not part for part in key.split(".")):
            raise ConfigError(f"line {lineno}: malformed key {key!r}")
        if key in settings:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        settings[key] = parse_value(value)
    return settings


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return build_config(parse_config_text(text), base_dir=Path(path).resolve().parent)


def _as_list(v) -> list:
    return list(v) if isinstance(v, (list, tuple)) else [v]


def _int(key, v, minimum=None) -> int:
    if not isinstance(v, int) or isinstance(v, bool):
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{key} must be >= {minimum}, got {v}")
    return v


def build_config(settings: dict, base_dir=None) -> RunConfig:
    """Validate parsed settings; raises :class:`ConfigError` before any work is done."""
    settings = dict(settings)
    run = {}
    data_counts = {}
    cohorts: dict[str, dict] = {}
    detectors: dict[str, dict] = {}
    ensemble = {}
    for key, value in settings.items():
        head, _, rest = key.partition(".")
        if head == "run" and rest in RUN_KEYS:
            run[rest] = value
        elif head == "data" and rest in COUNT_KEYS:
            data_counts[rest] = _int(key, value, 0)
        elif head == "cohort" and rest.count(".") == 1:
            name, attr = rest.split(".")
            cohorts.setdefault(name, {})[attr] = value
        elif head == "detector" and rest.count(".") == 1:
            name, attr = rest.split(".")
            detectors.setdefault(name, {})[attr] = value
        elif head == "ensemble" and rest in ("members", "strategy"):
            ensemble[rest] = value
        else:
            raise ConfigError(f"unknown setting {key!r}")

    seeds = [_int("run.seeds", s, 0) for s in _as_list(run.get("seeds", [0, 1, 2]))]
    if not seeds:
        raise ConfigError("at least one seed is required")
    side = _int("run.side", run.get("side", 32), 16)
    epochs = _int("run.epochs", run.get("epochs", 60), 1)
    cadence = _int("run.cadence", run.get("cadence", 10), 1)
    if cadence > epochs:
        raise ConfigError("run.cadence must not exceed run.epochs")
    batch_size = _int("run.batch_size", run.get("batch_size", 16), 1)

    strategies = [str(s) for s in _as_list(run.get("strategies", [s.value for s in SelectionStrategy]))]
    for s in strategies:
        if s not in SelectionStrategy.__members__:
            raise ConfigError(f"unknown strategy {s!r}")
    if len(set(strategies)) != len(strategies) or not strategies:
        raise ConfigError("run.strategies must list distinct strategies")
    formats = [str(f) for f in _as_list(run.get("report_formats", ["csv", "json"]))]
    for f in formats:
        if f not in ("csv", "json"):
            raise ConfigError(f"unknown report format {f!r}")

    if not cohorts:
        raise ConfigError("at least one cohort.<name>.kind or cohort.<name>.manifest is required")
    cohort_specs = []
    for name, attrs in cohorts.items():
        kind, manifest = attrs.pop("kind", None), attrs.pop("manifest", None)
        if (kind is None) == (manifest is None):
            raise ConfigError(f"cohort {name!r} needs exactly one of 'kind' or 'manifest'")
        if kind is not None and kind not in CohortKind.__members__:
            raise ConfigError(f"cohort {name!r}: unknown kind {kind!r}")
        ratios = tuple(float(r) for r in _as_list(attrs.pop("ratios", [0.6, 0.2, 0.2])))
        if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1) > 1e-9:
            raise ConfigError(f"cohort {name!r}: ratios must be three nonnegative numbers summing to 1")
        counts = {k: data_counts.get(k, d) for k, d in zip(COUNT_KEYS, (400, 100, 100, 100, 100))}
        for k in list(attrs):
            if k in COUNT_KEYS:
                counts[k] = _int(f"cohort.{name}.{k}", attrs.pop(k), 0)
        if attrs:
            raise ConfigError(f"cohort {name!r}: unknown settings {sorted(attrs)}")
        if kind is not None and (counts["n_test_normal"] == 0 or counts["n_test_abnormal"] == 0):
            raise ConfigError(f"cohort {name!r}: test split needs normal and abnormal samples")
        cohort_specs.append(
            CohortSpec(name, kind=kind, manifest=None if manifest is None else str(manifest),
                       ratios=ratios, counts=counts)
        )

    if not detectors:
        raise ConfigError("at least one detector.<id>.kind is required")
    det_specs = []
    for det_id, attrs in detectors.items():
        kind = attrs.pop("kind", None)
        if kind not in DetectorKind.__members__:
            raise ConfigError(f"detector {det_id!r}: unknown or missing kind {kind!r}")
        d_epochs = _int(f"detector.{det_id}.epochs", attrs.pop("epochs", epochs), 1)
        d_cadence = _int(f"detector.{det_id}.cadence", attrs.pop("cadence", cadence), 1)
        if d_cadence > d_epochs:
            raise ConfigError(f"detector {det_id!r}: cadence exceeds epochs")
        if "seed" in attrs or "side" in attrs:
            raise ConfigError(f"detector {det_id!r}: seed and side come from run settings")
        params = {k: tuple(v) if isinstance(v, list) else v for k, v in attrs.items()}
        params.setdefault("batch_size", batch_size)
        try:
            make_detector(kind, side=side, seed=0, **params)
        except TypeError as exc:
            raise ConfigError(f"detector {det_id!r}: {exc}") from exc
        det_specs.append(DetectorSpec(det_id, kind, d_epochs, d_cadence, params))

    members = [str(m) for m in _as_list(ensemble.get("members", [d.id for d in det_specs]))]
    ids = {d.id for d in det_specs}
    for m in members:
        if m not in ids:
            raise ConfigError(f"ensemble member {m!r} is not a configured detector")
    if not members:
        raise ConfigError("ensemble.members must not be empty")
    fallback = "sample_wise" if "sample_wise" in strategies else strategies[0]
    ens_strategy = str(ensemble.get("strategy", fallback))
    if ens_strategy not in strategies:
        raise ConfigError(f"ensemble.strategy {ens_strategy!r} is not among run.strategies")

    return RunConfig(
        cohorts=cohort_specs,
        detectors=det_specs,
        strategies=strategies,
        ensemble_members=members,
        ensemble_strategy=ens_strategy,
        seeds=seeds,
        side=side,
        epochs=epochs,
        cadence=cadence,
        batch_size=batch_size,
        report_formats=formats,
        output=run.get("output"),
        base_dir=None if base_dir is None else Path(base_dir),
        source=settings,
    )


DESK_PROFILE = """\
# Desk-scale profile: three synthetic cohorts, four detectors, three seeds.
run.seeds = 0, 1, 2
run.side = 32
run.epochs = 60
run.cadence = 10
run.batch_size = 16
run.strategies = last_epoch, normal_val_loss, sample_wise, complete_validation
run.report_formats = csv, json

data.n_train = 400
data.n_val_normal = 100
data.n_val_abnormal = 100
data.n_test_normal = 100
data.n_test_abnormal = 100

cohort.structural.kind = structural
cohort.artifact.kind = artifact
cohort.density.kind = density

detector.ae_pixel.kind = ae_pixel
detector.ae_feature.kind = ae_feature
detector.center_distance.kind = center_distance
detector.center_distance.epochs = 20
detector.center_distance.cadence = 2
detector.latent_gaussian.kind = latent_gaussian

ensemble.members = ae_pixel, ae_feature, center_distance, latent_gaussian
ensemble.strategy = sample_wise
"""


def default_config() -> RunConfig:
    return build_config(parse_config_text(DESK_PROFILE))
