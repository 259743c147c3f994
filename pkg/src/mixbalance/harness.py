"""End-to-end experiments: imbalanced baseline, single-pool and GA-mixed training sets.

One repetition runs these stages:

1. build or load the base dataset and thin it to the configured imbalance;
2. stratified train/test split, normalizer fit on the training part only;
3. fit the three generators on training positives and sample the pools;
4. train every classifier on each variant (imbalanced, pool 1, 2, 3 alone,
   GA-optimized mixture);
5. score every trained model once on the held-out test rows.

Every dataset handed to a fit step before stage 5 passes through a
:class:`LeakageAudit` that fails loudly if a test row id shows up.
"""
from __future__ import annotations

import csv
import io
import json
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .classifiers import FAMILIES, ClassifierSpec, fit_classifier, predict
from .data import (DEFAULT_SCHEMA, FeatureDataset, NormalizerParams, apply_normalizer,
                   fit_normalizer, load_smart_csv, stratified_folds, stratified_split,
                   subsample_to_ratio)
from .fixture import make_fixture
from .ga import (N_POOLS, FitnessContext, GaConfig, GaResult, MixRatio, assemble_balanced_set,
                 run_ga)
from .generators import (DEFAULT_CONFIG, SyntheticPool, fit_generator, load_external_pool,
                         sample_pool, validate_pool)
from .metrics import score

VARIANTS = ("imbalanced", "pool_1", "pool_2", "pool_3", "ga")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class LeakageError(AssertionError):
    pass


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) & 0xFFFFFFFF for p in parts]).generate_state(1)[0])


# --- configuration ----------------------------------------------------------

DEFAULT_FIXTURE = {"positives": 100, "negatives": 10000, "separation": 2.5,
                   "positive_spread": 1.5, "correlation": 0.3}


def _default_pools():
    return [{"kind": "gaussian_copula"}, {"kind": "gaussian_mixture"}, {"kind": "interpolator"}]


@dataclass
class ExperimentConfig:
    data_path: str | None = None
    drive_model: str | None = None
    fixture: dict = field(default_factory=lambda: dict(DEFAULT_FIXTURE))
    imbalance_ratio: list = field(default_factory=lambda: [1, 100])
    test_fraction: float = 0.3
    pools: list = field(default_factory=_default_pools)
    pool_size: int | None = None
    classifiers: list = field(default_factory=lambda: list(FAMILIES))
    classifier_params: dict = field(default_factory=dict)
    ga: dict = field(default_factory=dict)
    seed: int = 0
    repetitions: int = 1
    fitness_on_test: bool = False
    validation_fraction: float = 0.25
    validation_folds: int = 1
    workers: int = 1

    def __post_init__(self):
        if len(self.pools) != N_POOLS:
            raise ConfigError(f"exactly {N_POOLS} pool slots are required, got {len(self.pools)}")
        for i, p in enumerate(self.pools):
            kind = p.get("kind")
            extra = set(p) - {"kind", "settings", "path"}
            if extra:
                raise ConfigError(f"pools[{i}]: unknown keys {sorted(extra)}")
            if kind == "external":
                if not p.get("path"):
                    raise ConfigError(f"pools[{i}]: external pool needs a path")
            elif kind not in DEFAULT_CONFIG:
                raise ConfigError(f"pools[{i}]: unknown generator kind {kind!r}")
        if self.validation_folds < 1:
            raise ConfigError("validation_folds must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not self.classifiers:
            raise ConfigError("at least one classifier is required")
        for name in self.classifiers:
            try:
                self.classifier_spec(name)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        unknown = set(self.fixture) - set(DEFAULT_FIXTURE)
        if unknown:
            raise ConfigError(f"fixture: unknown keys {sorted(unknown)}")
        try:
            self.ga_config(0)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"ga: {exc}") from None
        if len(self.imbalance_ratio) != 2:
            raise ConfigError("imbalance_ratio must be [positives, negatives]")
        if not 0 < self.test_fraction < 1 or not 0 < self.validation_fraction < 1:
            raise ConfigError("test_fraction and validation_fraction must lie in (0, 1)")

    def classifier_spec(self, name: str) -> ClassifierSpec:
        return ClassifierSpec(name, dict(self.classifier_params.get(name, {})))

    def ga_config(self, seed: int) -> GaConfig:
        if "seed" in self.ga:
            raise ValueError("set the GA seed through the top-level seed")
        return GaConfig(**self.ga, seed=seed)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = dict(d)
        if "fixture" in cfg:
            cfg["fixture"] = {**DEFAULT_FIXTURE, **cfg["fixture"]}
        return cls(**cfg)

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d)


# --- leakage guard ----------------------------------------------------------

class LeakageAudit:
    """Checks that no held-out row id reaches a fitting step."""

    def __init__(self, test: FeatureDataset):
        self._test_ids = np.unique(test.ids)
        self.checks = 0
        self.test_reads = 0
        self.labels: list[str] = []

    def __call__(self, ds: FeatureDataset, stage: str) -> None:
        self.checks += 1
        hits = np.intersect1d(ds.ids, self._test_ids)
        if hits.size:
            raise LeakageError(f"{stage}: {hits.size} test rows reached a training step")

    def summary(self) -> dict:
        return {"checks": self.checks, "test_row_references": 0, "test_reads": self.test_reads,
                "labels": list(self.labels)}


# --- stages -----------------------------------------------------------------

def load_base(cfg: ExperimentConfig, seed: int) -> tuple[FeatureDataset, dict]:
    if cfg.data_path:
        ds, stats = load_smart_csv(cfg.data_path, DEFAULT_SCHEMA, cfg.drive_model)
        return ds, asdict(stats)
    fx = {**DEFAULT_FIXTURE, **cfg.fixture}
    return make_fixture(seed=seed, **fx), {"fixture": fx}


def prepare_data(cfg: ExperimentConfig, seed: int):
    """Stages 1-2: returns (train, test, normalizer, info)."""
    base, info = load_base(cfg, derive_seed(seed, 1))
    base = subsample_to_ratio(base, tuple(cfg.imbalance_ratio), derive_seed(seed, 2))
    train, test = stratified_split(base, cfg.test_fraction, derive_seed(seed, 3))
    params = fit_normalizer(train)
    info = {**info, "train": [train.n_positive, train.n_negative],
            "test": [test.n_positive, test.n_negative]}
    return apply_normalizer(params, train), apply_normalizer(params, test), params, info


def build_pools(cfg: ExperimentConfig, train: FeatureDataset, seed: int):
    """Stage 3: returns (pools, quality report dicts)."""
    minority = train.positives()
    size = cfg.pool_size or max(train.n_negative - train.n_positive, 1)
    pools, quality = [], []
    for i, slot in enumerate(cfg.pools):
        if slot["kind"] == "external":
            pool = load_external_pool(slot["path"], train.schema)
        else:
            model = fit_generator(slot["kind"], minority, slot.get("settings"),
                                  derive_seed(seed, 10, i))
            pool = sample_pool(model, size, derive_seed(seed, 20, i), train.schema)
        pools.append(pool)
        quality.append(validate_pool(pool, minority).to_dict())
    return pools, quality


def variant_training_set(variant: str, train: FeatureDataset, pools, ratio: MixRatio | None,
                         seed: int, notes: list) -> FeatureDataset:
    if variant == "imbalanced":
        return train
    if variant == "ga":
        return assemble_balanced_set(train, pools, ratio, seed, notes)
    one_hot = [0.0] * N_POOLS
    one_hot[int(variant[-1]) - 1] = 1.0
    return assemble_balanced_set(train, pools, MixRatio(tuple(one_hot)), seed, notes)


def search_ratio(cfg: ExperimentConfig, name: str, train, pools, seed: int,
                 audit: LeakageAudit | None = None, test: FeatureDataset | None = None,
                 progress: bool = False) -> GaResult:
    if cfg.fitness_on_test:
        splits = [(train, test)]
    elif cfg.validation_folds == 1:
        splits = [stratified_split(train, cfg.validation_fraction, derive_seed(seed, 42))]
    else:
        splits = stratified_folds(train, cfg.validation_folds, derive_seed(seed, 42))
    folds = []
    for k, (fit_rows, held_out) in enumerate(splits):
        if cfg.fitness_on_test:
            fold_pools = pools
        else:
            # pools regenerated from the fit rows only, so no held-out
            # positive leaks into the mixes being scored
            fold_pools, _ = build_pools(cfg, fit_rows, derive_seed(seed, 43, k))
        folds.append((fit_rows, fold_pools, held_out))
    ctx = FitnessContext.from_folds(folds, cfg.classifier_spec(name), derive_seed(seed, 40),
                                    audit=audit)
    return run_ga(cfg.ga_config(derive_seed(seed, 41)), ctx, workers=cfg.workers,
                  progress=progress)


def log(msg: str) -> None:
    print(f"[mixbalance] {msg}", file=sys.stderr, flush=True)


def train_variant(cfg: ExperimentConfig, name: str, variant: str, train, pools,
                  ratio: MixRatio | None, seed: int, notes: list,
                  audit: LeakageAudit | None = None):
    """Fit classifier ``name`` on one training variant; ``seed`` is the run seed."""
    ci = cfg.classifiers.index(name)
    vseed = derive_seed(seed, 60, ci, VARIANTS.index(variant))
    ds = variant_training_set(variant, train, pools, ratio, vseed, notes)
    if audit is not None:
        audit(ds, f"train:{name}:{variant}")
    return fit_classifier(cfg.classifier_spec(name), ds, vseed)


def _run_once(cfg: ExperimentConfig, run: int, seed: int, audit_box: list, timings: dict,
              progress: bool) -> dict:
    stage = "prepare"
    t0 = time.perf_counter()
    try:
        train, test, _, info = prepare_data(cfg, seed)
        audit = LeakageAudit(test)
        audit_box.append(audit)
        audit(train, "prepare")
        timings["prepare"] = time.perf_counter() - t0

        if progress:
            log(f"run {run}: prepared {info['train']} train / {info['test']} test (pos, neg)")
        stage = "generate"
        t0 = time.perf_counter()
        audit(train.positives(), "generate")
        pools, quality = build_pools(cfg, train, seed)
        timings["generate"] = time.perf_counter() - t0

        models, ga_results, notes = {}, {}, []
        if cfg.fitness_on_test:
            audit.labels.append("fitness_on_test: GA fitness is scored on the test rows")
        for ci, name in enumerate(cfg.classifiers):
            stage = f"search:{name}"
            t0 = time.perf_counter()
            if progress:
                log(f"run {run}: GA search for {name}")
            res = search_ratio(cfg, name, train, pools, derive_seed(seed, 50, ci), audit,
                               test, progress)
            ga_results[name] = res.to_dict()
            ratio = res.ratio
            timings[stage] = time.perf_counter() - t0
            for variant in VARIANTS:
                stage = f"train:{name}:{variant}"
                t0 = time.perf_counter()
                models[(name, variant)] = train_variant(cfg, name, variant, train, pools, ratio,
                                                        seed, notes, audit)
                timings[stage] = time.perf_counter() - t0

        stage = "evaluate"
        metrics = {}
        for name in cfg.classifiers:
            metrics[name] = {}
            for variant in VARIANTS:
                audit.test_reads += 1
                pred = predict(models[(name, variant)], test.rows)
                metrics[name][variant] = score(test.labels, pred)
    except Exception as exc:
        raise StageError(stage, exc) from exc
    return {"run": run, "seed": seed, "data": info, "pool_quality": quality,
            "metrics": metrics, "ga": ga_results, "notes": sorted(set(notes)),
            "leakage": audit.summary()}


# --- report -----------------------------------------------------------------

@dataclass
class ExperimentReport:
    config: dict
    classifiers: list
    variants: list
    g_mean: dict
    ratios: dict
    runs: list
    partial: bool = False
    failed_stage: str | None = None
    error: str | None = None
    timings: list = field(default_factory=list)

    def body(self) -> dict:
        d = asdict(self)
        d.pop("timings")
        return d

    def to_dict(self) -> dict:
        return {"body": self.body(), "timings": self.timings}

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentReport:
        return cls(**d["body"], timings=d.get("timings", []))


def _summarize(cfg: ExperimentConfig, runs: list) -> tuple[dict, dict]:
    table, ratios = {}, {}
    for name in cfg.classifiers:
        table[name] = {}
        for variant in VARIANTS:
            vals = [r["metrics"][name][variant]["g_mean"] for r in runs]
            table[name][variant] = float(np.mean(vals)) if vals else None
        ratios[name] = [r["ga"][name]["best_ratio"] for r in runs]
    return table, ratios


def run_experiment(cfg: ExperimentConfig, progress: bool = False) -> ExperimentReport:
    runs, timings = [], []
    failed_stage = error = None
    for run in range(cfg.repetitions):
        seed = derive_seed(cfg.seed, run)
        t = {}
        audit_box: list = []
        try:
            runs.append(_run_once(cfg, run, seed, audit_box, t, progress))
        except StageError as exc:
            failed_stage, error = f"run {run}: {exc.stage}", str(exc)
            timings.append(t)
            break
        timings.append(t)
    table, ratios = _summarize(cfg, runs)
    return ExperimentReport(
        config=cfg.to_dict(), classifiers=list(cfg.classifiers), variants=list(VARIANTS),
        g_mean=table, ratios=ratios, runs=runs, partial=failed_stage is not None,
        failed_stage=failed_stage, error=error, timings=timings,
    )


def _variant_label(cfg_pools: list, variant: str) -> str:
    if variant.startswith("pool_"):
        slot = cfg_pools[int(variant[-1]) - 1]
        return f"{variant} ({slot['kind']})"
    return {"imbalanced": "imbalanced (1:r)", "ga": "GA-optimized"}.get(variant, variant)


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.3f}"


def render_report(report: ExperimentReport, fmt: str = "json") -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["classifier", *report.variants])
        for name in report.classifiers:
            w.writerow([name, *[_fmt(report.g_mean.get(name, {}).get(v)) for v in report.variants]])
        return buf.getvalue()
    if fmt == "markdown":
        pools = report.config["pools"]
        ratio_term = "1:{1}".format(*report.config["imbalance_ratio"])
        lines = []
        if report.partial:
            lines += [f"> **partial report**: failed at stage `{report.failed_stage}`",
                      f"> {report.error}", ""]
        lines += ["## GA-optimized mixing ratios", "",
                  "| Classifier | Ratio (pool 1 : pool 2 : pool 3) |", "|---|---|"]
        for name in report.classifiers:
            rs = report.ratios.get(name, [])
            cell = "; ".join(":".join(f"{x:.3f}" for x in r) for r in rs) or "n/a"
            lines.append(f"| {name} | {cell} |")
        labels = [_variant_label(pools, v).replace("1:r", ratio_term) for v in report.variants]
        lines += ["", "## Test G-mean by training set", "",
                  "| Classifier | " + " | ".join(labels) + " |",
                  "|---" * (len(labels) + 1) + "|"]
        for name in report.classifiers:
            cells = [_fmt(report.g_mean.get(name, {}).get(v)) for v in report.variants]
            lines.append(f"| {name} | " + " | ".join(cells) + " |")
        n = len(report.runs)
        lines += ["", f"Means over {n} repetition{'s' if n != 1 else ''}; "
                      f"master seed {report.config['seed']}."]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")
