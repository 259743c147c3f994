"""SMART telemetry ingestion, normalization and dataset splitting.

Rows are kept as dense ``float64`` matrices in a fixed feature order. Every
real row carries an integer id assigned when the base dataset is built; ids
survive subsetting, which lets the experiment harness prove that held-out
rows never reach a training step. Synthetic rows use negative ids.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

POSITIVE = 1
NEGATIVE = 0

META_COLUMNS = ("date", "serial_number", "model", "failure")


class SchemaError(ValueError):
    """Input columns do not match the expected feature schema."""


class EmptyDatasetError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered list of ``(smart_id, variant)`` pairs; variant is normalized or raw."""

    features: tuple[tuple[int, str], ...]

    def __post_init__(self):
        for attr_id, variant in self.features:
            if variant not in ("normalized", "raw"):
                raise SchemaError(f"unknown variant {variant!r} for SMART {attr_id}")

    @property
    def names(self) -> list[str]:
        return [f"smart_{i}_{v}" for i, v in self.features]

    def __len__(self) -> int:
        return len(self.features)


# Attributes 1, 3, 5, 5(raw), 7, 9, 187, 189, 194, 197, 197(raw).
DEFAULT_SCHEMA = FeatureSchema((
    (1, "normalized"),
    (3, "normalized"),
    (5, "normalized"),
    (5, "raw"),
    (7, "normalized"),
    (9, "normalized"),
    (187, "normalized"),
    (189, "normalized"),
    (194, "normalized"),
    (197, "normalized"),
    (197, "raw"),
))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class FeatureDataset:
    """Feature matrix with binary labels (1 = failed disk) and row ids."""

    rows: np.ndarray
    labels: np.ndarray
    schema: FeatureSchema = DEFAULT_SCHEMA
    ids: np.ndarray | None = None

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim == 1 and rows.size == 0:
            rows = rows.reshape(0, len(self.schema))
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if rows.ndim != 2 or rows.shape[1] != len(self.schema):
            raise SchemaError(
                f"rows must have shape (n, {len(self.schema)}), got {rows.shape}")
        if rows.shape[0] != labels.shape[0]:
            raise ValueError(
                f"{rows.shape[0]} rows but {labels.shape[0]} labels")
        if not np.isin(labels, (NEGATIVE, POSITIVE)).all():
            raise ValueError("labels must be 0 or 1")
        ids = np.arange(len(labels)) if self.ids is None else np.asarray(self.ids, dtype=np.int64)
        if ids.shape != labels.shape:
            raise ValueError("ids must align with labels")
        object.__setattr__(self, "rows", _frozen(rows))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "ids", _frozen(ids))

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())

    @property
    def n_negative(self) -> int:
        return len(self) - self.n_positive

    def subset(self, index) -> FeatureDataset:
        index = np.asarray(index)
        return FeatureDataset(self.rows[index], self.labels[index], self.schema, self.ids[index])

    def positives(self) -> FeatureDataset:
        return self.subset(np.flatnonzero(self.labels == POSITIVE))

    def negatives(self) -> FeatureDataset:
        return self.subset(np.flatnonzero(self.labels == NEGATIVE))

    def with_rows(self, rows: np.ndarray) -> FeatureDataset:
        return FeatureDataset(rows, self.labels, self.schema, self.ids)

    @staticmethod
    def concat(parts: list[FeatureDataset]) -> FeatureDataset:
        schema = parts[0].schema
        if any(p.schema != schema for p in parts):
            raise SchemaError("cannot concatenate datasets with different schemas")
        return FeatureDataset(
            np.concatenate([p.rows for p in parts]),
            np.concatenate([p.labels for p in parts]),
            schema,
            np.concatenate([p.ids for p in parts]),
        )

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.rows, columns=self.schema.names)
        df.insert(0, "id", self.ids)
        df["label"] = self.labels
        return df

    @classmethod
    def from_frame(cls, df: pd.DataFrame, schema: FeatureSchema = DEFAULT_SCHEMA) -> FeatureDataset:
        missing = [c for c in schema.names + ["label"] if c not in df.columns]
        if missing:
            raise SchemaError(f"missing column {missing[0]}")
        ids = df["id"].to_numpy() if "id" in df.columns else None
        return cls(df[schema.names].to_numpy(float), df["label"].to_numpy(), schema, ids)


def save_dataset(ds: FeatureDataset, path) -> None:
    """Write rows with ids and labels; floats survive a reload bit for bit."""
    ds.to_frame().to_csv(path, index=False, float_format="%.17g")


def load_dataset(path, schema: FeatureSchema = DEFAULT_SCHEMA) -> FeatureDataset:
    return FeatureDataset.from_frame(pd.read_csv(path, float_precision="round_trip"), schema)


@dataclass
class LoadStats:
    rows_read: int = 0
    rows_kept: int = 0
    dropped_missing: int = 0
    rejected_unparseable: int = 0
    dropped_model: int = 0


def _parse_float(cell: str) -> float:
    # float() round-trips repr'd values exactly; pandas' fast parser does not
    try:
        return float(cell)
    except ValueError:
        return np.nan


def load_smart_csv(path, schema: FeatureSchema = DEFAULT_SCHEMA, model: str | None = None
                   ) -> tuple[FeatureDataset, LoadStats]:
    """Read a Backblaze-style daily CSV and project it onto ``schema``.

    Rows missing any schema feature are dropped; rows with a non-numeric
    feature cell are rejected. Both are counted in the returned stats.
    """
    df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    for col in list(META_COLUMNS) + schema.names:
        if col not in df.columns:
            raise SchemaError(f"missing required column {col}")
    stats = LoadStats(rows_read=len(df))
    if model is not None:
        keep = df["model"].str.strip() == model
        stats.dropped_model = int((~keep).sum())
        df = df[keep]

    raw = df[schema.names].apply(lambda s: s.str.strip())
    blank = (raw == "").any(axis=1).to_numpy()
    values = raw.apply(lambda col: col.map(_parse_float))
    failure = df["failure"].str.strip().map(_parse_float)
    bad_cell = (values.isna().to_numpy() & (raw != "").to_numpy()).any(axis=1)
    bad_cell |= ~np.isfinite(values.to_numpy(float)).all(axis=1) & ~blank
    bad_label = ~failure.isin([0, 1]).to_numpy()

    stats.dropped_missing = int(blank.sum())
    rejected = (bad_cell | bad_label) & ~blank
    stats.rejected_unparseable = int(rejected.sum())
    keep = ~(blank | rejected)
    stats.rows_kept = int(keep.sum())
    if stats.dropped_missing or stats.rejected_unparseable:
        logger.info("%s: dropped %d rows with missing features, rejected %d unparseable rows",
                    path, stats.dropped_missing, stats.rejected_unparseable)
    if stats.rows_kept == 0:
        raise EmptyDatasetError(f"{path}: no complete rows after filtering")
    ds = FeatureDataset(values.to_numpy(float)[keep], failure.to_numpy()[keep].astype(np.int64), schema)
    return ds, stats


def write_smart_csv(ds: FeatureDataset, path, model: str = "ST4000DM000",
                    date: str = "2020-01-01") -> None:
    """Write ``ds`` in the Backblaze column layout (used for fixtures and demos)."""
    df = pd.DataFrame(ds.rows, columns=ds.schema.names)
    df.insert(0, "failure", ds.labels)
    df.insert(0, "model", model)
    df.insert(0, "serial_number", [f"Z{i:07d}" for i in ds.ids])
    df.insert(0, "date", date)
    df.to_csv(path, index=False, float_format="%.17g")


@dataclass(frozen=True, eq=False)
class NormalizerParams:
    """Per-feature standardization followed by min-max scaling to [-1, 1]."""

    mean: np.ndarray
    std: np.ndarray
    z_min: np.ndarray
    z_max: np.ndarray
    constant: np.ndarray
    schema: FeatureSchema = DEFAULT_SCHEMA

    def to_dict(self) -> dict:
        return {
            "schema": self.schema.names,
            "features": [
                {"name": name, "mean": float(m), "stddev": float(s), "min": float(lo),
                 "max": float(hi), "constant": bool(c)}
                for name, m, s, lo, hi, c in zip(self.schema.names, self.mean, self.std,
                                                 self.z_min, self.z_max, self.constant)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict, schema: FeatureSchema = DEFAULT_SCHEMA) -> NormalizerParams:
        if d["schema"] != schema.names:
            raise SchemaError("normalizer was fit on a different schema")
        f = d["features"]
        return cls(
            np.array([x["mean"] for x in f]), np.array([x["stddev"] for x in f]),
            np.array([x["min"] for x in f]), np.array([x["max"] for x in f]),
            np.array([x["constant"] for x in f], dtype=bool), schema,
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def load(cls, path, schema: FeatureSchema = DEFAULT_SCHEMA) -> NormalizerParams:
        return cls.from_dict(json.loads(Path(path).read_text()), schema)

    def zscore(self, x: np.ndarray) -> np.ndarray:
        std = np.where(self.constant, 1.0, self.std)
        return (np.asarray(x, float) - self.mean) / std

    def scale(self, z: np.ndarray) -> np.ndarray:
        span = np.where(self.constant, 1.0, self.z_max - self.z_min)
        out = 2.0 * (z - self.z_min) / span - 1.0
        return np.where(self.constant, 0.0, out)

    def unscale(self, v: np.ndarray) -> np.ndarray:
        """Map normalized values back to z-scores (constant features give their z_min)."""
        span = np.where(self.constant, 0.0, self.z_max - self.z_min)
        return (np.asarray(v, float) + 1.0) / 2.0 * span + self.z_min


def fit_normalizer(train: FeatureDataset) -> NormalizerParams:
    if len(train) == 0:
        raise EmptyDatasetError("cannot fit a normalizer on an empty dataset")
    x = train.rows
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    constant = std == 0
    z = (x - mean) / np.where(constant, 1.0, std)
    z_min, z_max = z.min(axis=0), z.max(axis=0)
    constant = constant | (z_min == z_max)
    return NormalizerParams(mean, std, z_min, z_max, constant, train.schema)


def apply_normalizer(params: NormalizerParams, ds: FeatureDataset) -> FeatureDataset:
    if ds.schema != params.schema:
        raise SchemaError("dataset schema does not match normalizer schema")
    out = np.clip(params.scale(params.zscore(ds.rows)), -1.0, 1.0)
    return ds.with_rows(out)


def stratified_split(ds: FeatureDataset, test_fraction: float, seed: int
                     ) -> tuple[FeatureDataset, FeatureDataset]:
    """Split each class separately so both partitions keep the class mix."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cls in (NEGATIVE, POSITIVE):
        idx = np.flatnonzero(ds.labels == cls)
        if len(idx) < 2:
            raise ValueError(f"class {cls} has {len(idx)} rows; stratifying needs at least 2")
        n_test = int(np.floor(test_fraction * len(idx) + 0.5))
        n_test = min(max(n_test, 1), len(idx) - 1)
        perm = rng.permutation(idx)
        test_idx.append(perm[:n_test])
        train_idx.append(perm[n_test:])
    return (ds.subset(np.sort(np.concatenate(train_idx))),
            ds.subset(np.sort(np.concatenate(test_idx))))


def stratified_folds(ds: FeatureDataset, k: int, seed: int
                     ) -> list[tuple[FeatureDataset, FeatureDataset]]:
    """Stratified k-fold partition: ``k`` (fit, held-out) pairs.

    Every row is held out exactly once; each class is dealt round-robin
    over the folds after a seeded shuffle.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(len(ds), dtype=int)
    for cls in (NEGATIVE, POSITIVE):
        idx = np.flatnonzero(ds.labels == cls)
        if len(idx) < k:
            raise ValueError(f"class {cls} has {len(idx)} rows; {k} folds need at least {k}")
        fold_of[rng.permutation(idx)] = np.arange(len(idx)) % k
    return [(ds.subset(np.flatnonzero(fold_of != f)), ds.subset(np.flatnonzero(fold_of == f)))
            for f in range(k)]


def subsample_to_ratio(ds: FeatureDataset, pos_to_neg: tuple[float, float], seed: int
                       ) -> FeatureDataset:
    """Keep the scarcer side whole and randomly thin the other to ``pos:neg``."""
    p, q = pos_to_neg
    if p <= 0 or q <= 0:
        raise ValueError("ratio terms must be positive")
    pos = np.flatnonzero(ds.labels == POSITIVE)
    neg = np.flatnonzero(ds.labels == NEGATIVE)
    rng = np.random.default_rng(seed)
    want_neg = int(round(len(pos) * q / p))
    if len(pos) > 0 and want_neg <= len(neg):
        keep = np.concatenate([pos, rng.choice(neg, want_neg, replace=False)])
    else:
        want_pos = int(round(len(neg) * p / q))
        if len(neg) == 0 or not 1 <= want_pos <= len(pos):
            raise ValueError(
                f"cannot realize {p:g}:{q:g} from {len(pos)} positives and {len(neg)} negatives")
        keep = np.concatenate([rng.choice(pos, want_pos, replace=False), neg])
    return ds.subset(np.sort(keep))
