"""Synthetic minority-class pools.

Three lightweight statistical generators give pools with different
distributional biases:

* ``gaussian_copula``: empirical marginals tied together by a Gaussian
  copula fitted on normal scores.
* ``gaussian_mixture``: a k-component full-covariance mixture fitted by EM.
* ``interpolator``: SMOTE-style points on segments between a stored row and
  one of its k nearest neighbours.

Pools produced elsewhere (e.g. by a tabular GAN) can be loaded from CSV as
long as they are already in the normalized [-1, 1] feature space.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import stats
from scipy.special import logsumexp

from .data import DEFAULT_SCHEMA, POSITIVE, FeatureDataset, FeatureSchema, SchemaError

KINDS = ("gaussian_copula", "gaussian_mixture", "interpolator", "external")

DEFAULT_CONFIG = {
    "gaussian_copula": {},
    "gaussian_mixture": {"n_components": 3, "max_iter": 200, "tol": 1e-8},
    "interpolator": {"k_neighbors": 5},
}

REG_COVAR = 1e-6


class PoolError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SyntheticPool:
    """Positive-class synthetic rows in normalized feature space."""

    rows: np.ndarray
    source: str
    note: str = ""
    schema: FeatureSchema = DEFAULT_SCHEMA

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != len(self.schema):
            raise PoolError(f"pool rows must have {len(self.schema)} features, got shape {rows.shape}")
        if not np.isfinite(rows).all():
            raise PoolError("pool contains non-finite values")
        if rows.size and (rows.min() < -1.0 or rows.max() > 1.0):
            raise PoolError("pool values must lie in [-1, 1]")
        if self.source not in KINDS:
            raise PoolError(f"unknown pool source {self.source!r}")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def labels(self) -> np.ndarray:
        return np.full(len(self), POSITIVE, dtype=np.int64)

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.rows, columns=self.schema.names)
        df["label"] = POSITIVE
        return df

    def save(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


# --- generator models -------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CopulaModel:
    sorted_values: np.ndarray   # (m, d) per-feature sorted training values
    correlation: np.ndarray     # (d, d) correlation of normal scores

    kind = "gaussian_copula"

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        m, d = self.sorted_values.shape
        L = np.linalg.cholesky(self.correlation + REG_COVAR * np.eye(d))
        z = rng.standard_normal((n, d)) @ L.T
        u = stats.norm.cdf(z / np.sqrt(1.0 + REG_COVAR))
        grid = np.arange(1, m + 1) / (m + 1)
        return np.column_stack([np.interp(u[:, j], grid, self.sorted_values[:, j])
                                for j in range(d)])


@dataclass(frozen=True, eq=False)
class MixtureModel:
    weights: np.ndarray   # (k,)
    means: np.ndarray     # (k, d)
    covariances: np.ndarray  # (k, d, d)
    log_likelihood: float

    kind = "gaussian_mixture"

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        k, d = self.means.shape
        comp = rng.choice(k, size=n, p=self.weights)
        eps = rng.standard_normal((n, d))
        out = np.empty((n, d))
        for c in range(k):
            sel = comp == c
            L = np.linalg.cholesky(self.covariances[c] + REG_COVAR * np.eye(d))
            out[sel] = self.means[c] + eps[sel] @ L.T
        return out


@dataclass(frozen=True, eq=False)
class InterpolatorModel:
    rows: np.ndarray       # (m, d) stored minority rows
    neighbors: np.ndarray  # (m, k) indices of each row's nearest stored rows

    kind = "interpolator"

    @property
    def k(self) -> int:
        return self.neighbors.shape[1]

    def sample_with_parents(self, n: int, rng: np.random.Generator):
        """Samples plus the (a, b) parent indices each one interpolates."""
        a = rng.integers(0, len(self.rows), size=n)
        b = self.neighbors[a, rng.integers(0, self.k, size=n)]
        gap = rng.random(n)[:, None]
        return self.rows[a] + gap * (self.rows[b] - self.rows[a]), a, b

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.sample_with_parents(n, rng)[0]


GeneratorModel = CopulaModel | MixtureModel | InterpolatorModel


def _fit_copula(X: np.ndarray, cfg: dict, rng) -> CopulaModel:
    m, d = X.shape
    scores = stats.norm.ppf(stats.rankdata(X, axis=0) / (m + 1))
    sd = scores.std(axis=0)
    centered = scores - scores.mean(axis=0)
    varying = sd > 0
    corr = np.eye(d)
    if varying.any():
        c = centered[:, varying]
        cov = c.T @ c / m
        s = np.sqrt(np.diag(cov))
        sub = cov / np.outer(s, s)
        np.fill_diagonal(sub, 1.0)
        corr[np.ix_(varying, varying)] = np.clip(sub, -1.0, 1.0)
    return CopulaModel(np.sort(X, axis=0), corr)


def _fit_mixture(X: np.ndarray, cfg: dict, rng: np.random.Generator) -> MixtureModel:
    m, d = X.shape
    k = cfg["n_components"]
    # k-means++ seeding, then hard assignment as the first responsibilities
    centers = [X[rng.integers(m)]]
    for _ in range(1, k):
        d2 = np.min([((X - c) ** 2).sum(1) for c in centers], axis=0)
        total = d2.sum()
        p = d2 / total if total > 0 else np.full(m, 1.0 / m)
        centers.append(X[rng.choice(m, p=p)])
    dist = np.stack([((X - c) ** 2).sum(1) for c in centers], axis=1)
    resp = np.zeros((m, k))
    resp[np.arange(m), dist.argmin(1)] = 1.0

    prev = -np.inf
    ll = -np.inf
    for _ in range(max(cfg["max_iter"], 1)):
        nk = resp.sum(0) + 10 * np.finfo(float).eps
        weights = nk / m
        means = (resp.T @ X) / nk[:, None]
        covs = np.empty((k, d, d))
        for c in range(k):
            diff = X - means[c]
            covs[c] = (resp[:, c, None] * diff).T @ diff / nk[c] + REG_COVAR * np.eye(d)
        log_p = np.empty((m, k))
        for c in range(k):
            log_p[:, c] = np.log(weights[c]) + stats.multivariate_normal.logpdf(
                X, means[c], covs[c], allow_singular=True)
        norm = logsumexp(log_p, axis=1)
        ll = float(norm.mean())
        resp = np.exp(log_p - norm[:, None])
        if abs(ll - prev) < cfg["tol"]:
            break
        prev = ll
    return MixtureModel(weights, means, covs, ll)


def _fit_interpolator(X: np.ndarray, cfg: dict, rng) -> InterpolatorModel:
    k = cfg["k_neighbors"]
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(-1)
    np.fill_diagonal(d2, np.inf)
    neighbors = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return InterpolatorModel(X.copy(), neighbors)


def _min_rows(kind: str, cfg: dict) -> int:
    if kind == "gaussian_copula":
        return 3
    if kind == "gaussian_mixture":
        return cfg["n_components"] + 1
    return cfg["k_neighbors"] + 1


def fit_generator(kind: str, minority: FeatureDataset, config: dict | None = None,
                  seed: int = 0) -> GeneratorModel:
    """Fit one generator on positive (failure) rows only."""
    if kind not in DEFAULT_CONFIG:
        raise ValueError(f"cannot fit generator kind {kind!r}; choose from {list(DEFAULT_CONFIG)}")
    cfg = dict(DEFAULT_CONFIG[kind])
    unknown = set(config or {}) - set(cfg)
    if unknown:
        raise ValueError(f"unknown {kind} settings: {sorted(unknown)}")
    cfg.update(config or {})
    if (minority.labels != POSITIVE).any():
        raise ValueError("generators are fit on positive rows only")
    need = _min_rows(kind, cfg)
    if len(minority) < need:
        raise ValueError(f"{kind} needs at least {need} minority rows, got {len(minority)}")
    rng = np.random.default_rng(seed)
    fit = {"gaussian_copula": _fit_copula, "gaussian_mixture": _fit_mixture,
           "interpolator": _fit_interpolator}[kind]
    return fit(minority.rows, cfg, rng)


def sample_pool(model: GeneratorModel, n: int, seed: int, schema: FeatureSchema = DEFAULT_SCHEMA
                ) -> SyntheticPool:
    if not isinstance(model, (CopulaModel, MixtureModel, InterpolatorModel)):
        raise TypeError("sample_pool needs a fitted generator model")
    if n < 1:
        raise ValueError("pool size must be at least 1")
    rows = np.clip(model.sample(n, np.random.default_rng(seed)), -1.0, 1.0)
    return SyntheticPool(rows, model.kind, f"{model.kind} seed={seed} n={n}", schema)


def load_external_pool(path, schema: FeatureSchema = DEFAULT_SCHEMA) -> SyntheticPool:
    """Load pre-normalized synthetic positives (e.g. tabular-GAN output) from CSV."""
    df = pd.read_csv(path, float_precision="round_trip")
    cols = list(df.columns)
    has_label = "label" in cols
    feature_cols = [c for c in cols if c != "label"]
    if len(feature_cols) != len(schema):
        raise SchemaError(f"{path}: expected {len(schema)} feature columns, found {len(feature_cols)}")
    if feature_cols != schema.names:
        raise SchemaError(f"{path}: feature columns must be {schema.names}")
    if has_label:
        bad = np.flatnonzero(df["label"].to_numpy() != POSITIVE)
        if bad.size:
            raise PoolError(f"{path}: row {int(bad[0])} has a non-positive label")
    values = df[feature_cols].apply(pd.to_numeric, errors="coerce").to_numpy(float)
    outside = ~np.isfinite(values) | (values < -1.0) | (values > 1.0)
    if outside.any():
        r, c = np.argwhere(outside)[0]
        raise PoolError(f"{path}: row {int(r)} column {feature_cols[c]} is outside [-1, 1]")
    return SyntheticPool(values, "external", f"loaded from {Path(path).name}", schema)


@dataclass
class PoolQualityReport:
    """Reference-minus-pool differences in per-feature mean and stddev."""

    size: int
    mean_delta: list[float]
    std_delta: list[float]
    out_of_range_fraction: float
    source: str = ""
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"size": self.size, "source": self.source, "mean_delta": self.mean_delta,
                "std_delta": self.std_delta, "out_of_range_fraction": self.out_of_range_fraction,
                **self.extra}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def validate_pool(pool: SyntheticPool, reference: FeatureDataset) -> PoolQualityReport:
    if len(pool) == 0:
        raise PoolError("cannot validate an empty pool")
    ref = reference.rows
    oor = float(np.mean((pool.rows < -1.0) | (pool.rows > 1.0)))
    return PoolQualityReport(
        size=len(pool),
        mean_delta=(ref.mean(0) - pool.rows.mean(0)).tolist(),
        std_delta=(ref.std(0) - pool.rows.std(0)).tolist(),
        out_of_range_fraction=oor,
        source=pool.source,
    )
