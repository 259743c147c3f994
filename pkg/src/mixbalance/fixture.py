"""Synthetic SMART-like data for desk-scale runs.

Healthy and failed drives are two overlapping multivariate Gaussians in a
latent space, mapped to raw-looking attribute scales so the normalizer has
real work to do.
"""
from __future__ import annotations

import numpy as np

from .data import DEFAULT_SCHEMA, FeatureDataset

# rough magnitudes of the selected attributes (normalized values ~100,
# power-on hours in the tens of thousands, counters near zero)
_OFFSETS = np.array([115, 92, 100, 8, 80, 75, 100, 99, 24, 100, 4], dtype=float)
_SCALES = np.array([8, 2, 3, 40, 10, 9, 1.5, 2, 4, 2, 20], dtype=float)


def make_fixture(positives: int = 100, negatives: int = 10000, separation: float = 2.5,
                 positive_spread: float = 1.5, correlation: float = 0.3,
                 n_features: int = 11, seed: int = 0) -> FeatureDataset:
    """Two Gaussians whose means are ``separation`` Mahalanobis units apart.

    Failed drives get ``positive_spread`` times the healthy covariance.
    """
    if n_features != len(DEFAULT_SCHEMA):
        raise ValueError(f"the SMART schema has {len(DEFAULT_SCHEMA)} features")
    rng = np.random.default_rng(seed)
    cov = np.full((n_features, n_features), correlation) + (1 - correlation) * np.eye(n_features)
    L = np.linalg.cholesky(cov)
    direction = rng.normal(size=n_features)
    direction /= np.sqrt(direction @ np.linalg.solve(cov, direction))
    neg = rng.standard_normal((negatives, n_features)) @ L.T
    pos = separation * direction + np.sqrt(positive_spread) * (
        rng.standard_normal((positives, n_features)) @ L.T)
    latent = np.vstack([neg, pos])
    labels = np.r_[np.zeros(negatives, dtype=np.int64), np.ones(positives, dtype=np.int64)]
    perm = rng.permutation(len(labels))
    rows = _OFFSETS + _SCALES * latent[perm]
    return FeatureDataset(rows, labels[perm], DEFAULT_SCHEMA)
