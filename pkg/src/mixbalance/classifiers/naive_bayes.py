from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._common import check_width, require_both_classes

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def gaussian_density(x, mean, std):
    """Normal pdf, the per-feature class-conditional likelihood."""
    x, mean, std = np.asarray(x, float), np.asarray(mean, float), np.asarray(std, float)
    return np.exp(-((x - mean) ** 2) / (2.0 * std ** 2)) / np.sqrt(2.0 * math.pi * std ** 2)


@dataclass(frozen=True, eq=False)
class GaussianNBModel:
    """Row 0 of ``mean``/``std`` is the negative class, row 1 the positive."""

    mean: np.ndarray
    std: np.ndarray
    prior: np.ndarray
    n_features: int

    family = "gaussian_nb"

    def joint_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        X = check_width(X, self.n_features)
        out = np.empty((len(X), 2))
        for c in (0, 1):
            z = (X - self.mean[c]) / self.std[c]
            ll = -0.5 * z * z - np.log(self.std[c]) - LOG_SQRT_2PI
            out[:, c] = math.log(self.prior[c]) + ll.sum(axis=1)
        return out

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        jll -= jll.max(axis=1, keepdims=True)
        p = np.exp(jll)
        return p / p.sum(axis=1, keepdims=True)

    def predict(self, X: np.ndarray) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        return (jll[:, 1] >= jll[:, 0]).astype(np.int64)

    def to_dict(self) -> dict:
        return {"family": self.family, "n_features": self.n_features,
                "mean": self.mean.tolist(), "std": self.std.tolist(),
                "prior": self.prior.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> GaussianNBModel:
        return cls(np.array(d["mean"]), np.array(d["std"]), np.array(d["prior"]), d["n_features"])


def fit_gaussian_nb(train, spec) -> GaussianNBModel:
    require_both_classes(train, "Gaussian naive Bayes")
    floor = spec.params["variance_floor"]
    X, y = train.rows, train.labels
    mean = np.stack([X[y == c].mean(axis=0) for c in (0, 1)])
    var = np.stack([X[y == c].var(axis=0) for c in (0, 1)])
    std = np.sqrt(np.maximum(var, floor))
    n_pos = int(y.sum())
    prior = np.array([len(y) - n_pos, n_pos], dtype=float) / len(y)
    return GaussianNBModel(mean, std, prior, X.shape[1])
