from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._common import check_width
from .tree import DecisionTreeModel, grow_tree, resolve_max_features


@dataclass(frozen=True, eq=False)
class RandomForestModel:
    trees: list[DecisionTreeModel]
    tree_seeds: list[int]
    max_features: int
    n_features: int

    family = "random_forest"

    def votes(self, X: np.ndarray) -> np.ndarray:
        """Number of trees voting positive, per row."""
        X = check_width(X, self.n_features)
        return np.sum([t.predict(X) for t in self.trees], axis=0, dtype=np.int64).reshape(len(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        # half or more of the trees voting positive predicts positive
        return (2 * self.votes(X) >= len(self.trees)).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "n_features": self.n_features,
            "max_features": self.max_features,
            "tree_seeds": list(self.tree_seeds),
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> RandomForestModel:
        return cls([DecisionTreeModel.from_dict(t) for t in d["trees"]], d["tree_seeds"],
                   d["max_features"], d["n_features"])


def fit_random_forest(train, spec, seed: int = 0) -> RandomForestModel:
    """Bagged trees; each split looks at ``max_features`` random features."""
    if len(train) == 0:
        raise ValueError("cannot fit a random forest on an empty dataset")
    hp = spec.params
    X, y = train.rows, train.labels
    n, d = X.shape
    k = resolve_max_features(hp["max_features"], d)
    seeds = [int(s.generate_state(1)[0]) for s in
             np.random.SeedSequence(seed).spawn(hp["n_estimators"])]
    trees = []
    for s in seeds:
        rng = np.random.default_rng(s)
        if hp["bootstrap"]:
            idx = rng.integers(0, n, size=n)
            Xb, yb = X[idx], y[idx]
        else:
            Xb, yb = X, y
        trees.append(grow_tree(Xb, yb, hp["max_depth"], k, rng))
    return RandomForestModel(trees, seeds, k, d)
