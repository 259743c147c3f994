"""Five classifier families behind one fit/predict contract.

>>> spec = ClassifierSpec("decision_tree")
>>> spec.params["max_depth"]
9
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from ._common import ConvergenceError, check_width
from .forest import RandomForestModel, fit_random_forest
from .mlp import MlpModel, fit_mlp
from .naive_bayes import GaussianNBModel, fit_gaussian_nb, gaussian_density
from .svm import SvmModel, fit_svm
from .tree import DecisionTreeModel, fit_decision_tree

FAMILIES = ("mlp", "svm", "decision_tree", "gaussian_nb", "random_forest")

DEFAULT_HYPERPARAMETERS = {
    "mlp": {"hidden": [30, 30], "n_outputs": 2, "learning_rate": 0.01,
            "batch_size": 32, "epochs": 200},
    "svm": {"C": 100.0, "gamma": 1.0, "kernel": "rbf", "tol": 1e-3, "max_iter": 100_000},
    "decision_tree": {"max_depth": 9, "max_features": None},
    "gaussian_nb": {"variance_floor": 1e-9},
    "random_forest": {"n_estimators": 100, "max_features": "sqrt", "max_depth": None,
                      "bootstrap": True},
}

MODEL_TYPES = {cls.family: cls for cls in
               (MlpModel, SvmModel, DecisionTreeModel, GaussianNBModel, RandomForestModel)}


@dataclass(frozen=True)
class ClassifierSpec:
    """Family name plus hyperparameter overrides on top of the defaults."""

    family: str
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown classifier family {self.family!r}; choose from {FAMILIES}")
        unknown = set(self.hyperparameters) - set(DEFAULT_HYPERPARAMETERS[self.family])
        if unknown:
            raise ValueError(f"unknown {self.family} hyperparameters: {sorted(unknown)}")

    @property
    def params(self) -> dict:
        p = copy.deepcopy(DEFAULT_HYPERPARAMETERS[self.family])
        p.update(self.hyperparameters)
        return p

    def to_dict(self) -> dict:
        return {"family": self.family, "hyperparameters": dict(self.hyperparameters)}


def fit_classifier(spec: ClassifierSpec, train, seed: int = 0):
    if spec.family == "gaussian_nb":
        return fit_gaussian_nb(train, spec)
    fit = {"mlp": fit_mlp, "svm": fit_svm, "decision_tree": fit_decision_tree,
           "random_forest": fit_random_forest}[spec.family]
    return fit(train, spec, seed)


def predict(model, rows) -> np.ndarray:
    """Binary labels for ``rows``; raises on a feature-width mismatch."""
    check_width(rows, model.n_features)
    return np.asarray(model.predict(rows), dtype=np.int64)


def model_to_dict(model) -> dict:
    return model.to_dict()


def model_from_dict(d: dict):
    return MODEL_TYPES[d["family"]].from_dict(d)


__all__ = [
    "FAMILIES", "DEFAULT_HYPERPARAMETERS", "ClassifierSpec", "ConvergenceError",
    "DecisionTreeModel", "RandomForestModel", "GaussianNBModel", "MlpModel", "SvmModel",
    "fit_classifier", "fit_decision_tree", "fit_random_forest", "fit_gaussian_nb",
    "fit_mlp", "fit_svm", "predict", "model_to_dict", "model_from_dict", "gaussian_density",
]
