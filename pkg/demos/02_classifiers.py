"""
Five classifiers behind one interface
=====================================

Every family is fit with ``fit_classifier(spec, dataset, seed)`` and
queried with ``predict(model, rows)``. Defaults follow the experiment
table (two 30-unit hidden layers, RBF SVM with C=100 and gamma=1, depth-9
tree, 100-tree forest).
"""

import json

import numpy as np

from mixbalance.classifiers import FAMILIES, ClassifierSpec, fit_classifier, model_from_dict, predict
from mixbalance.fixture import make_fixture
from mixbalance.data import apply_normalizer, fit_normalizer, stratified_split
from mixbalance.metrics import score

# a small fixture, split and scaled into [-1, 1]
base = make_fixture(positives=150, negatives=1500, seed=3)
train, test = stratified_split(base, 0.3, seed=0)
norm = fit_normalizer(train)
train, test = apply_normalizer(norm, train), apply_normalizer(norm, test)

for family in FAMILIES:
    params = {"epochs": 40} if family == "mlp" else {}
    model = fit_classifier(ClassifierSpec(family, params), train, seed=0)
    s = score(test.labels, predict(model, test.rows))
    print(f"{family:14s} TPR {s['tpr']:.3f}  TNR {s['tnr']:.3f}  G-mean {s['g_mean']:.3f}")

# models serialize to plain JSON and come back identical
tree = fit_classifier(ClassifierSpec("decision_tree"), train, seed=0)
clone = model_from_dict(json.loads(json.dumps(tree.to_dict())))
print("round trip agrees:", bool((predict(clone, test.rows) == predict(tree, test.rows)).all()))
