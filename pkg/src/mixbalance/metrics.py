"""Confusion-matrix counts and the G-mean score."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fn: int
    fp: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fn, self.fp, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def tpr(self) -> float:
        return self.tp / (self.tp + self.fn)

    @property
    def tnr(self) -> float:
        return self.tn / (self.tn + self.fp)

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / (self.tp + self.fn + self.fp + self.tn)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(tpr=self.tpr, tnr=self.tnr, g_mean=g_mean(self))
        return d


def confusion_matrix(y_true, y_pred) -> ConfusionMatrix:
    """Count outcomes with 1 (failure) as the positive class."""
    t = np.asarray(y_true).ravel()
    p = np.asarray(y_pred).ravel()
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.size} true labels vs {p.size} predictions")
    t = t == 1
    p = p == 1
    return ConfusionMatrix(
        tp=int(np.sum(t & p)),
        fn=int(np.sum(t & ~p)),
        fp=int(np.sum(~t & p)),
        tn=int(np.sum(~t & ~p)),
    )


def g_mean(cm: ConfusionMatrix) -> float:
    """sqrt(TPR * TNR). Undefined when either class is absent."""
    if cm.tp + cm.fn == 0 or cm.tn + cm.fp == 0:
        raise ValueError("g_mean needs both classes present in y_true")
    return math.sqrt(cm.tpr * cm.tnr)


def score(y_true, y_pred) -> dict:
    """Metric bundle: counts, rates, G-mean and accuracy."""
    cm = confusion_matrix(y_true, y_pred)
    d = cm.to_dict()
    d["accuracy"] = cm.accuracy
    return d
