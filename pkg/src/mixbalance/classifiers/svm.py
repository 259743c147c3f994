"""Soft-margin kernel SVM trained by sequential minimal optimization.

The dual is solved in the minimization form

    min_a  0.5 a'Qa - sum(a),   Q_ij = y_i y_j k(x_i, x_j)
    s.t.   0 <= a_i <= C,       sum_i y_i a_i = 0

with labels mapped to y in {-1, +1}. Working pairs are picked by maximal
violation for the first index and second-order gain for the second; the
loop stops once the KKT gap ``m(a) - M(a)`` drops below ``tol``.
"""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from ._common import ConvergenceError, check_width, require_both_classes

TAU = 1e-12
FULL_KERNEL_LIMIT = 4000


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


class _KernelRows:
    """Kernel matrix rows: precomputed for small n, LRU-cached otherwise."""

    def __init__(self, X: np.ndarray, gamma: float, cache_rows: int = 2000):
        self.X, self.gamma = X, gamma
        self.sq = (X * X).sum(1)
        self.full = rbf_kernel(X, X, gamma) if len(X) <= FULL_KERNEL_LIMIT else None
        self.cache: OrderedDict[int, np.ndarray] = OrderedDict()
        self.cache_rows = cache_rows

    def __getitem__(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[i]
        row = self.cache.get(i)
        if row is None:
            d = self.sq + self.sq[i] - 2.0 * (self.X @ self.X[i])
            row = np.exp(-self.gamma * np.maximum(d, 0.0))
            self.cache[i] = row
            if len(self.cache) > self.cache_rows:
                self.cache.popitem(last=False)
        else:
            self.cache.move_to_end(i)
        return row


@dataclass(frozen=True, eq=False)
class SvmModel:
    support_vectors: np.ndarray
    dual_coef: np.ndarray      # alpha_i for each support vector, in (0, C]
    sv_labels: np.ndarray      # +1 / -1
    bias: float
    gamma: float
    C: float
    iterations: int
    kkt_gap: float

    family = "svm"

    @property
    def n_features(self) -> int:
        return self.support_vectors.shape[1]

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = check_width(X, self.n_features)
        if len(X) == 0:
            return np.zeros(0)
        K = rbf_kernel(X, self.support_vectors, self.gamma)
        return K @ (self.dual_coef * self.sv_labels) + self.bias

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.decision_function(X) >= 0.0).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "support_vectors": self.support_vectors.tolist(),
            "dual_coef": self.dual_coef.tolist(),
            "sv_labels": self.sv_labels.tolist(),
            "bias": self.bias, "gamma": self.gamma, "C": self.C,
            "iterations": self.iterations, "kkt_gap": self.kkt_gap,
        }

    @classmethod
    def from_dict(cls, d: dict) -> SvmModel:
        sv = np.array(d["support_vectors"], dtype=float)
        return cls(sv.reshape(len(d["dual_coef"]), -1) if sv.size == 0 else sv,
                   np.array(d["dual_coef"]), np.array(d["sv_labels"], dtype=float),
                   d["bias"], d["gamma"], d["C"], d["iterations"], d["kkt_gap"])


@dataclass
class DualSolution:
    alpha: np.ndarray
    grad: np.ndarray
    rho: float
    iterations: int
    gap: float


def solve_dual(X: np.ndarray, y: np.ndarray, C: float, gamma: float,
               tol: float = 1e-3, max_iter: int = 100_000) -> DualSolution:
    """SMO on the RBF dual. ``y`` must be in {-1, +1}."""
    n = len(y)
    K = _KernelRows(X, gamma)
    diag = np.ones(n)  # rbf: k(x, x) = 1
    alpha = np.zeros(n)
    grad = -np.ones(n)
    pos = y > 0
    gap = np.inf
    it = 0
    while True:
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        viol = -y * grad
        m_up = np.where(up, viol, -np.inf)
        m_low = np.where(low, viol, np.inf)
        i = int(np.argmax(m_up))
        gap = m_up[i] - m_low.min()
        if gap < tol:
            break
        if it >= max_iter:
            raise ConvergenceError(
                f"SMO hit {max_iter} pair updates with KKT violation {gap:.3g} (tol {tol:g})")
        Ki = K[i]
        b = m_up[i] - viol
        cand = low & (b > 0)
        a = diag[i] + diag - 2.0 * Ki
        a = np.where(a > 0, a, TAU)
        obj = np.where(cand, -(b * b) / a, np.inf)
        j = int(np.argmin(obj))
        Kj = K[j]
        yi, yj = y[i], y[j]
        ai_old, aj_old = alpha[i], alpha[j]
        Qij = yi * yj * Ki[j]
        if yi != yj:
            quad = max(diag[i] + diag[j] + 2.0 * Qij, TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = ai_old - aj_old
            ai, aj = ai_old + delta, aj_old + delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            quad = max(diag[i] + diag[j] - 2.0 * Qij, TAU)
            delta = (grad[i] - grad[j]) / quad
            total = ai_old + aj_old
            ai, aj = ai_old - delta, aj_old + delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        grad += y * (yi * (ai - ai_old) * Ki + yj * (aj - aj_old) * Kj)
        it += 1

    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if free.any():
        rho = float(yg[free].mean())
    else:
        # bounds from the at-bound multipliers
        ub = np.where((pos & (alpha <= 0)) | (~pos & (alpha >= C)), yg, np.inf).min()
        lb = np.where((pos & (alpha >= C)) | (~pos & (alpha <= 0)), yg, -np.inf).max()
        rho = float((ub + lb) / 2.0)
    return DualSolution(alpha, grad, rho, it, float(gap))


def fit_svm(train, spec, seed: int = 0) -> SvmModel:
    """RBF-kernel SVM. The solver is deterministic, so ``seed`` is unused."""
    require_both_classes(train, "SVM")
    hp = spec.params
    if hp["kernel"] != "rbf":
        raise ValueError(f"unsupported kernel {hp['kernel']!r}")
    X = train.rows
    y = np.where(train.labels == 1, 1.0, -1.0)
    sol = solve_dual(X, y, hp["C"], hp["gamma"], hp["tol"], hp["max_iter"])
    sv = sol.alpha > 0
    return SvmModel(X[sv].copy(), sol.alpha[sv].copy(), y[sv], -sol.rho,
                    hp["gamma"], hp["C"], sol.iterations, sol.gap)
