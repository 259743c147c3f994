"""Fully connected network (tanh hidden layers, softmax output) trained by SGD."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._common import check_width


def init_params(sizes: list[int], rng: np.random.Generator) -> list[np.ndarray]:
    """Glorot-uniform weights, zero biases; returns [W1, b1, W2, b2, ...]."""
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        params.append(np.zeros(fan_out))
    return params


def forward(params: list[np.ndarray], X: np.ndarray):
    """Returns (class probabilities, cached activations for backprop)."""
    acts = [X]
    h = X
    n_layers = len(params) // 2
    for k in range(n_layers):
        z = h @ params[2 * k] + params[2 * k + 1]
        if k < n_layers - 1:
            h = np.tanh(z)
            acts.append(h)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True), acts


def cross_entropy(probs: np.ndarray, y: np.ndarray) -> float:
    return float(-np.mean(np.log(np.clip(probs[np.arange(len(y)), y], 1e-300, None))))


def loss_and_grads(params: list[np.ndarray], X: np.ndarray, y: np.ndarray):
    """Mean cross-entropy over the batch and its gradient for every parameter."""
    probs, acts = forward(params, X)
    n = len(y)
    loss = cross_entropy(probs, y)
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads = [None] * len(params)
    for k in range(len(params) // 2 - 1, -1, -1):
        grads[2 * k] = acts[k].T @ delta
        grads[2 * k + 1] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ params[2 * k].T) * (1.0 - acts[k] ** 2)
    return loss, grads


@dataclass(frozen=True, eq=False)
class MlpModel:
    params: list[np.ndarray]
    loss_history: list[float] = field(default_factory=list)

    family = "mlp"

    @property
    def n_features(self) -> int:
        return self.params[0].shape[0]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.params[0].shape[0]] + [W.shape[1] for W in self.params[0::2]]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return forward(self.params, check_width(X, self.n_features))[0]

    def predict(self, X: np.ndarray) -> np.ndarray:
        p = self.predict_proba(X)
        return (p[:, 1] >= p[:, 0]).astype(np.int64)

    def to_dict(self) -> dict:
        return {"family": self.family, "params": [p.tolist() for p in self.params],
                "loss_history": list(self.loss_history)}

    @classmethod
    def from_dict(cls, d: dict) -> MlpModel:
        return cls([np.array(p, dtype=float) for p in d["params"]], list(d["loss_history"]))


def fit_mlp(train, spec, seed: int = 0) -> MlpModel:
    if len(train) == 0:
        raise ValueError("cannot fit an MLP on an empty dataset")
    hp = spec.params
    X, y = train.rows, train.labels
    rng = np.random.default_rng(seed)
    params = init_params([X.shape[1], *hp["hidden"], hp["n_outputs"]], rng)
    lr, batch = hp["learning_rate"], hp["batch_size"]
    history = []
    n = len(y)
    for epoch in range(hp["epochs"]):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            _, grads = loss_and_grads(params, X[idx], y[idx])
            for p, g in zip(params, grads):
                p -= lr * g
        loss = cross_entropy(forward(params, X)[0], y)
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite training loss at epoch {epoch}")
        history.append(float(loss))
    return MlpModel(params, history)
