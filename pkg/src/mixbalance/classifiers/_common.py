import numpy as np


class ConvergenceError(RuntimeError):
    """Iterative fit stopped before reaching its tolerance."""


def check_width(X, n_features: int) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1 and X.size == 0:
        X = X.reshape(0, n_features)
    if X.ndim != 2 or X.shape[1] != n_features:
        raise ValueError(f"expected rows of width {n_features}, got shape {X.shape}")
    return X


def majority_label(y) -> int:
    """Majority class; an exact tie goes to the positive (failure) class."""
    return int(2 * int(np.sum(y)) >= len(y)) if len(y) else 1


def require_both_classes(train, what: str) -> None:
    if train.n_positive == 0 or train.n_negative == 0:
        raise ValueError(f"{what} needs both classes in the training data")
