import numpy as np
import pytest

from mixbalance.data import DEFAULT_SCHEMA, FeatureDataset


def make_dataset(rows, labels, ids=None) -> FeatureDataset:
    return FeatureDataset(np.asarray(rows, float), np.asarray(labels), DEFAULT_SCHEMA, ids)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def blobs(rng):
    """Two separated Gaussian blobs in [-1, 1]^11, 60 negatives and 20 positives."""
    neg = np.clip(rng.normal(-0.3, 0.2, size=(60, 11)), -1, 1)
    pos = np.clip(rng.normal(0.4, 0.2, size=(20, 11)), -1, 1)
    return make_dataset(np.vstack([neg, pos]), np.r_[np.zeros(60), np.ones(20)])
