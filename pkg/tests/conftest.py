import numpy as np
import pytest

from proxyselect.core import Dataset


@pytest.fixture
def tiny_dataset() -> Dataset:
    """Five records with hand-checkable labels."""
    return Dataset(
        ids=np.array([10, 11, 12, 13, 14]),
        proxy=np.array([0.9, 0.7, 0.4, 0.2, 0.05]),
        labels=np.array([1, 1, 0, 1, 0]),
    )


def random_dataset(rng: np.random.Generator, size: int) -> Dataset:
    proxy = rng.random(size)
    labels = (rng.random(size) < proxy).astype(np.int8)
    return Dataset(np.arange(size), proxy, labels)
