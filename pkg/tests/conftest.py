import os

import numpy as np
import pytest

from adenet.core import Dataset, center


def pytest_collection_modifyitems(config, items):
    if os.getenv("ADENET_SLOW", "0") == "1":
        return
    skip = pytest.mark.skip(reason="slow Monte Carlo check; set ADENET_SLOW=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    from adenet.storage import cache
    monkeypatch.setattr(cache, "CACHE_DIR", str(tmp_path / "cache"))
    monkeypatch.setattr(cache, "CACHE_DISABLE", False)


def random_instance(seed: int, n: int = 30, p: int = 6, sparsity: int = 3, noise: float = 1.0) -> Dataset:
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:sparsity] = rng.uniform(1.0, 3.0, sparsity) * rng.choice((-1.0, 1.0), sparsity)
    y = X @ beta + noise * rng.standard_normal(n)
    return center(Dataset(y, X))


def hadamard(n: int) -> np.ndarray:
    H = np.array([[1.0]])
    while H.shape[0] < n:
        H = np.block([[H, H], [H, -H]])
    return H


def orthogonal_instance(seed: int, n: int = 16, p: int = 5) -> Dataset:
    """X'X = n I with centered +-1 columns."""
    X = hadamard(n)[:, 1:p + 1]
    rng = np.random.default_rng(seed)
    beta = np.zeros(p)
    beta[:2] = (3.0, -2.0)
    return center(Dataset(X @ beta + rng.standard_normal(n), X))


@pytest.fixture
def instance():
    return random_instance(0)
