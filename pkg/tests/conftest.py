import numpy as np
import pytest

from drmean.kernels import expit
from drmean.models import Dataset


@pytest.fixture
def d4():
    """Canonical 4-observation fixture with externally supplied nuisances."""
    return {
        "t": np.array([1, 1, 1, 0]),
        "y": np.array([2.0, 4.0, 6.0, np.nan]),
        "pi": np.array([0.5, 0.8, 0.4, 0.25]),
        "m": np.array([3.0, 3.0, 5.0, 7.0]),
    }


@pytest.fixture
def d4_dataset(d4):
    return Dataset(t=d4["t"], y=d4["y"], columns={})


def random_mar_dataset(seed, n=200, q=3, beta0=5.0, sigma=1.0):
    """Small MAR dataset with latent covariates z1..zq, for property tests."""
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((n, q))
    alpha = rng.normal(scale=0.6, size=q)
    pi0 = expit(0.3 + u @ alpha)
    t = (rng.random(n) < pi0).astype(np.int8)
    if t.sum() < q + 2 or t.sum() > n - 2:
        return random_mar_dataset(seed + 1, n, q, beta0, sigma)
    beta = rng.normal(size=q)
    y = beta0 + u @ beta + sigma * rng.standard_normal(n)
    y[t == 0] = np.nan
    cols = {f"z{j + 1}": u[:, j] for j in range(q)}
    return Dataset(t=t, y=y, columns=cols)
