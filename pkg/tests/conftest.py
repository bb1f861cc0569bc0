import numpy as np
import pytest

from mpru.core import PredictionSet


def random_simplex(rng, n, size, alpha=1.0):
    return rng.dirichlet(np.full(n, alpha), size=size)


def make_set(rng, n, count, forget_class=0, forget_frac=0.3, ids_prefix="r"):
    """Random prediction set whose forget-class rows favor the forget class."""
    probs = rng.dirichlet(np.full(n, 0.6), size=count)
    labels = rng.integers(0, n, size=count)
    n_forget = max(1, int(count * forget_frac))
    labels[:n_forget] = forget_class
    boost = probs[:n_forget].copy()
    boost[:, forget_class] += 3.0
    probs[:n_forget] = boost / boost.sum(axis=1)[:, None]
    return PredictionSet.from_arrays(
        ids=[f"{ids_prefix}{i:05d}" for i in range(count)],
        true_labels=labels,
        probs=probs,
        label_space=range(n),
        n_labels=n,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
