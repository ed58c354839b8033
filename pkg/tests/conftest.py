import numpy as np
import pytest

from snmtf.model import DataBundle, Factorization


def random_bundle(rng, n, N, scale=1.0):
    """Symmetric non-negative matrices with uniform entries."""
    mats = []
    for _ in range(N):
        r = rng.random((n, n)) * scale
        mats.append((r + r.T) / 2.0)
    return DataBundle.from_matrices(mats, label=f"random-{n}x{n}-N{N}")


def random_native_fact(rng, n, k, N, scale=1.0):
    g = rng.random((n, k)) * scale
    s_list = []
    for _ in range(N):
        s = rng.random((k, k)) * scale
        s_list.append((s + s.T) / 2.0)
    return Factorization(g, s_list)


def exact_fit_pair(rng, n, k, N, strictly_positive=True):
    """Bundle built from its own factorization, so SE(fact) == 0."""
    lo = 0.1 if strictly_positive else 0.0
    g = rng.uniform(lo, 1.0, (n, k))
    s_list = []
    r_list = []
    for _ in range(N):
        s = rng.uniform(lo, 1.0, (k, k))
        s = (s + s.T) / 2.0
        s_list.append(s)
        r_list.append((g @ s) @ g.T)
    bundle = DataBundle.from_matrices(r_list, label="exact-fit")
    return bundle, Factorization(g, s_list)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
