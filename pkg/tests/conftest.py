"""Shared builders for randomized test problems."""

import numpy as np
import pytest

from efsim import ClientProblem, Dataset, make_global_problem


def random_client(rng, kind, d=5, m=7, lam=0.3):
    features = rng.standard_normal((m, d))
    if kind == "logreg_ncvx":
        labels = np.sign(rng.standard_normal(m))
        labels[labels == 0] = 1.0
    else:
        labels = rng.standard_normal(m)
    return ClientProblem(kind=kind, data=Dataset(features, labels), lam=lam)


def random_problem(seed, n=4, d=5, m=7, kind="linreg_ncvx", lam=0.3):
    rng = np.random.default_rng(seed)
    return make_global_problem([random_client(rng, kind, d=d, m=m, lam=lam) for _ in range(n)])


def disjoint_support_problem(seed, n=6, per=2, rows=4):
    """Clients whose features (hence gradients) live on disjoint coordinates."""
    rng = np.random.default_rng(seed)
    d = n * per
    x_sol = rng.standard_normal(d)
    clients = []
    for i in range(n):
        cols = np.arange(per * i, per * (i + 1))
        features = np.zeros((rows, d))
        features[:, cols] = rng.standard_normal((rows, per)) * (1.0 + i)
        clients.append(
            ClientProblem(kind="linreg_l2", data=Dataset(features, features @ x_sol), lam=0.0)
        )
    return make_global_problem(clients)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
