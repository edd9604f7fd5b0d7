import numpy as np
import pytest

from robust_mpc.statespace import LinearModel


def scalar_model(a=1.0, b=0.0, c=1.0, g=1.0, d=1.0):
    """x' = a x + b u + g v1,  y = c x + d v2."""
    return LinearModel(A=[[a]], B=[[b]], C=[[c]], G=[[g, 0.0]], D=[[0.0, d]])


def random_model(rng, n, q=1, p=1, stable=True):
    A = rng.standard_normal((n, n))
    if stable:
        A *= 0.95 / max(np.abs(np.linalg.eigvals(A)).max(), 1e-9)
    B = rng.standard_normal((n, q))
    C = rng.standard_normal((p, n))
    G = np.zeros((n, n + p))
    G[:, :n] = rng.standard_normal((n, n)) * rng.uniform(0.05, 1.0)
    D = np.zeros((p, n + p))
    D[:, n:] = np.eye(p) * rng.uniform(0.1, 1.0) + np.tril(rng.standard_normal((p, p)), -1) * 0.1
    return LinearModel(A=A, B=B, C=C, G=G, D=D)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
