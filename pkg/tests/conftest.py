import numpy as np
import pytest

from driftpec.quantum import DensityMatrix, KrausChannel


def random_kraus_channel(rng, dim=2, n_ops=3) -> KrausChannel:
    """Random CPTP channel: Gaussian blocks whitened so sum K†K = I."""
    blocks = [rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
              for _ in range(n_ops)]
    gram = sum(b.conj().T @ b for b in blocks)
    vals, vecs = np.linalg.eigh(gram)
    inv_sqrt = (vecs * (1.0 / np.sqrt(vals))) @ vecs.conj().T
    return KrausChannel(kraus_ops=tuple(b @ inv_sqrt for b in blocks))


def random_density_matrix(rng, dim=4) -> DensityMatrix:
    """Random full-rank state from a Wishart-style construction."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return DensityMatrix.from_matrix(g @ g.conj().T)


def random_simplex(rng, dim) -> np.ndarray:
    v = rng.dirichlet(np.ones(dim))
    return v / v.sum()


@pytest.fixture
def rng():
    return np.random.default_rng(20260811)
