import numpy as np
import pytest

from seqrd import StateSpaceModel, scalar_model


@pytest.fixture
def memoryless_model():
    """IID observed scalar source: Y_t = V_t (state is identically zero)."""
    return scalar_model(a=0.0, b=0.0, c=1.0, g=1.0, x0_var=0.0)


@pytest.fixture
def ar1_model():
    return scalar_model(a=0.9, b=1.0, c=1.0, g=1.0)


@pytest.fixture
def two_mode_model():
    """Two IID observation channels with variances (2, 1); state is zero."""
    return StateSpaceModel(
        A=[[0.0]],
        B=[[0.0]],
        C=[[0.0], [0.0]],
        G=[[np.sqrt(2.0), 0.0], [0.0, 1.0]],
        x0_mean=[0.0],
        x0_cov=[[0.0]],
    )


def make_random_stable_model(rng: np.random.Generator) -> StateSpaceModel:
    """Random detectable, strictly stable model with m, p <= 3."""
    m = int(rng.integers(1, 4))
    p = int(rng.integers(1, 4))
    A = rng.normal(size=(m, m))
    radius = max(np.abs(np.linalg.eigvals(A)).max(), 1e-6)
    A *= rng.uniform(0.2, 0.85) / radius
    B = rng.normal(size=(m, m)) * rng.uniform(0.3, 1.0)
    C = rng.normal(size=(p, m))
    G = rng.normal(size=(p, p)) * 0.3 + np.eye(p) * rng.uniform(0.7, 1.5)
    return StateSpaceModel(A=A, B=B, C=C, G=G, x0_mean=np.zeros(m), x0_cov=np.eye(m))
