import numpy as np
import pytest

from qockit.hilbert import Model
from qockit.model import build_default_model


@pytest.fixture(scope="session")
def default_model():
    return build_default_model()


@pytest.fixture
def two_level():
    """Degenerate two-level model with unit coupling."""
    return Model(
        energies=(np.array([0.0 + 0j]), np.array([0.0 + 0j])),
        couplings=(np.array([[1.0]]),),
        labels=(("a:0",), ("b:0",)),
    )


@pytest.fixture
def small_model():
    """Three-manifold toy with 2+3+2 levels and mild anharmonicity."""
    rng = np.random.default_rng(7)
    e1 = np.array([0.0, 0.011], dtype=complex)
    e2 = np.array([0.5, 0.512, 0.523], dtype=complex)
    e3 = np.array([1.0, 1.009], dtype=complex)
    c12 = rng.normal(size=(2, 3)) * 0.3
    c23 = rng.normal(size=(3, 2)) * 0.3
    return Model(
        energies=(e1, e2, e3),
        couplings=(c12, c23),
        labels=(("m1:v0", "m1:v1"), ("m2:v0", "m2:v1", "m2:v2"),
                ("m3:v0", "m3:v1")),
    )
