import numpy as np
import pytest

from qockit.errors import StructureError, UnknownLabelError
from qockit.hilbert import (
    Model,
    assemble_h0,
    assemble_hamiltonian,
    assemble_mu,
    expectation,
    is_hermitian,
    is_projector,
    projector_for_subspace,
)


def test_model_basic_properties(small_model):
    assert small_model.manifold_sizes == (2, 3, 2)
    assert small_model.dim == 7
    assert small_model.offsets == (0, 2, 5)
    assert small_model.all_labels[0] == "m1:v0"
    assert small_model.label_index("m2:v1") == 3
    assert list(small_model.manifold_indices(1)) == [2, 3, 4]


def test_model_unknown_label(small_model):
    with pytest.raises(UnknownLabelError):
        small_model.label_index("m9:v0")
    with pytest.raises(UnknownLabelError):
        small_model.manifold_indices(3)


def test_model_rejects_wrong_block_shape():
    with pytest.raises(StructureError):
        Model(
            energies=(np.array([0.0]), np.array([1.0, 2.0])),
            couplings=(np.zeros((2, 2)),),
            labels=(("a",), ("b", "c")),
        )


def test_model_rejects_missing_block():
    with pytest.raises(StructureError):
        Model(
            energies=(np.array([0.0]), np.array([1.0])),
            couplings=(),
            labels=(("a",), ("b",)),
        )


def test_model_rejects_positive_imaginary_energy():
    with pytest.raises(StructureError):
        Model(
            energies=(np.array([0.0 + 1e-3j]), np.array([1.0])),
            couplings=(np.ones((1, 1)),),
            labels=(("a",), ("b",)),
        )


def test_model_rejects_label_mismatch():
    with pytest.raises(StructureError):
        Model(
            energies=(np.array([0.0]), np.array([1.0])),
            couplings=(np.ones((1, 1)),),
            labels=(("a", "extra"), ("b",)),
        )


def test_assemble_mu_structure(small_model):
    mu = assemble_mu(small_model)
    assert mu.shape == (7, 7)
    assert np.array_equal(mu, mu.T)
    # adjacent blocks present
    assert np.array_equal(mu[0:2, 2:5], np.asarray(small_model.couplings[0]))
    # no direct 1 <-> 3 coupling, no intra-manifold coupling
    assert np.all(mu[0:2, 5:7] == 0.0)
    assert np.all(mu[0:2, 0:2] == 0.0)
    assert np.all(mu[2:5, 2:5] == 0.0)


def test_assemble_hamiltonian(small_model):
    h0 = assemble_h0(small_model)
    assert np.array_equal(np.diag(h0), small_model.flat_energies())
    eps = 0.37
    H = assemble_hamiltonian(small_model, eps)
    assert np.allclose(H, h0 - assemble_mu(small_model) * eps)


def test_projector_for_subspace(small_model):
    P = projector_for_subspace(small_model, ["m1:v0", "m2:v2"])
    assert is_projector(P)
    assert np.isclose(np.trace(P).real, 2.0)
    assert P[0, 0] == 1.0 and P[4, 4] == 1.0
    state = np.zeros(7, dtype=complex)
    state[4] = 1.0
    assert np.isclose(expectation(state, P).real, 1.0)


def test_projector_complement(small_model):
    allowed = [lab for m in small_model.labels[:2] for lab in m]
    forbidden = [lab for lab in small_model.labels[2]]
    P_a = projector_for_subspace(small_model, allowed)
    P_f = projector_for_subspace(small_model, forbidden)
    assert np.allclose(P_a + P_f, np.eye(7))


def test_expectation_shape_check():
    with pytest.raises(StructureError):
        expectation(np.ones(3), np.eye(2))


def test_is_hermitian():
    assert is_hermitian(np.array([[1.0, 2.0 + 1j], [2.0 - 1j, 3.0]]))
    assert not is_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_is_projector():
    assert is_projector(np.diag([1.0, 0.0, 1.0]))
    assert not is_projector(np.diag([1.0, 2.0]))       # not idempotent
    assert not is_projector(np.array([[0.0, 1.0], [0.0, 0.0]]))  # not hermitian
