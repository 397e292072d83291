"""Finite-dimensional state/operator arithmetic and Hamiltonian assembly.

States are plain complex numpy vectors and operators are complex square
matrices, all in a single flat basis with manifold-major ordering.  The
coupling operator is block-sparse: only adjacent manifolds are connected,
so projectors onto level subsets are diagonal 0/1 matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import StructureError, UnknownLabelError

HERMITICITY_TOL = 1e-12
PROJECTOR_TOL = 1e-12


@dataclass(frozen=True)
class Model:
    """Level model: per-manifold complex energies plus adjacent couplings.

    energies[i] is the complex level ladder of manifold i (a.u.; the
    imaginary part encodes decay as -Gamma/2 and must be <= 0).
    couplings[i] is the real coupling block between manifolds i and i+1,
    shape (len(energies[i]), len(energies[i+1])), dipole scale included.
    labels[i] gives one identifier per level, e.g. "m1:v0".
    """

    energies: tuple
    couplings: tuple
    labels: tuple
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.couplings) != len(self.energies) - 1:
            raise StructureError(
                f"need {len(self.energies) - 1} coupling blocks for "
                f"{len(self.energies)} manifolds, got {len(self.couplings)}"
            )
        if len(self.labels) != len(self.energies):
            raise StructureError("labels must match manifolds")
        for i, (e, lab) in enumerate(zip(self.energies, self.labels)):
            if len(e) < 1:
                raise StructureError(f"manifold {i} is empty")
            if len(lab) != len(e):
                raise StructureError(f"labels of manifold {i} do not match its size")
            if np.any(np.imag(np.asarray(e)) > 0):
                raise StructureError(f"Im(energy) <= 0 violated in manifold {i}")
        for i, c in enumerate(self.couplings):
            c = np.asarray(c)
            want = (len(self.energies[i]), len(self.energies[i + 1]))
            if c.shape != want:
                raise StructureError(
                    f"coupling block {i}<->{i + 1} has shape {c.shape}, expected {want}"
                )

    @property
    def manifold_sizes(self):
        return tuple(len(e) for e in self.energies)

    @property
    def dim(self):
        return sum(self.manifold_sizes)

    @property
    def offsets(self):
        """Flat index of the first level of each manifold."""
        sizes = self.manifold_sizes
        return tuple(int(np.sum(sizes[:i])) for i in range(len(sizes)))

    @property
    def all_labels(self):
        out = []
        for lab in self.labels:
            out.extend(lab)
        return tuple(out)

    def label_index(self, label):
        """Flat index of a level label."""
        try:
            return self.all_labels.index(label)
        except ValueError:
            raise UnknownLabelError(label) from None

    def manifold_indices(self, manifold):
        """Flat indices belonging to one manifold (0-based)."""
        if not 0 <= manifold < len(self.energies):
            raise UnknownLabelError(f"manifold {manifold}")
        off = self.offsets[manifold]
        return np.arange(off, off + self.manifold_sizes[manifold])

    def flat_energies(self):
        return np.concatenate([np.asarray(e, dtype=complex) for e in self.energies])


def assemble_mu(model):
    """Coupling operator with the blocks in the adjacent off-diagonal slots."""
    dim = model.dim
    offs = model.offsets
    mu = np.zeros((dim, dim))
    for i, block in enumerate(model.couplings):
        block = np.asarray(block, dtype=float)
        r = slice(offs[i], offs[i] + block.shape[0])
        c = slice(offs[i + 1], offs[i + 1] + block.shape[1])
        mu[r, c] = block
        mu[c, r] = block.T
    return mu


def assemble_h0(model):
    """Field-free Hamiltonian: diagonal matrix of the level energies."""
    return np.diag(model.flat_energies())


def assemble_hamiltonian(model, eps):
    """System+control Hamiltonian H = H0 - mu * eps for a field value eps."""
    return assemble_h0(model) - assemble_mu(model) * eps


def projector_for_subspace(model, selector):
    """Diagonal 0/1 projector onto the levels named in `selector`."""
    diag = np.zeros(model.dim)
    for label in selector:
        diag[model.label_index(label)] = 1.0
    return np.diag(diag.astype(complex))


def expectation(state, op):
    """<state| op |state>."""
    state = np.asarray(state)
    op = np.asarray(op)
    if op.shape != (state.size, state.size):
        raise StructureError(
            f"operator shape {op.shape} does not match state of dim {state.size}"
        )
    return complex(np.vdot(state, op @ state))


def is_hermitian(op, tol=HERMITICITY_TOL):
    op = np.asarray(op)
    scale = max(1.0, float(np.abs(op).max()))
    return bool(np.abs(op - op.conj().T).max() <= tol * scale)


def is_projector(op, tol=PROJECTOR_TOL):
    """Idempotent and positive-semidefinite, to within tol."""
    op = np.asarray(op)
    if not is_hermitian(op, tol):
        return False
    if np.abs(op @ op - op).max() > tol:
        return False
    return bool(np.linalg.eigvalsh(op).min() >= -tol)
