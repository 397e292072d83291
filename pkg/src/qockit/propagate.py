"""Time propagation of state and costate trajectories.

Two schemes are available: a reference scheme that exponentiates the full
Hamiltonian by eigendecomposition at every step, and the default fast
split scheme (see `_kernels`) that is exact in the field-free and coupling
factors separately and second-order accurate overall.  The control field
is piecewise constant per step with the value taken at the left node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import PropagationError, StructureError
from .hilbert import assemble_hamiltonian, assemble_mu, is_hermitian

#: Default horizon, 8 ps in atomic units of time.
T_DEFAULT = 330731.0
#: Default number of steps (2**18): >= 60 samples per optical period at
#: the strongest transition frequency of the default model.
N_STEPS_DEFAULT = 262144


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid on [0, T] with n_steps steps (n_steps + 1 nodes)."""

    T: float = T_DEFAULT
    n_steps: int = N_STEPS_DEFAULT

    def __post_init__(self):
        if self.n_steps < 2:
            raise StructureError("n_steps must be >= 2")
        if self.T <= 0:
            raise StructureError("T must be positive")

    @property
    def dt(self):
        return self.T / self.n_steps

    @property
    def n_nodes(self):
        return self.n_steps + 1

    def nodes(self):
        return np.linspace(0.0, self.T, self.n_nodes)

    def midpoints(self):
        return self.nodes()[:-1] + 0.5 * self.dt


@dataclass(frozen=True)
class ControlField:
    """Real field samples on the nodes of a uniform grid."""

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float)
        if samples.shape != (self.grid.n_nodes,):
            raise StructureError(
                f"field needs {self.grid.n_nodes} samples, got {samples.shape}"
            )
        if not np.all(np.isfinite(samples)):
            raise StructureError("field samples must be finite")
        object.__setattr__(self, "samples", samples)

    @classmethod
    def from_function(cls, grid, func):
        return cls(grid, np.asarray([func(t) for t in grid.nodes()], dtype=float))

    def l2_norm(self):
        """sqrt( integral eps(t)^2 dt ), trapezoid rule."""
        return float(np.sqrt(np.trapezoid(self.samples**2, dx=self.grid.dt)))


@dataclass
class Trajectory:
    """States at every grid node for one or more columns (initial states).

    states has shape (n_cols, n_nodes, dim), computational basis.
    """

    grid: TimeGrid
    states: np.ndarray

    def __post_init__(self):
        if self.states.ndim != 3 or self.states.shape[1] != self.grid.n_nodes:
            raise StructureError(
                f"states shape {self.states.shape} does not match grid "
                f"with {self.grid.n_nodes} nodes"
            )

    @property
    def n_cols(self):
        return self.states.shape[0]

    @property
    def dim(self):
        return self.states.shape[2]

    def final_states(self):
        return self.states[:, -1, :]

    def populations(self, flat_index):
        """|amplitude|^2 of one level, summed over columns, at every node."""
        return np.sum(np.abs(self.states[:, :, flat_index]) ** 2, axis=0)

    def subspace_population(self, flat_indices):
        """Total population in a set of levels at every node, all columns."""
        sub = self.states[:, :, np.asarray(flat_indices, dtype=int)]
        return np.sum(np.abs(sub) ** 2, axis=(0, 2))

    def total_norm2(self):
        return np.sum(np.abs(self.states) ** 2, axis=(0, 2))


def _expm_action(H, dt, vectors):
    """exp(-i H dt) applied to each vector, via eigendecomposition of H."""
    H = np.asarray(H, dtype=complex)
    if is_hermitian(H, 1e-12):
        w, U = np.linalg.eigh(H)
        Uinv = U.conj().T
    else:
        try:
            w, U = np.linalg.eig(H)
            Uinv = np.linalg.inv(U)
        except np.linalg.LinAlgError as err:
            raise PropagationError(f"eigendecomposition failed: {err}") from err
        if not np.all(np.isfinite(Uinv)):
            raise PropagationError("Hamiltonian not diagonalizable within tolerance")
    phases = np.exp(-1j * w * dt)
    return [U @ (phases * (Uinv @ np.asarray(v, dtype=complex))) for v in vectors]


def step(H_mid, dt, state):
    """Advance a state by exp(-i H_mid dt), reference eigendecomposition."""
    return _expm_action(H_mid, dt, [state])[0]


def step_inhomogeneous(H_mid, dt, state, source_left, source_right):
    """One step of d chi/dt = -i H chi + s with the trapezoid source rule:

        chi(t+dt) = exp(-i H dt) chi(t) + dt exp(-i H dt/2) (s_L + s_R)/2
    """
    sbar = 0.5 * (np.asarray(source_left) + np.asarray(source_right))
    evolved = _expm_action(H_mid, dt, [state])[0]
    half = _expm_action(H_mid, 0.5 * dt, [sbar])[0]
    return evolved + dt * half


class SplitPropagator:
    """Precomputed machinery for the fast split scheme on a fixed grid.

    Diagonalizes mu once (real symmetric) and stores the constant mu-basis
    step matrices; see `_kernels` for the per-step formulas.
    """

    def __init__(self, model, dt):
        self.dt = float(dt)
        self.energies = model.flat_energies()
        mu = assemble_mu(model)
        self.m, self.V = np.linalg.eigh(mu)
        lam = np.exp(-1j * self.energies * self.dt)
        self.K = np.ascontiguousarray((self.V.T * lam) @ self.V)
        self.Kinv = np.ascontiguousarray((self.V.T * (1.0 / lam)) @ self.V)
        lam_half = np.exp(-1j * self.energies * (0.5 * self.dt))
        self.Khalf = np.ascontiguousarray((self.V.T * lam_half) @ self.V)

    @property
    def dim(self):
        return self.energies.size

    def to_mu(self, states):
        """Computational-basis -> mu-basis, last axis is the state index."""
        return np.asarray(states, dtype=complex) @ self.V

    def to_comp(self, states):
        return np.asarray(states) @ self.V.T

    def forward_columns(self, field, initials_mu):
        """Forward trajectories for each column, mu basis, all nodes."""
        n_cols = initials_mu.shape[0]
        out = np.empty((n_cols, field.grid.n_nodes, self.dim), dtype=complex)
        for c in range(n_cols):
            _kernels.forward_homogeneous(
                self.K, self.m, field.samples, self.dt,
                np.ascontiguousarray(initials_mu[c]), out[c],
            )
        return out

    def backward_columns(self, field, chi_T_mu, sources_mu):
        """Backward costate trajectories; sources may be None (homogeneous)."""
        n_cols = chi_T_mu.shape[0]
        out = np.empty((n_cols, field.grid.n_nodes, self.dim), dtype=complex)
        dummy = np.zeros((1, self.dim), dtype=complex)
        for c in range(n_cols):
            src = dummy if sources_mu is None else np.ascontiguousarray(sources_mu[c])
            _kernels.backward_inhomogeneous(
                self.Kinv, self.Khalf, self.m, field.samples, self.dt,
                np.ascontiguousarray(chi_T_mu[c]), src,
                sources_mu is not None, out[c],
            )
        return out


def _check_grid(model, field, states):
    dim = model.dim
    for s in states:
        if np.asarray(s).shape != (dim,):
            raise StructureError(f"state shape {np.asarray(s).shape} != ({dim},)")


def propagate_forward(model, field, initial, method="split"):
    """Forward propagation of one or more initial states, storing all nodes."""
    initial = [np.asarray(s, dtype=complex) for s in initial]
    _check_grid(model, field, initial)
    grid = field.grid
    if method == "split":
        prop = SplitPropagator(model, grid.dt)
        out_mu = prop.forward_columns(field, prop.to_mu(np.array(initial)))
        return Trajectory(grid, prop.to_comp(out_mu))
    if method == "eig":
        states = np.empty((len(initial), grid.n_nodes, model.dim), dtype=complex)
        eps = field.samples
        for c, psi0 in enumerate(initial):
            psi = psi0
            states[c, 0] = psi
            for i in range(grid.n_steps):
                H = assemble_hamiltonian(model, eps[i])
                try:
                    psi = step(H, grid.dt, psi)
                except PropagationError as err:
                    raise PropagationError(str(err), step=i) from err
                states[c, i + 1] = psi
        return Trajectory(grid, states)
    raise ValueError(f"unknown method {method!r}")


def propagate_backward_inhomogeneous(
    model, field, chi_T, forward, lambda_b, P, method="split"
):
    """Integrate the costate equation from T down to 0.

    The source lambda_b * P * phi(t) is built from the stored forward
    trajectory, which must live on the same grid as the field.
    """
    chi_T = [np.asarray(s, dtype=complex) for s in chi_T]
    _check_grid(model, field, chi_T)
    if forward.grid != field.grid:
        raise StructureError("forward trajectory and field are on different grids")
    if forward.n_cols != len(chi_T):
        raise StructureError(
            f"{len(chi_T)} boundary states for {forward.n_cols} forward columns"
        )
    grid = field.grid
    use_source = lambda_b != 0.0
    if method == "split":
        prop = SplitPropagator(model, grid.dt)
        sources_mu = None
        if use_source:
            P = np.asarray(P, dtype=complex)
            sources_mu = prop.to_mu(lambda_b * (forward.states @ P.T))
        out_mu = prop.backward_columns(
            field, prop.to_mu(np.array(chi_T)), sources_mu
        )
        return Trajectory(grid, prop.to_comp(out_mu))
    if method == "eig":
        eps = field.samples
        states = np.empty((len(chi_T), grid.n_nodes, model.dim), dtype=complex)
        for c, chi in enumerate(chi_T):
            states[c, -1] = chi
            for i in range(grid.n_steps - 1, -1, -1):
                H = assemble_hamiltonian(model, eps[i])
                if use_source:
                    sL = lambda_b * (P @ forward.states[c, i])
                    sR = lambda_b * (P @ forward.states[c, i + 1])
                    sbar = 0.5 * (sL + sR)
                    chi = chi - grid.dt * _expm_action(H, 0.5 * grid.dt, [sbar])[0]
                try:
                    chi = _expm_action(H, -grid.dt, [chi])[0]
                except PropagationError as err:
                    raise PropagationError(str(err), step=i) from err
                states[c, i] = chi
        return Trajectory(grid, states)
    raise ValueError(f"unknown method {method!r}")
