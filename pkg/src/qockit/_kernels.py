"""Numba inner loops for the split-operator propagation.

All kernels work in the eigenbasis of the coupling operator mu.  With
mu = V diag(m) V^T (V real orthogonal) and H0 diagonal in the
computational basis, one split step

    exp(-i H dt) ~= exp(+i mu eps dt/2) exp(-i H0 dt) exp(+i mu eps dt/2)

becomes, for the mu-basis state psi~ = V^T psi,

    psi~ -> D(eps) K D(eps) psi~ ,   D(eps) = diag(exp(i m eps dt/2)),

where K = V^T exp(-i H0 dt) V is a constant matrix.  One complex matvec
per step is the dominant cost; whole-trajectory basis changes are done
with BLAS outside these loops.
"""

import numba
import numpy as np


@numba.njit(cache=True, fastmath=True)
def forward_homogeneous(K, m, eps, dt, psi0, out):
    """Propagate one column forward, storing every node (mu basis).

    out has shape (n_nodes, dim); eps has one sample per node, the value
    at the left node of each step is used.
    """
    psi = psi0.copy()
    out[0] = psi
    for i in range(eps.shape[0] - 1):
        ph = np.exp(1j * m * (eps[i] * dt * 0.5))
        psi = ph * (K @ (ph * psi))
        out[i + 1] = psi


@numba.njit(cache=True, fastmath=True)
def backward_inhomogeneous(Kinv, Khalf, m, eps, dt, chi_T, source, use_source, out):
    """Integrate the costate equation from T down to 0 (mu basis).

    Inverts the forward inhomogeneous step exactly:
        chi_i = U^-1(eps_i) (chi_{i+1} - dt * U_half(eps_i) sbar_i),
    with sbar_i the average of the source at the bracketing nodes.
    `source` has shape (n_nodes, dim) and already contains lambda_b P phi.
    """
    n_steps = eps.shape[0] - 1
    chi = chi_T.copy()
    out[n_steps] = chi
    for i in range(n_steps - 1, -1, -1):
        if use_source:
            sbar = 0.5 * (source[i] + source[i + 1])
            phq = np.exp(1j * m * (eps[i] * dt * 0.25))
            chi = chi - dt * (phq * (Khalf @ (phq * sbar)))
        ph = np.exp(-1j * m * (eps[i] * dt * 0.5))
        chi = ph * (Kinv @ (ph * chi))
        out[i] = chi


@numba.njit(cache=True, fastmath=True)
def forward_update(K, m, eps_ref, inv_lambda_a, dt, chi, psi0, out_phi, out_eps):
    """Immediate-feedback Krotov pass: update the field while propagating.

    chi has shape (n_cols, n_nodes, dim) in the mu basis, psi0 shape
    (n_cols, dim).  At each node the new field sample is computed from the
    stored costate and the freshly propagated state, then used to step all
    columns.  <chi|mu|phi> is diagonal in the mu basis.
    """
    n_cols = psi0.shape[0]
    dim = psi0.shape[1]
    n_nodes = eps_ref.shape[0]
    psi = psi0.copy()
    out_phi[:, 0, :] = psi
    for i in range(n_nodes):
        grad = 0.0
        for c in range(n_cols):
            acc = 0.0 + 0.0j
            for k in range(dim):
                acc += m[k] * np.conj(chi[c, i, k]) * psi[c, k]
            grad += acc.imag
        e = eps_ref[i] - grad * inv_lambda_a[i]
        out_eps[i] = e
        if i == n_nodes - 1:
            break
        ph = np.exp(1j * m * (e * dt * 0.5))
        for c in range(n_cols):
            psi[c] = ph * (K @ (ph * psi[c]))
            out_phi[c, i + 1, :] = psi[c]
