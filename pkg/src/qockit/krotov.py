"""Krotov iteration engines for state-to-state and gate optimization.

One iteration: backward-propagate the costate from its target-derived
boundary condition with the lambda_b P phi source, then re-propagate the
state forward while updating the field node by node (immediate feedback,
which resolves the implicit update equation).  Under sign-compliant
parameters the functional decreases monotonically; the per-iteration
decrease is accounted for in the IterationRecord ledger.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import PropagationError, StructureError
from .objective import (
    FunctionalConfig,
    GateTarget,
    IterationRecord,
    S2STarget,
    delta_ledger,
    field_change_l2,
    j0_gate,
    j0_state,
    ja,
    jb,
    jb_integrand,
    metrics,
    tau,
)
from .propagate import ControlField, SplitPropagator, Trajectory

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SignVerdict:
    compliant: bool
    reasons: tuple = ()

    def __bool__(self):
        return self.compliant


@dataclass
class StopRules:
    max_iters: int = 500
    target_j_norm: float = None
    min_field_change: float = None


@dataclass
class OptimizationRun:
    """Inputs and results of one optimization; exclusive to a single run."""

    config: FunctionalConfig
    model: object
    grid: object
    guess: ControlField
    initial_states: np.ndarray = None
    stop_rules: StopRules = field(default_factory=StopRules)
    records: list = field(default_factory=list)
    final_field: ControlField = None
    final_trajectory: Trajectory = None
    sign_verdict: SignVerdict = None


def validate_signs(config):
    """Check the sufficient sign conditions for monotonic convergence.

    For minimization: lambda0 <= 0, lambda_b <= 0, lambda_a(t) >= 0 (and
    mirrored for maximization).  Penalizing the forbidden subspace with
    the matching lambda_b sign (case (b)) never satisfies them; it is
    reported as noncompliant but runs are still permitted.
    """
    reasons = []
    sgn = 1.0 if config.direction == "minimize" else -1.0
    if sgn * config.lambda0 > 0:
        reasons.append(
            f"lambda0 = {config.lambda0} violates the {config.direction} condition"
        )
    if sgn * config.lambda_a.c < 0:
        reasons.append(
            f"lambda_a constant = {config.lambda_a.c} violates the "
            f"{config.direction} condition"
        )
    if sgn * config.lambda_b > 0:
        msg = f"lambda_b = {config.lambda_b} violates the {config.direction} condition"
        if config.projector_kind == "forbidden":
            msg += (
                " (forbidden-subspace penalty, case (b): runnable, but the"
                " sufficient conditions cannot be met)"
            )
        reasons.append(msg)
    return SignVerdict(compliant=not reasons, reasons=tuple(reasons))


def chi_boundary_state(final_state, D, lambda0):
    """chi(T) = -lambda0 D phi(T)."""
    D = np.asarray(D, dtype=complex)
    final_state = np.asarray(final_state, dtype=complex)
    if D.shape != (final_state.size, final_state.size):
        raise StructureError("D does not match the state dimension")
    return -lambda0 * (D @ final_state)


def chi_boundary_gate(final_states, targets, lambda0):
    """chi_n(T) = -lambda0 (sum_n' <phi_fn'|phi_n'(T)>) phi_fn."""
    if len(final_states) != len(targets):
        raise StructureError("final states and targets differ in length")
    scalar = sum(np.vdot(t, f) for t, f in zip(targets, final_states))
    return [-lambda0 * scalar * np.asarray(t, dtype=complex) for t in targets]


def update_field_step(chi_states_at_t, mu, phi_new_at_t, eps_ref_at_t, lambda_a_at_t):
    """eps_ref - Im{ sum_n <chi_n|mu|phi_n> } / lambda_a at one node."""
    if lambda_a_at_t == 0.0:
        raise ZeroDivisionError("lambda_a(t) = 0 in the field update")
    mu = np.asarray(mu, dtype=complex)
    grad = sum(
        np.vdot(chi, mu @ np.asarray(phi, dtype=complex)).imag
        for chi, phi in zip(chi_states_at_t, phi_new_at_t)
    )
    return eps_ref_at_t - grad / lambda_a_at_t


def _gate_targets(run):
    """Target vectors in the full space, with the frame convention applied."""
    target = run.config.target
    energies = run.model.flat_energies()
    reg = np.asarray(target.register, dtype=int)
    if run.config.frame == "interaction":
        phases = np.exp(-1j * energies[reg].real * run.grid.T)
    elif run.config.frame == "lab":
        phases = None
    else:
        raise StructureError(f"unknown frame {run.config.frame!r}")
    return target.target_states(run.model.dim, phases)


def _evaluate(run, trajectory, field_now, field_ref, targets, prev=None):
    """Assemble the IterationRecord for the current iterate."""
    cfg = run.config
    n_cols = trajectory.n_cols
    finals = trajectory.final_states()
    tau_abs = None
    if isinstance(cfg.target, GateTarget):
        tau_value = tau(list(finals), list(targets))
        J0 = j0_gate(tau_value, cfg.lambda0)
        tau_abs = abs(tau_value)
    else:
        J0 = j0_state(finals[0], cfg.target.D, cfg.lambda0)
    Ja = ja(field_now, field_ref, cfg.lambda_a)
    Jb = jb(trajectory, cfg.projector, cfg.lambda_b) if cfg.projector is not None else 0.0
    J = J0 + Ja + Jb
    m = metrics(J, Jb, cfg.lambda0, cfg.lambda_b, run.grid.T, n_states=n_cols)
    i_p = m["I_P"]
    if i_p is None and cfg.projector is not None:
        # unconstrained run: report the direct trajectory average instead
        integrand = jb_integrand(trajectory, cfg.projector)
        i_p = float(np.trapezoid(integrand, dx=run.grid.dt)) / (run.grid.T * n_cols)
    rec = IterationRecord(
        iter=len(run.records),
        J=J, J0=J0, Ja=Ja, Jb=Jb,
        J_norm=m["J_norm"], I_P=i_p, tau_abs=tau_abs,
        field_change_l2=field_change_l2(field_now, field_ref),
    )
    if prev is not None:
        nxt = {"trajectory": trajectory, "field": field_now, "J": J,
               "targets": targets}
        ledger = delta_ledger(prev, nxt, cfg)
        rec.delta1 = ledger["delta1"]
        rec.int_delta2a = ledger["int_delta2a"]
        rec.int_delta2b = ledger["int_delta2b"]
    rec.validate()
    return rec


def _should_stop(run, rec):
    rules = run.stop_rules
    if rules.target_j_norm is not None and rec.J_norm is not None:
        if rec.J_norm >= rules.target_j_norm:
            return True
    if rules.min_field_change is not None and rec.iter > 0:
        if rec.field_change_l2 < rules.min_field_change:
            return True
    return False


def _run_engine(run, initials):
    cfg = run.config
    grid = run.grid
    if run.guess.grid != grid:
        raise StructureError("guess field is not on the run grid")
    verdict = validate_signs(cfg)
    run.sign_verdict = verdict
    if not verdict:
        logger.warning(
            "sign conditions for monotonic convergence are NOT satisfied: %s",
            "; ".join(verdict.reasons),
        )

    gate = isinstance(cfg.target, GateTarget)
    targets = _gate_targets(run) if gate else None
    prop = SplitPropagator(run.model, grid.dt)
    lam_a = cfg.lambda_a.values(grid)
    if np.any(lam_a == 0.0):
        raise StructureError("lambda_a(t) vanishes on the grid")
    inv_lam_a = 1.0 / lam_a
    P = cfg.projector
    PV = None
    if P is not None and cfg.lambda_b != 0.0:
        PV = np.asarray(P, dtype=complex).T @ prop.V

    field_now = run.guess
    phi = prop.to_comp(prop.forward_columns(field_now, prop.to_mu(initials)))
    traj = Trajectory(grid, phi)
    run.records = [_evaluate(run, traj, field_now, field_now, targets)]

    it = 0
    while it < run.stop_rules.max_iters:
        it += 1
        finals = traj.final_states()
        if gate:
            chi_T = np.array(chi_boundary_gate(list(finals), list(targets),
                                               cfg.lambda0))
        else:
            chi_T = chi_boundary_state(finals[0], cfg.target.D,
                                       cfg.lambda0)[None, :]
        sources_mu = None
        if PV is not None:
            sources_mu = cfg.lambda_b * (traj.states @ PV)
        chi_mu = prop.backward_columns(field_now, prop.to_mu(chi_T), sources_mu)
        del sources_mu

        n_cols = traj.n_cols
        out_phi_mu = np.empty_like(chi_mu)
        out_eps = np.empty(grid.n_nodes)
        _kernels.forward_update(
            prop.K, prop.m, field_now.samples, inv_lam_a, grid.dt,
            chi_mu, np.ascontiguousarray(prop.to_mu(initials)),
            out_phi_mu, out_eps,
        )
        del chi_mu
        if not np.all(np.isfinite(out_eps)):
            raise PropagationError(
                f"non-finite field produced in iteration {it}", step=it
            )
        new_field = ControlField(grid, out_eps)
        new_traj = Trajectory(grid, prop.to_comp(out_phi_mu))
        del out_phi_mu

        prev = {"trajectory": traj, "field": field_now,
                "J": run.records[-1].J, "targets": targets}
        rec = _evaluate(run, new_traj, new_field, field_now, targets, prev=prev)
        run.records.append(rec)
        traj, field_now = new_traj, new_field
        if _should_stop(run, rec):
            break

    run.final_field = field_now
    run.final_trajectory = traj
    return run


def optimize_state_to_state(run):
    """Run the Krotov loop for a single initial state and projector target."""
    if not isinstance(run.config.target, S2STarget):
        raise StructureError("state-to-state engine needs an S2STarget")
    initials = np.asarray(run.initial_states, dtype=complex)
    if initials.ndim == 1:
        initials = initials[None, :]
    if initials.shape[0] != 1:
        raise StructureError("state-to-state optimization takes one initial state")
    return _run_engine(run, initials)


def optimize_gate(run):
    """Run the Krotov loop for a unitary target on a register of levels.

    The N_r register basis states are propagated simultaneously; the field
    update sums the gradient over all columns.
    """
    cfg = run.config
    if not isinstance(cfg.target, GateTarget):
        raise StructureError("gate engine needs a GateTarget")
    O = np.asarray(cfg.target.O, dtype=complex)
    if not np.allclose(O.conj().T @ O, np.eye(O.shape[0]), atol=1e-10):
        raise StructureError("gate target O is not unitary on the register")
    dim = run.model.dim
    initials = np.zeros((cfg.target.n_register, dim), dtype=complex)
    for n, idx in enumerate(cfg.target.register):
        initials[n, idx] = 1.0
    return _run_engine(run, initials)
