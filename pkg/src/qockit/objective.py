"""Functional terms, gate overlap, per-iteration ledger and progress metrics.

The total functional is J = J0 + Ja + Jb with a final-time term J0, a
field-change cost Ja = int lambda_a(t) (eps - eps_r)^2 dt and a
state-dependent term Jb = lambda_b int <phi|P|phi> dt.  All time integrals
use the trapezoid rule on the propagation grid.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields

import numpy as np

from .errors import StructureError
from .hilbert import expectation


@dataclass(frozen=True)
class LambdaAProfile:
    """Field-cost weight lambda_a(t) = c / s(t).

    shape is a callable (t_array, T) -> s values, or None for constant
    weight lambda_a = c.
    """

    c: float
    shape: object = None

    def values(self, grid):
        if self.shape is None:
            return np.full(grid.n_nodes, self.c)
        s = np.asarray(self.shape(grid.nodes(), grid.T), dtype=float)
        return self.c / s


@dataclass(frozen=True)
class S2STarget:
    """Final-time target subspace, described by a projector."""

    D: np.ndarray


@dataclass(frozen=True)
class GateTarget:
    """Unitary to implement on a register of levels.

    O is the N_r x N_r matrix in the register basis; register holds the
    flat level indices spanning it.
    """

    O: np.ndarray
    register: tuple

    @property
    def n_register(self):
        return len(self.register)

    def target_states(self, dim, free_phases=None):
        """Target vectors O|n> embedded in the full space.

        free_phases, if given, holds exp(-i E_j T) per register level and
        defines the targets in the interaction picture of H0 at time T.
        """
        O = np.asarray(self.O, dtype=complex)
        n = self.n_register
        if O.shape != (n, n):
            raise StructureError(f"O shape {O.shape} != ({n}, {n})")
        out = np.zeros((n, dim), dtype=complex)
        for col in range(n):
            target = O[:, col]
            if free_phases is not None:
                target = np.asarray(free_phases) * target
            out[col, np.asarray(self.register, dtype=int)] = target
        return out


@dataclass(frozen=True)
class FunctionalConfig:
    """All knobs of the optimization functional.

    Sign compliance (for direction="minimize": lambda0 <= 0, lambda_b <= 0,
    lambda_a(t) >= 0) is checked by `krotov.validate_signs`, reported and
    never silently fixed.
    """

    lambda0: float
    lambda_b: float
    lambda_a: LambdaAProfile
    target: object
    projector: np.ndarray = None
    projector_kind: str = "allowed"
    direction: str = "minimize"
    reference_field_rule: str = "previous_iterate"
    frame: str = "interaction"


def j0_state(final_state, D, lambda0):
    """lambda0 <phi(T)| D |phi(T)> for the state-to-state objective."""
    return lambda0 * expectation(final_state, D).real


def tau(final_states, targets):
    """Gate overlap sum_n <phi_fn | phi_n(T)>; |tau| <= N_r."""
    if len(final_states) != len(targets):
        raise StructureError(
            f"{len(final_states)} final states vs {len(targets)} targets"
        )
    return complex(
        sum(np.vdot(t, f) for t, f in zip(targets, final_states))
    )


def j0_gate(tau_value, lambda0):
    """lambda0 |tau|^2 for the unitary-transformation objective."""
    return lambda0 * abs(tau_value) ** 2


def jb_integrand(trajectory, P):
    """sum_n <phi_n(t)|P|phi_n(t)> at every node (real part)."""
    P = np.asarray(P, dtype=complex)
    out = np.zeros(trajectory.grid.n_nodes)
    for c in range(trajectory.n_cols):
        states = trajectory.states[c]
        out += np.einsum("ij,ij->i", states.conj(), states @ P.T).real
    return out


def jb(trajectory, P, lambda_b):
    """Jb = lambda_b int sum_n <phi_n|P|phi_n> dt, trapezoid quadrature."""
    if lambda_b == 0.0:
        return 0.0
    integrand = jb_integrand(trajectory, P)
    return lambda_b * float(np.trapezoid(integrand, dx=trajectory.grid.dt))


def ja(field, reference, lambda_a_profile):
    """Ja = int lambda_a(t) (eps - eps_r)^2 dt, trapezoid quadrature."""
    if field.grid != reference.grid:
        raise StructureError("field and reference are on different grids")
    lam = lambda_a_profile.values(field.grid)
    diff = field.samples - reference.samples
    return float(np.trapezoid(lam * diff * diff, dx=field.grid.dt))


def field_change_l2(field, reference):
    return float(
        np.sqrt(np.trapezoid((field.samples - reference.samples) ** 2,
                             dx=field.grid.dt))
    )


def delta_ledger(prev, nxt, config):
    """Per-iteration decrease ledger.

    prev and nxt are dicts with keys "trajectory", "field" and "J"
    describing consecutive iterates on the same grid.  Returns the three
    components of Delta = J_prev - J_next together with the numerical
    consistency check of that identity (exact in continuous time only).
    """
    tp, tn = prev["trajectory"], nxt["trajectory"]
    if tp.grid != tn.grid:
        raise StructureError("iterates live on different grids")
    grid = tp.grid
    zeta = tn.states - tp.states

    if isinstance(config.target, GateTarget):
        targets = nxt.get("targets")
        dtau = sum(
            np.vdot(t, z) for t, z in zip(targets, zeta[:, -1, :])
        )
        delta1 = -config.lambda0 * abs(dtau) ** 2
    else:
        delta1 = 0.0
        for c in range(zeta.shape[0]):
            delta1 += -config.lambda0 * expectation(
                zeta[c, -1, :], config.target.D
            ).real

    lam = config.lambda_a.values(grid)
    diff = nxt["field"].samples - prev["field"].samples
    int_d2a = float(np.trapezoid(lam * diff * diff, dx=grid.dt))

    int_d2b = 0.0
    if config.lambda_b != 0.0 and config.projector is not None:
        P = np.asarray(config.projector, dtype=complex)
        integrand = np.zeros(grid.n_nodes)
        for c in range(zeta.shape[0]):
            integrand += np.einsum(
                "ij,ij->i", zeta[c].conj(), zeta[c] @ P.T
            ).real
        int_d2b = -config.lambda_b * float(np.trapezoid(integrand, dx=grid.dt))

    out = {"delta1": float(delta1), "int_delta2a": int_d2a, "int_delta2b": int_d2b}
    if "J" in prev and "J" in nxt:
        delta = out["delta1"] + out["int_delta2a"] + out["int_delta2b"]
        drop = prev["J"] - nxt["J"]
        out["j_decrease"] = drop
        out["consistent"] = bool(
            abs(delta - drop) <= 1e-6 * max(1.0, abs(prev["J"]))
        )
    return out


def metrics(J, Jb_value, lambda0, lambda_b, T, n_states=1):
    """Normalized functional and average allowed-subspace population.

    J_norm = J / (lambda0 n^2 + lambda_b T n) and I_P = Jb / (lambda_b T n)
    with n the number of propagated register states (n=1 reproduces the
    state-to-state definitions; both have optimal value 1).  A metric whose
    denominator vanishes is returned as None.
    """
    denom_norm = lambda0 * n_states**2 + lambda_b * T * n_states
    denom_ip = lambda_b * T * n_states
    j_norm = J / denom_norm if denom_norm != 0.0 else None
    i_p = Jb_value / denom_ip if denom_ip != 0.0 else None
    return {"J_norm": j_norm, "I_P": i_p}


@dataclass
class IterationRecord:
    """Convergence ledger for one iteration; serializes to one CSV row."""

    iter: int
    J: float
    J0: float
    Ja: float
    Jb: float
    delta1: float = 0.0
    int_delta2a: float = 0.0
    int_delta2b: float = 0.0
    J_norm: float = None
    I_P: float = None
    tau_abs: float = None
    field_change_l2: float = 0.0

    def validate(self):
        if abs(self.J - (self.J0 + self.Ja + self.Jb)) > 1e-10 * max(1.0, abs(self.J)):
            raise StructureError("J != J0 + Ja + Jb")


CSV_COLUMNS = [f.name for f in fields(IterationRecord)]


def write_records_csv(records, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            row = []
            for name in CSV_COLUMNS:
                value = getattr(rec, name)
                row.append("" if value is None else repr(value))
            writer.writerow(row)


def read_records_csv(path):
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            kwargs = {}
            for name in CSV_COLUMNS:
                raw = row[name]
                if raw == "":
                    kwargs[name] = None
                elif name == "iter":
                    kwargs[name] = int(raw)
                else:
                    kwargs[name] = float(raw)
            records.append(IterationRecord(**kwargs))
    return records
