import numpy as np
import pytest

from qockit.errors import StructureError
from qockit.hilbert import projector_for_subspace
from qockit.objective import (
    CSV_COLUMNS,
    FunctionalConfig,
    GateTarget,
    IterationRecord,
    LambdaAProfile,
    S2STarget,
    delta_ledger,
    field_change_l2,
    j0_gate,
    j0_state,
    ja,
    jb,
    jb_integrand,
    metrics,
    read_records_csv,
    tau,
    write_records_csv,
)
from qockit.propagate import ControlField, TimeGrid, Trajectory
from qockit.shapes import gaussian_shape


def make_trajectory(grid, dim, fill):
    """Trajectory with the same state at every node (synthetic)."""
    states = np.tile(np.asarray(fill, dtype=complex), (1, grid.n_nodes, 1))
    return Trajectory(grid, states)


# ------------------------------------------------------------- lambda_a

def test_lambda_a_constant():
    grid = TimeGrid(T=4.0, n_steps=4)
    lam = LambdaAProfile(c=7.0)
    assert np.array_equal(lam.values(grid), np.full(5, 7.0))


def test_lambda_a_shaped():
    grid = TimeGrid(T=4.0, n_steps=4)
    lam = LambdaAProfile(c=100.0, shape=gaussian_shape)
    vals = lam.values(grid)
    assert np.isclose(vals[2], 100.0)                     # center: s = 1
    assert np.isclose(vals[0], 100.0 * np.exp(8.0))       # edge: s = e^-8


# ------------------------------------------------------------ functional

def test_j0_state():
    D = np.diag([0.0, 1.0]).astype(complex)
    phi = np.array([0.6, 0.8], dtype=complex)
    assert np.isclose(j0_state(phi, D, -1.0), -0.64)


def test_tau_and_j0_gate():
    finals = [np.array([1.0, 0.0], dtype=complex),
              np.array([0.0, 1.0j], dtype=complex)]
    targets = [np.array([1.0, 0.0], dtype=complex),
               np.array([0.0, 1.0], dtype=complex)]
    t = tau(finals, targets)
    assert np.isclose(t, 1.0 + 1.0j)
    assert np.isclose(j0_gate(t, -1.0), -2.0)
    with pytest.raises(StructureError):
        tau(finals, targets[:1])


def test_jb_quadrature():
    grid = TimeGrid(T=10.0, n_steps=100)
    phi = np.array([0.6, 0.8j], dtype=complex)
    P = np.diag([1.0, 0.0]).astype(complex)
    traj = make_trajectory(grid, 2, phi)
    integrand = jb_integrand(traj, P)
    assert np.allclose(integrand, 0.36)
    # constant integrand: trapezoid is exact
    assert np.isclose(jb(traj, P, -2.0), -2.0 * 0.36 * 10.0)
    assert jb(traj, P, 0.0) == 0.0


def test_ja_and_field_change():
    grid = TimeGrid(T=1.0, n_steps=1000)
    f1 = ControlField(grid, np.full(grid.n_nodes, 2.0))
    f2 = ControlField(grid, np.full(grid.n_nodes, 5.0))
    lam = LambdaAProfile(c=4.0)
    assert np.isclose(ja(f2, f1, lam), 4.0 * 9.0 * 1.0)
    assert np.isclose(field_change_l2(f2, f1), 3.0)
    other = ControlField(TimeGrid(T=1.0, n_steps=10), np.zeros(11))
    with pytest.raises(StructureError):
        ja(f2, other, lam)


# -------------------------------------------------------------- targets

def test_gate_target_states():
    O = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    target = GateTarget(O=O, register=(1, 3))
    vecs = target.target_states(5)
    assert vecs.shape == (2, 5)
    # column 0 of O is |1> on the register -> level index 3
    assert vecs[0, 3] == 1.0 and vecs[0, 1] == 0.0
    phases = np.array([1.0, 1.0j])
    vecs_ip = target.target_states(5, phases)
    assert np.isclose(vecs_ip[0, 3], 1.0j)


# -------------------------------------------------------------- metrics

def test_metrics_normalization():
    # s2s-style: n = 1
    m = metrics(J=-33.0, Jb_value=-32.0, lambda0=-1.0, lambda_b=-32.0 / 8.0,
                T=8.0, n_states=1)
    assert np.isclose(m["J_norm"], 1.0)
    assert np.isclose(m["I_P"], 1.0)
    # vanishing denominators are reported as None
    m0 = metrics(J=-1.0, Jb_value=0.0, lambda0=-1.0, lambda_b=0.0, T=8.0,
                 n_states=1)
    assert m0["I_P"] is None
    assert np.isclose(m0["J_norm"], 1.0)
    mz = metrics(J=0.0, Jb_value=0.0, lambda0=0.0, lambda_b=0.0, T=8.0)
    assert mz["J_norm"] is None and mz["I_P"] is None


def test_metric_calibration_perfect_solution(small_model):
    """J_norm = I_P = 1 (to 1e-12) for a synthetic perfect iterate."""
    grid = TimeGrid(T=10.0, n_steps=64)
    lambda0, lambda_bT = -1.0, -32.0
    lambda_b = lambda_bT / grid.T
    D = projector_for_subspace(small_model, ["m1:v1"])
    P = projector_for_subspace(
        small_model, [lab for m in small_model.labels[:2] for lab in m]
    )
    phi = np.zeros(small_model.dim, dtype=complex)
    phi[small_model.label_index("m1:v1")] = 1.0  # in D and in P at all times
    traj = make_trajectory(grid, small_model.dim, phi)
    field = ControlField(grid, np.zeros(grid.n_nodes))
    J0 = j0_state(phi, D, lambda0)
    Ja = ja(field, field, LambdaAProfile(c=100.0))
    Jb = jb(traj, P, lambda_b)
    m = metrics(J0 + Ja + Jb, Jb, lambda0, lambda_b, grid.T, n_states=1)
    assert abs(m["J_norm"] - 1.0) <= 1e-12
    assert abs(m["I_P"] - 1.0) <= 1e-12


# --------------------------------------------------------------- ledger

def test_delta_ledger_identity_synthetic():
    """On synthetic data the ledger reproduces its defining formulas."""
    grid = TimeGrid(T=2.0, n_steps=50)
    dim = 2
    D = np.diag([0.0, 1.0]).astype(complex)
    P = np.diag([1.0, 0.0]).astype(complex)
    cfg = FunctionalConfig(
        lambda0=-1.0, lambda_b=-0.5, lambda_a=LambdaAProfile(c=3.0),
        target=S2STarget(D=D), projector=P,
    )
    phi_a = np.array([1.0, 0.0], dtype=complex)
    phi_b = np.array([0.8, 0.6], dtype=complex)
    ta = make_trajectory(grid, dim, phi_a)
    tb = make_trajectory(grid, dim, phi_b)
    fa = ControlField(grid, np.zeros(grid.n_nodes))
    fb = ControlField(grid, np.full(grid.n_nodes, 0.1))
    led = delta_ledger({"trajectory": ta, "field": fa},
                       {"trajectory": tb, "field": fb}, cfg)
    zeta = phi_b - phi_a
    assert np.isclose(led["delta1"], -cfg.lambda0 * abs(zeta[1]) ** 2)
    assert np.isclose(led["int_delta2a"], 3.0 * 0.01 * grid.T)
    assert np.isclose(led["int_delta2b"],
                      -cfg.lambda_b * abs(zeta[0]) ** 2 * grid.T)


def test_delta_ledger_grid_mismatch():
    cfg = FunctionalConfig(
        lambda0=-1.0, lambda_b=0.0, lambda_a=LambdaAProfile(c=1.0),
        target=S2STarget(D=np.eye(2, dtype=complex)),
    )
    ga, gb = TimeGrid(T=1.0, n_steps=4), TimeGrid(T=1.0, n_steps=8)
    ta = make_trajectory(ga, 2, [1.0, 0.0])
    tb = make_trajectory(gb, 2, [1.0, 0.0])
    with pytest.raises(StructureError):
        delta_ledger({"trajectory": ta, "field": None},
                     {"trajectory": tb, "field": None}, cfg)


# ------------------------------------------------------------------ CSV

def test_iteration_record_validate():
    rec = IterationRecord(iter=0, J=1.0, J0=0.5, Ja=0.25, Jb=0.25)
    rec.validate()
    bad = IterationRecord(iter=0, J=1.0, J0=0.5, Ja=0.25, Jb=0.0)
    with pytest.raises(StructureError):
        bad.validate()


def test_csv_roundtrip(tmp_path):
    records = [
        IterationRecord(iter=0, J=-1.5, J0=-1.0, Ja=0.0, Jb=-0.5,
                        J_norm=0.3, I_P=None, tau_abs=None,
                        field_change_l2=0.0),
        IterationRecord(iter=1, J=-2.0, J0=-1.4, Ja=0.1, Jb=-0.7,
                        delta1=0.4, int_delta2a=0.1, int_delta2b=0.0,
                        J_norm=0.4, I_P=0.99, tau_abs=3.2,
                        field_change_l2=1e-3),
    ]
    path = tmp_path / "records.csv"
    write_records_csv(records, path)
    header = path.read_text().splitlines()[0]
    assert header == ",".join(CSV_COLUMNS)
    assert CSV_COLUMNS[:5] == ["iter", "J", "J0", "Ja", "Jb"]
    back = read_records_csv(path)
    assert back == records
