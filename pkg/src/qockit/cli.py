"""Batch front end: optimizations, spectra and decay scans as data files.

All commands are deterministic (no randomness anywhere in the pipeline);
identical config + model files give bit-identical CSV output.  Plotting is
left to external tooling.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import QockitError, StructureError
from .hilbert import projector_for_subspace
from .krotov import (
    OptimizationRun,
    StopRules,
    optimize_gate,
    optimize_state_to_state,
)
from .model import (
    EPS0_DEFAULT,
    apply_decay,
    build_default_model,
    check_pinned_values,
    guess_field,
    load_model,
    save_model,
)
from .objective import (
    FunctionalConfig,
    GateTarget,
    LambdaAProfile,
    S2STarget,
    tau as gate_tau,
    write_records_csv,
)
from .propagate import (
    ControlField,
    N_STEPS_DEFAULT,
    T_DEFAULT,
    TimeGrid,
    propagate_forward,
)
from .shapes import gaussian_shape

#: atomic units of time per femtosecond
FS_ATOMIC = 41.341374575751


# ---------------------------------------------------------------- config

DEFAULT_CONFIG = {
    "task": "s2s",
    "T": T_DEFAULT,
    "n_steps": N_STEPS_DEFAULT,
    "lambda0": -1.0,
    "lambda_b_T": -32.0,
    "lambda_a": {"c": 100.0, "shape": "gaussian"},
    "direction": "minimize",
    "projector": "allowed",
    "allowed_manifolds": [0, 1],
    "initial": "m1:v0",
    "target": "m1:v1",
    "register": ["m1:v0", "m1:v1", "m1:v2", "m1:v3"],
    "gate": "fourier",
    "guess": {"eps0": EPS0_DEFAULT, "Omega": None},
    "frame": "interaction",
    "max_iters": 500,
    "stride": 64,
}


def load_config(path=None, overrides=None):
    cfg = dict(DEFAULT_CONFIG)
    if path is not None:
        with open(path) as fh:
            try:
                user = json.load(fh)
            except json.JSONDecodeError as err:
                raise StructureError(f"{path}: not valid JSON ({err})") from err
        unknown = set(user) - set(cfg)
        if unknown:
            raise StructureError(f"{path}: unknown config keys {sorted(unknown)}")
        cfg.update(user)
    for key, value in (overrides or {}).items():
        if value is not None:
            cfg[key] = value
    return cfg


def fourier_gate_matrix(n):
    """N-point discrete Fourier matrix O_jk = exp(2 pi i j k / N) / sqrt(N)."""
    j, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.exp(2j * np.pi * j * k / n) / np.sqrt(n)


def allowed_forbidden_projectors(model, allowed_manifolds):
    allowed = []
    for mi in allowed_manifolds:
        allowed.extend(model.labels[mi])
    forbidden = [lab for lab in model.all_labels if lab not in set(allowed)]
    return (
        projector_for_subspace(model, allowed),
        projector_for_subspace(model, forbidden),
    )


def build_run(cfg, model):
    """Translate a config dict into an OptimizationRun."""
    grid = TimeGrid(T=float(cfg["T"]), n_steps=int(cfg["n_steps"]))
    P_allow, P_forbid = allowed_forbidden_projectors(model, cfg["allowed_manifolds"])
    kind = cfg["projector"]
    if kind == "allowed":
        P = P_allow
    elif kind == "forbidden":
        P = P_forbid
    elif isinstance(kind, list):
        P = projector_for_subspace(model, kind)
        kind = "custom"
    else:
        raise StructureError(f"unknown projector spec {kind!r}")

    shape_name = cfg["lambda_a"].get("shape", "gaussian")
    shape = gaussian_shape if shape_name == "gaussian" else None
    if shape_name not in ("gaussian", "constant"):
        raise StructureError(f"unknown lambda_a shape {shape_name!r}")
    lam_a = LambdaAProfile(c=float(cfg["lambda_a"]["c"]), shape=shape)
    lambda_b = float(cfg["lambda_b_T"]) / grid.T

    if cfg["task"] == "s2s":
        target = S2STarget(
            D=projector_for_subspace(model, [cfg["target"]])
        )
    elif cfg["task"] == "gate":
        register = tuple(model.label_index(lab) for lab in cfg["register"])
        if cfg["gate"] == "fourier":
            O = fourier_gate_matrix(len(register))
        elif cfg["gate"] == "identity":
            O = np.eye(len(register), dtype=complex)
        else:
            raise StructureError(f"unknown gate {cfg['gate']!r}")
        target = GateTarget(O=O, register=register)
    else:
        raise StructureError(f"unknown task {cfg['task']!r}")

    config = FunctionalConfig(
        lambda0=float(cfg["lambda0"]),
        lambda_b=lambda_b,
        lambda_a=lam_a,
        target=target,
        projector=P,
        projector_kind=kind,
        direction=cfg["direction"],
        frame=cfg["frame"],
    )
    omega = cfg["guess"].get("Omega")
    guess_kwargs = {"eps0": float(cfg["guess"].get("eps0", EPS0_DEFAULT))}
    if omega is not None:
        guess_kwargs["Omega"] = float(omega)
    run = OptimizationRun(
        config=config,
        model=model,
        grid=grid,
        guess=guess_field(grid, **guess_kwargs),
        stop_rules=StopRules(max_iters=int(cfg["max_iters"])),
    )
    if cfg["task"] == "s2s":
        initial = np.zeros(model.dim, dtype=complex)
        initial[model.label_index(cfg["initial"])] = 1.0
        run.initial_states = initial[None, :]
    return run, {"P_allow": P_allow, "P_forbid": P_forbid}


# ------------------------------------------------------------- artifacts

def save_field(field, path):
    with open(path, "w") as fh:
        fh.write("# t(a.u.) eps(a.u.)\n")
        for t, e in zip(field.grid.nodes(), field.samples):
            fh.write(f"{float(t)!r} {float(e)!r}\n")


def load_field(path):
    data = np.loadtxt(path)
    t, eps = data[:, 0], data[:, 1]
    dts = np.diff(t)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=0.0):
        raise StructureError(f"{path}: field grid is not uniform")
    grid = TimeGrid(T=float(t[-1]), n_steps=len(t) - 1)
    return ControlField(grid, eps)


def write_populations_csv(path, model, trajectory, P_allow, P_forbid, stride):
    """Per-node populations of the tracked levels and subspaces, column 0.

    Rows are subsampled by `stride`; the final node is always included.
    """
    tracked = [lab for lab in ("m1:v0", "m1:v1", "m2:v10", "m3:v6")
               if lab in model.all_labels]
    idx = list(range(0, trajectory.grid.n_nodes, stride))
    if idx[-1] != trajectory.grid.n_nodes - 1:
        idx.append(trajectory.grid.n_nodes - 1)
    idx = np.asarray(idx)
    t = trajectory.grid.nodes()[idx]
    states = trajectory.states[0][idx]  # initial-state column
    allow_diag = np.real(np.diag(P_allow))
    forbid_diag = np.real(np.diag(P_forbid))
    pops = np.abs(states) ** 2
    p_allow = pops @ allow_diag
    p_forbid = pops @ forbid_diag
    p_total = pops.sum(axis=1)
    with open(path, "w") as fh:
        fh.write("t," + ",".join(f"P_{lab}" for lab in tracked)
                 + ",P_allow,P_forbid,P_total\n")
        for row in range(len(idx)):
            vals = [t[row]]
            vals += [pops[row, model.label_index(lab)] for lab in tracked]
            vals += [p_allow[row], p_forbid[row], p_total[row]]
            fh.write(",".join(repr(float(v)) for v in vals) + "\n")


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, command, cfg, model_path, outputs, wall_time):
    manifest = {
        "command": command,
        "config": cfg,
        "model_file": str(model_path) if model_path else "builtin-default",
        "model_sha256": _sha256(model_path) if model_path else None,
        "tool_version": __version__,
        "deterministic": "no randomness anywhere in the pipeline",
        "wall_time_s": wall_time,
        "outputs": sorted([str(p.name) for p in outputs] + ["manifest.json"]),
    }
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return path


# ------------------------------------------------------------- spectrum

def field_spectrum(samples, dt, squared=False):
    """One- or two-photon spectrum: |DFT| of eps(t) or eps(t)^2.

    The forward transform is scaled by dt (continuous-FT convention), so
    amplitudes are grid-independent at fixed horizon.  Returns the
    nonnegative-frequency half (omega_k = 2 pi k / (N dt)).
    """
    values = np.asarray(samples, dtype=float)[:-1]  # drop duplicate end node
    if squared:
        values = values * values
    n = values.size
    amp = np.abs(np.fft.rfft(values)) * dt
    omega = 2.0 * np.pi * np.fft.rfftfreq(n, d=dt)
    return omega, amp


def spectral_energy(samples, dt):
    """Total energy from the DFT bins, measure d omega / (2 pi).

    Equals sum |eps(t_i)|^2 dt exactly (discrete Parseval identity).
    """
    values = np.asarray(samples, dtype=float)[:-1]
    X = np.fft.fft(values) * dt
    n = values.size
    domega = 2.0 * np.pi / (n * dt)
    return float(np.sum(np.abs(X) ** 2) * domega / (2.0 * np.pi))


def transition_table(model):
    """Transition frequencies and couplings of both adjacent blocks."""
    rows = []
    e = model.flat_energies().real
    offs = model.offsets
    for b, block in enumerate(model.couplings):
        for i in range(block.shape[0]):
            for j in range(block.shape[1]):
                rows.append((
                    model.all_labels[offs[b] + i],
                    model.all_labels[offs[b + 1] + j],
                    e[offs[b + 1] + j] - e[offs[b] + i],
                    block[i, j],
                ))
    return rows


# ------------------------------------------------------------- commands

def _resolve_model(args):
    if getattr(args, "model", None):
        return load_model(args.model), Path(args.model)
    return build_default_model(), None


def _run_command(args, task):
    t0 = time.perf_counter()
    overrides = {"max_iters": args.iters, "lambda_b_T": args.lambda_b_T,
                 "stride": args.stride, "task": task}
    cfg = load_config(args.config, overrides)
    model, model_path = _resolve_model(args)
    run, projs = build_run(cfg, model)
    if task == "s2s":
        optimize_state_to_state(run)
    else:
        optimize_gate(run)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    p = out / "iterations.csv"
    write_records_csv(run.records, p)
    outputs.append(p)
    p = out / "field_final.dat"
    save_field(run.final_field, p)
    outputs.append(p)
    p = out / "populations.csv"
    write_populations_csv(p, model, run.final_trajectory,
                          projs["P_allow"], projs["P_forbid"],
                          int(cfg["stride"]))
    outputs.append(p)
    outputs.append(write_manifest(out, f"run-{task}", cfg, model_path, outputs,
                                  time.perf_counter() - t0))
    rec = run.records[-1]
    print(f"run-{task}: {len(run.records) - 1} iterations, J = {rec.J:.6g}, "
          f"J_norm = {rec.J_norm if rec.J_norm is None else round(rec.J_norm, 6)}")
    if not run.sign_verdict:
        print("warning: sign conditions not satisfied:", file=sys.stderr)
        for reason in run.sign_verdict.reasons:
            print(f"  {reason}", file=sys.stderr)
    return 0


def cmd_run_s2s(args):
    return _run_command(args, "s2s")


def cmd_run_gate(args):
    return _run_command(args, "gate")


def cmd_spectrum(args):
    field = load_field(args.field)
    model, _ = _resolve_model(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dt = field.grid.dt
    for squared, name in ((False, "spectrum_one_photon.csv"),
                          (True, "spectrum_two_photon.csv")):
        omega, amp = field_spectrum(field.samples, dt, squared=squared)
        with open(out / name, "w") as fh:
            fh.write("omega(a.u.),amplitude\n")
            for w, a in zip(omega, amp):
                fh.write(f"{float(w)!r},{float(a)!r}\n")
    with open(out / "transitions.csv", "w") as fh:
        fh.write("from,to,omega(a.u.),coupling\n")
        for row in transition_table(model):
            fh.write(f"{row[0]},{row[1]},{float(row[2])!r},{float(row[3])!r}\n")
    print(f"spectrum: wrote 3 files to {out}")
    return 0


def default_lifetime_grid():
    """Logarithmic lifetimes from 10 fs to 100 ps (a.u.)."""
    return np.geomspace(10.0 * FS_ATOMIC, 1.0e5 * FS_ATOMIC, 25)


def decay_scan(model, field, cfg, lifetimes, decay_manifold=2):
    """Propagate a fixed field under increasing decay rates.

    Returns rows (tau_L, Gamma, objective, P_s) where the objective is
    P_target(T) for s2s and |tau|/N_r for gates, and P_s is the total
    population remaining in the system at T.
    """
    rows = []
    grid = field.grid
    if cfg["task"] == "gate":
        register = [model.label_index(lab) for lab in cfg["register"]]
        O = fourier_gate_matrix(len(register)) if cfg["gate"] == "fourier" \
            else np.eye(len(register), dtype=complex)
        target = GateTarget(O=O, register=tuple(register))
        initials = np.zeros((len(register), model.dim), dtype=complex)
        for n, idx in enumerate(register):
            initials[n, idx] = 1.0
        phases = np.exp(-1j * model.flat_energies().real[register] * grid.T)
        targets = target.target_states(model.dim, phases)
    else:
        target_idx = model.label_index(cfg["target"])
        initials = np.zeros((1, model.dim), dtype=complex)
        initials[0, model.label_index(cfg["initial"])] = 1.0

    for tau_L in lifetimes:
        gamma = 0.0 if np.isinf(tau_L) else 1.0 / float(tau_L)
        decayed = apply_decay(model, gamma, decay_manifold)
        traj = propagate_forward(decayed, field, list(initials))
        finals = traj.final_states()
        if cfg["task"] == "gate":
            objective = abs(gate_tau(list(finals), list(targets))) / len(targets)
        else:
            objective = float(np.abs(finals[0, target_idx]) ** 2)
        p_s = float(np.mean(np.sum(np.abs(finals) ** 2, axis=1)))
        rows.append((float(tau_L), gamma, objective, p_s))
    return rows


def cmd_decay_scan(args):
    cfg = load_config(args.config, {"task": args.mode} if args.mode else None)
    model, _ = _resolve_model(args)
    field = load_field(args.field)
    if args.lifetimes:
        lifetimes = np.asarray(
            [float(x) for x in args.lifetimes.split(",")], dtype=float
        )
        if np.any(lifetimes <= 0):
            raise StructureError("lifetimes must be positive")
    else:
        lifetimes = default_lifetime_grid()
    rows = decay_scan(model, field, cfg, lifetimes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "decay_scan.csv"
    obj_name = "tau_over_Nr" if cfg["task"] == "gate" else "P_target"
    with open(path, "w") as fh:
        fh.write(f"tau_L(a.u.),Gamma(a.u.),{obj_name},P_s\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    print(f"decay-scan: wrote {path}")
    return 0


def cmd_model(args):
    if args.action == "gen":
        model = build_default_model()
        save_model(model, args.out)
        print(f"model gen: wrote {args.out}")
        return 0
    model, _ = _resolve_model(args)
    report = check_pinned_values(model)
    ok = True
    for name, entry in report.items():
        status = "ok" if entry["ok"] else "FAIL"
        ok = ok and entry["ok"]
        print(f"{name}: {entry['value']:.6g} (expected {entry['expected']}) {status}")
    return 0 if ok else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qockit",
        description="Krotov optimal control with state-dependent constraints",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_config=True):
        if with_config:
            p.add_argument("--config", help="JSON config file")
        p.add_argument("--model", help="model file (default: builtin)")
        p.add_argument("--out", default="out", help="output directory")

    for name, func in (("run-s2s", cmd_run_s2s), ("run-gate", cmd_run_gate)):
        p = sub.add_parser(name)
        add_common(p)
        p.add_argument("--iters", type=int, default=None)
        p.add_argument("--lambda-b-T", dest="lambda_b_T", type=float, default=None)
        p.add_argument("--stride", type=int, default=None)
        p.set_defaults(func=func)

    p = sub.add_parser("spectrum")
    add_common(p, with_config=False)
    p.add_argument("--field", required=True, help="field file to transform")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("decay-scan")
    add_common(p)
    p.add_argument("--field", required=True, help="optimized field file")
    p.add_argument("--mode", choices=["s2s", "gate"], default=None)
    p.add_argument("--lifetimes", help="comma-separated lifetimes in a.u.")
    p.set_defaults(func=cmd_decay_scan)

    p = sub.add_parser("model")
    p.add_argument("action", choices=["gen", "check"])
    p.add_argument("--model", help="model file to check")
    p.add_argument("--out", default="model.json", help="output for gen")
    p.set_defaults(func=cmd_model)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except QockitError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
