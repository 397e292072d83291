"""Three-manifold Rb2-like level model, guess field, decay and model files.

The level energies are anharmonic ladders E_v = T_e + w_e (v + 1/2)
- w_e x_e (v + 1/2)^2 and the couplings are displaced-harmonic-oscillator
overlaps scaled by a dipole constant.  Four default parameters are pinned
to the quoted transition frequencies (0.0507 and 0.0506 a.u.) and coupling
moduli (0.17 and 0.23).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import StructureError
from .hilbert import Model
from .propagate import ControlField
from .shapes import gaussian_shape

#: Pinned transition frequency v=0 -> v'=10 (a.u.).
OMEGA_12 = 0.0507
#: Pinned transition frequency v'=10 -> v''=6 (a.u.).
OMEGA_23 = 0.0506
#: Pinned coupling moduli |FCF| for those two transitions.
FCF_12 = 0.17
FCF_23 = 0.23
#: Default guess-field amplitude (a.u.).
EPS0_DEFAULT = 1e-4

MODEL_FILE_VERSION = 1


def ho_overlap_table(w1, w2, d, n1_max, n2_max):
    """Overlaps <m; w1, x=0 | n; w2, x=d> of two harmonic ladders.

    Filled by the standard two-term recursions obtained from the ladder
    operator relations between the two oscillators (hbar = mass = 1).
    Returns an array of shape (n1_max + 1, n2_max + 1).
    """
    if not (math.isfinite(d) and w1 > 0 and w2 > 0):
        raise StructureError("overlap recursion needs finite d and positive frequencies")
    a, b = float(w1), float(w2)
    sp = 0.5 * (math.sqrt(b / a) + math.sqrt(a / b))
    sm = 0.5 * (math.sqrt(b / a) - math.sqrt(a / b))
    denom = 1.0 + sm * sm
    ca = math.sqrt(a / 2.0) * d
    cb = math.sqrt(b / 2.0) * d

    S = np.zeros((n1_max + 1, n2_max + 1))
    S[0, 0] = math.sqrt(2.0 * math.sqrt(a * b) / (a + b)) * math.exp(
        -a * b * d * d / (2.0 * (a + b))
    )
    # ket-raising along the m = 0 row
    for n in range(1, n2_max + 1):
        val = (sm * ca - cb) * S[0, n - 1]
        if n >= 2:
            val += sm * sp * math.sqrt(n - 1) * S[0, n - 2]
        S[0, n] = val / (math.sqrt(n) * denom)
    # bra-raising for the remaining rows
    for m in range(1, n1_max + 1):
        for n in range(n2_max + 1):
            val = (ca + sm * cb) * S[m - 1, n]
            if n >= 1:
                val += sp * math.sqrt(n) * S[m - 1, n - 1]
            if m >= 2:
                val -= sm * sp * math.sqrt(m - 1) * S[m - 2, n]
            S[m, n] = val / (math.sqrt(m) * denom)
    if not np.all(np.isfinite(S)):
        raise StructureError("overlap recursion did not converge for these parameters")
    return S


def synthesize_fcf_block(d, r, bra_levels, ket_levels, mu0=1.0):
    """Coupling block between two vibrational windows.

    d is the dimensionless displacement (bra-oscillator natural units),
    r the ket/bra frequency ratio; rows/columns are restricted to the
    given vibrational windows and scaled by mu0.
    """
    if r <= 0:
        raise StructureError("frequency ratio must be positive")
    bra = np.asarray(list(bra_levels), dtype=int)
    ket = np.asarray(list(ket_levels), dtype=int)
    table = ho_overlap_table(1.0, r, d, int(bra.max()), int(ket.max()))
    return mu0 * table[np.ix_(bra, ket)]


@dataclass(frozen=True)
class ManifoldSpec:
    """Anharmonic ladder covering vibrational levels v_lo..v_hi."""

    v_lo: int
    v_hi: int
    T_e: float
    omega_e: float
    omega_chi: float

    def levels(self):
        return range(self.v_lo, self.v_hi + 1)

    def energy(self, v):
        x = v + 0.5
        return self.T_e + self.omega_e * x - self.omega_chi * x * x


@dataclass(frozen=True)
class CouplingSpec:
    """Displaced-harmonic synthesis parameters for one adjacent block."""

    d: float
    r: float
    mu0: float = 1.0


@dataclass(frozen=True)
class ModelSpec:
    manifolds: tuple
    couplings: tuple
    decay: dict = None  # {"manifold": int, "gamma": float}


def build_model(spec):
    """Assemble a Model from ladder and coupling parameters."""
    energies, labels = [], []
    for i, mspec in enumerate(spec.manifolds):
        evals = np.array([mspec.energy(v) for v in mspec.levels()], dtype=complex)
        if np.any(np.diff(evals.real) <= 0):
            raise StructureError(f"ladder of manifold {i} is not strictly increasing")
        energies.append(evals)
        labels.append(tuple(f"m{i + 1}:v{v}" for v in mspec.levels()))
    couplings = []
    for i, cspec in enumerate(spec.couplings):
        block = synthesize_fcf_block(
            cspec.d, cspec.r,
            spec.manifolds[i].levels(), spec.manifolds[i + 1].levels(),
            mu0=cspec.mu0,
        )
        couplings.append(block)
    meta = {"generator": {
        "manifolds": [asdict(m) for m in spec.manifolds],
        "couplings": [asdict(c) for c in spec.couplings],
    }}
    model = Model(tuple(energies), tuple(couplings), tuple(labels), meta)
    if spec.decay is not None:
        model = apply_decay(model, spec.decay["gamma"], spec.decay["manifold"])
    return model


def _solve_displacement(r, bra_level, ket_level, target_abs):
    """Smallest displacement at which |overlap(bra, ket)| hits target_abs."""
    n1, n2 = bra_level, ket_level

    def f(d):
        return abs(ho_overlap_table(1.0, r, d, n1, n2)[n1, n2]) - target_abs

    ds = np.linspace(1e-3, 12.0, 600)
    vals = np.array([f(d) for d in ds])
    for k in range(len(ds) - 1):
        if vals[k] < 0.0 <= vals[k + 1]:
            return float(brentq(f, ds[k], ds[k + 1], xtol=1e-14))
    raise StructureError(
        f"no displacement reaches |overlap| = {target_abs} for ratio {r}"
    )


def default_model_spec():
    """Surrogate Rb2 parameters with the four quoted values pinned.

    Ladder constants are near real Rb2 scales; the electronic origins are
    fixed so that E(v'=10) - E(v=0) = 0.0507 a.u. and E(v''=6) - E(v'=10)
    = 0.0506 a.u.; the block displacements are solved so that the two
    quoted coupling moduli (0.17, 0.23) are met exactly.
    """
    w = (2.6e-4, 2.2e-4, 1.9e-4)
    chi = (1.0e-6, 1.0e-6, 1.0e-6)

    def ladder(v, i, T_e=0.0):
        x = v + 0.5
        return T_e + w[i] * x - chi[i] * x * x

    T_e2 = OMEGA_12 + ladder(0, 0) - ladder(10, 1)
    T_e3 = OMEGA_23 + ladder(10, 1, T_e2) - ladder(6, 2)
    m1 = ManifoldSpec(0, 10, 0.0, w[0], chi[0])
    m2 = ManifoldSpec(5, 15, T_e2, w[1], chi[1])
    m3 = ManifoldSpec(2, 12, T_e3, w[2], chi[2])

    r12 = w[1] / w[0]
    r23 = w[2] / w[1]
    d12 = _solve_displacement(r12, 0, 10, FCF_12)
    d23 = _solve_displacement(r23, 10, 6, FCF_23)
    return ModelSpec(
        manifolds=(m1, m2, m3),
        couplings=(CouplingSpec(d12, r12), CouplingSpec(d23, r23)),
    )


def build_default_model():
    """33-level default model (3 manifolds x 11 levels)."""
    return build_model(default_model_spec())


def guess_field(grid, eps0=EPS0_DEFAULT, Omega=OMEGA_12):
    """Gaussian-enveloped guess pulse with carrier frequency Omega.

    eps_g(t) = eps0 s(t) cos[Omega (t - T/2)] with the Gaussian shape
    s(t); the carrier phase is referenced to the pulse center so the
    spectrum peaks at Omega.
    """
    t = grid.nodes()
    samples = eps0 * gaussian_shape(t, grid.T) * np.cos(Omega * (t - 0.5 * grid.T))
    return ControlField(grid, samples)


def apply_decay(model, gamma, manifold):
    """Copy of the model with energies of one manifold shifted by -i gamma/2."""
    if gamma < 0:
        raise StructureError("gamma must be >= 0")
    if not 0 <= manifold < len(model.energies):
        raise StructureError(f"manifold index {manifold} out of range")
    if gamma == 0.0:
        return model
    energies = list(np.asarray(e, dtype=complex) for e in model.energies)
    energies[manifold] = energies[manifold] - 0.5j * gamma
    return Model(tuple(energies), model.couplings, model.labels, dict(model.meta))


def save_model(model, path):
    """Write the model file (JSON: manifolds[], couplings[], meta)."""
    doc = {
        "meta": {"units": "atomic", "version": MODEL_FILE_VERSION, **model.meta},
        "manifolds": [
            {
                "labels": list(model.labels[i]),
                "energies_re": [float(x) for x in np.real(model.energies[i])],
                "energies_im": [float(x) for x in np.imag(model.energies[i])],
            }
            for i in range(len(model.energies))
        ],
        "couplings": [
            {"from": i, "to": i + 1,
             "matrix": [[float(x) for x in row] for row in model.couplings[i]]}
            for i in range(len(model.couplings))
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path):
    """Read a model file, validating structure and invariants."""
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as err:
            raise StructureError(f"{path}: not valid JSON ({err})") from err
    try:
        manifolds = doc["manifolds"]
        coupling_docs = doc["couplings"]
    except KeyError as err:
        raise StructureError(f"{path}: missing section {err}") from err

    energies, labels = [], []
    for i, man in enumerate(manifolds):
        re = np.asarray(man["energies_re"], dtype=float)
        im = np.asarray(man["energies_im"], dtype=float)
        if re.shape != im.shape:
            raise StructureError(
                f"{path}: manifold {i} energies_re/energies_im lengths differ"
            )
        if np.any(im > 0):
            raise StructureError(
                f"{path}: manifold {i} violates Im(energy) <= 0"
            )
        energies.append(re + 1j * im)
        labels.append(tuple(man["labels"]))

    couplings = [None] * (len(energies) - 1)
    for c in coupling_docs:
        i, j = c["from"], c["to"]
        if j != i + 1:
            raise StructureError(
                f"{path}: coupling block {i}->{j} connects non-adjacent manifolds"
            )
        mat = np.asarray(c["matrix"], dtype=float)
        want = (len(energies[i]), len(energies[j]))
        if mat.shape != want:
            raise StructureError(
                f"{path}: coupling block {i}->{j} has shape {mat.shape}, "
                f"expected {want}"
            )
        couplings[i] = mat
    if any(c is None for c in couplings):
        raise StructureError(f"{path}: missing coupling block")
    return Model(tuple(energies), tuple(couplings), tuple(labels),
                 dict(doc.get("meta", {})))


def check_pinned_values(model):
    """The four quoted default-model numbers, with 4-significant-figure flags."""

    def sig4(x):
        return float(f"{x:.4g}")

    i_v0 = model.label_index("m1:v0")
    i_v10p = model.label_index("m2:v10")
    i_v6pp = model.label_index("m3:v6")
    e = model.flat_energies().real
    offs = model.offsets
    w12 = e[i_v10p] - e[i_v0]
    w23 = e[i_v6pp] - e[i_v10p]
    f12 = abs(model.couplings[0][i_v0 - offs[0], i_v10p - offs[1]])
    f23 = abs(model.couplings[1][i_v10p - offs[1], i_v6pp - offs[2]])
    return {
        "omega_12": {"value": w12, "expected": OMEGA_12,
                     "ok": sig4(w12) == OMEGA_12},
        "omega_23": {"value": w23, "expected": OMEGA_23,
                     "ok": sig4(w23) == OMEGA_23},
        "fcf_12": {"value": f12, "expected": FCF_12, "ok": sig4(f12) == FCF_12},
        "fcf_23": {"value": f23, "expected": FCF_23, "ok": sig4(f23) == FCF_23},
    }
