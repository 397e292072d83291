"""Optimal control of coupled vibrational manifolds with Krotov updates.

The package provides a 33-level three-manifold ladder model, a split-step
propagator working in the dipole eigenbasis, and a monotonically convergent
iterative optimizer supporting state-dependent constraints (population
suppression in a chosen subspace) for both state-to-state transfer and
quantum-gate objectives.
"""

__version__ = "0.1.0"

from .errors import (
    PropagationError,
    QockitError,
    StructureError,
    UnknownLabelError,
)
from .hilbert import (
    Model,
    assemble_h0,
    assemble_hamiltonian,
    assemble_mu,
    expectation,
    is_hermitian,
    is_projector,
    projector_for_subspace,
)
from .krotov import (
    OptimizationRun,
    SignVerdict,
    StopRules,
    chi_boundary_gate,
    chi_boundary_state,
    optimize_gate,
    optimize_state_to_state,
    update_field_step,
    validate_signs,
)
from .model import (
    CouplingSpec,
    ManifoldSpec,
    ModelSpec,
    apply_decay,
    build_default_model,
    build_model,
    check_pinned_values,
    default_model_spec,
    guess_field,
    ho_overlap_table,
    load_model,
    save_model,
    synthesize_fcf_block,
)
from .objective import (
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
    metrics,
    read_records_csv,
    tau,
    write_records_csv,
)
from .propagate import (
    ControlField,
    N_STEPS_DEFAULT,
    SplitPropagator,
    T_DEFAULT,
    TimeGrid,
    Trajectory,
    propagate_backward_inhomogeneous,
    propagate_forward,
    step,
    step_inhomogeneous,
)
from .shapes import gaussian_shape
