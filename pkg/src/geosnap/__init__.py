"""Geometric SNAP gates on a dispersively coupled qubit-oscillator system.

Pulse synthesis for two geometric loop schemes, per-block and open-system
time evolution, functional-theory pulse optimization, and the fidelity,
error-budget, and robustness analyses built on top of them.
"""

__version__ = "0.1.0"

from .pulse import (
    DriveTone,
    ErrorModel,
    PathSegments,
    PulseSchedule,
    Scheme,
    SnapTarget,
    ToneSegment,
    apply_error,
    gate_time,
    orange_slice_schedule,
    path_designed_schedule,
    path_segments,
    sine_envelope,
)
from .system import (
    BlockControls,
    BlockMode,
    SystemParams,
    build_block_hamiltonian,
    effective_block_controls,
    full_space_hamiltonian,
)
from .geometry import (
    PhaseDecomposition,
    Trajectory,
    TrajectoryClosureError,
    TrajectoryState,
    auxiliary_states,
    cyclicity_check,
    holonomy_unitary,
    integrate_trajectory,
    phase_decomposition,
)
from .dynamics import (
    DensityResult,
    EvolutionResult,
    bloch_samples,
    evolve_lindblad,
    evolve_unitary,
    propagate_blocks_grid,
)
from .qocf import (
    AdjustmentParams,
    LinearAdjustResult,
    QocfObjective,
    constraint_residual,
    correlation_matrix,
    lagrange_multiplier,
    lagrange_objective,
    linear_adjust,
    pearson_correlation,
    pi_n,
    xi_n,
)
from .metrics import (
    ErrorBudget,
    FidelityReport,
    SweepGrid,
    amplitude_sweep,
    error_budget,
    gate_fidelity,
    open_system_fidelity,
    probe_states,
    robustness_sweep,
    snap_target,
)

__all__ = [name for name in dir() if not name.startswith("_")]
