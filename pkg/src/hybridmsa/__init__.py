"""Optimal control of dynamics with collision-type state jumps.

The solver alternates a forward simulation of the jumping dynamics, a
backward costate sweep with jump conditions, and a relaxed pointwise
Hamiltonian-minimization update of the control.  Ships with two-disc
benchmark problems, their closed-form reference solutions, a
discretize-then-differentiate gradient-descent baseline, and a CSV-emitting
experiment CLI (``hybridmsa``).
"""

from .backward import (
    JumpControls,
    costate_jump,
    integrate_backward,
    locate_discontinuity,
    resolve_jump_controls,
    solve_eta,
)
from .baseline import discrete_gradient, gd_solve
from .discs import DiscWorldConfig, WallConfig, build_problem, initial_state, seminorm
from .errors import (
    BranchBoundaryWarning,
    ConfigError,
    DegenerateWindow,
    DomainError,
    IsolationViolation,
    NoInteriorMinimum,
    NonFiniteError,
    OracleUnavailable,
    SolverError,
    TransversalityLost,
    WallNotReached,
)
from .forward import NO_COLLISION, StepOutcome, estimate_collision_time, simulate, step_forward
from .ocp import (
    CollisionRecord,
    ControlGrid,
    CostateGrid,
    CostateJumpRecord,
    HybridTrajectory,
    ProblemDefinition,
    evaluate_hamiltonian,
    hamiltonian_grad_x,
    transversality,
)
from .oracle import (
    OracleSolution,
    pre_collision_control,
    reduced_objective,
    solve_concentric,
    solve_experiment,
    solve_general,
    solve_wall,
)
from .solver import (
    SolveReport,
    SolverParams,
    StabilityRecord,
    control_update,
    fit_geometric_ratio,
    hu_norm,
    semimetric,
    solve,
    stability_margin,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
