"""Core problem description and Hamiltonian machinery.

A hybrid optimal control problem couples smooth dynamics ``xdot = f(x, u)``
with instantaneous state jumps ``x+ = g_i(x-)`` that fire autonomously when
a detection function ``psi_i`` crosses zero.  The cost is Bolza-type,
``phi(x(T)) + integral L(x, u) dt``.  Everything a solver needs -- dynamics,
jumps, detections, costs, their analytic gradients, and the closed-form
Hamiltonian minimizer -- is collected in :class:`ProblemDefinition`.

The admissible control set is not stored separately: it is encoded in
``hamiltonian_minimizer``, which is the only place the solver ever needs it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

Array = np.ndarray
Dynamics = Callable[[Array, Array], Array]
JumpMap = Callable[[Array], Array]
Detection = Callable[[Array], float]


@dataclass(frozen=True)
class ProblemDefinition:
    """Immutable bundle of problem data and analytic derivatives.

    ``jump_maps[i]`` and ``detections[i]`` describe the i-th colliding pair;
    ``detection_gradient(x, i)`` / ``jump_jacobian(x, i)`` return the row
    vector ``psi_x`` and matrix ``g_x`` of that pair evaluated at ``x``.
    Gradients of scalars are row vectors (1-D arrays).

    ``collision_time`` is an optional exact predictor ``(x, u, dt) ->
    (s, manifold_id)`` for the first root of ``psi_i(x + s f(x, u))``; when
    absent the forward integrator falls back to sampled bisection.

    ``lipschitz_f_u`` (a bound on ``|f(x,u') - f(x,u)| / |u' - u|``) is only
    consumed by the collision-stability diagnostic.
    """

    state_dim: int
    control_dim: int
    dynamics: Dynamics
    jump_maps: Sequence[JumpMap]
    detections: Sequence[Detection]
    detection_gradient: Callable[[Array, int], Array]
    jump_jacobian: Callable[[Array, int], Array]
    running_cost: Callable[[Array, Array], float]
    running_cost_grad_x: Callable[[Array, Array], Array]
    terminal_cost: Callable[[Array], float]
    terminal_cost_grad: Callable[[Array], Array]
    dynamics_jac_x: Callable[[Array, Array], Array]
    hamiltonian_minimizer: Callable[[Array, Array], Array]
    hamiltonian_grad_u: Callable[[Array, Array, Array], Array]
    lipschitz_f_u: Optional[float] = None
    collision_time: Optional[Callable[[Array, Array, float], "tuple[float, int | None]"]] = None

    def __post_init__(self):
        if self.state_dim <= 0 or self.control_dim <= 0:
            raise ValueError("state_dim and control_dim must be positive")
        if len(self.jump_maps) != len(self.detections) or len(self.detections) < 1:
            raise ValueError("need equally many jump maps and detections (at least one pair)")

    @property
    def n_manifolds(self) -> int:
        return len(self.detections)


@dataclass
class ControlGrid:
    """N control vectors on a uniform grid over [0, T], left endpoints.

    ``values[n]`` is the control held on ``[t_n, t_{n+1})`` with
    ``t_n = n * dt`` and ``dt = horizon / N``.
    """

    values: Array
    horizon: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:  # flat input reads as N scalar controls
            self.values = self.values[:, None]
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise ValueError("control grid needs shape (N, control_dim) with N >= 1")
        if not self.horizon > 0.0:
            raise ValueError("horizon must be positive")

    @property
    def steps(self) -> int:
        return self.values.shape[0]

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    def times(self) -> Array:
        """Left-endpoint sample times t_0 .. t_{N-1}."""
        return np.arange(self.steps) * self.dt

    def copy(self) -> "ControlGrid":
        return ControlGrid(self.values.copy(), self.horizon)

    @staticmethod
    def constant(u: Array, steps: int, horizon: float) -> "ControlGrid":
        u = np.asarray(u, dtype=float)
        return ControlGrid(np.tile(u, (steps, 1)), horizon)


@dataclass
class CollisionRecord:
    """One inserted collision sub-step of the forward pass.

    The jump fired inside interval ``index`` at local offset ``substep``
    (so at absolute time ``index * dt + substep``), on manifold
    ``manifold_id``.  ``pre_state`` sits on the manifold, ``post_state``
    is its image under the active jump map.
    """

    index: int
    substep: float
    pre_state: Array
    post_state: Array
    manifold_id: int


@dataclass
class HybridTrajectory:
    """States x_0 .. x_N plus the collision records gathered along the way."""

    states: Array
    collisions: list[CollisionRecord] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return self.states.shape[0] - 1

    def collision_steps(self) -> list[int]:
        """The active collision index set (steps with an inserted sub-step)."""
        return [rec.index for rec in self.collisions]

    def collision_times(self, dt: float) -> list[float]:
        return [rec.index * dt + rec.substep for rec in self.collisions]


@dataclass
class CostateJumpRecord:
    """Costate jump data at one collision of the backward pass.

    ``lam_plus``/``lam_minus`` are the costates immediately after/before the
    jump (in forward time), ``eta`` the collision-time multiplier, and
    ``u_plus``/``u_minus`` the resolved after/before-jump controls that were
    fed to the jump formula.  ``located_index`` is the grid index at which
    the control discontinuity was located.
    """

    collision_index: int
    lam_plus: Array
    lam_minus: Array
    eta: float
    u_plus: Array
    u_minus: Array
    located_index: int


@dataclass
class CostateGrid:
    """Costates lambda_1 .. lambda_N; ``values[i]`` holds lambda at t_{i+1}.

    The off-by-one storage mirrors the pairing used everywhere downstream:
    the control at node n is scored against ``values[n]`` (= lambda_{n+1}).
    lambda_0 is never produced nor needed.
    """

    values: Array
    jump_records: list[CostateJumpRecord] = field(default_factory=list)

    @property
    def steps(self) -> int:
        return self.values.shape[0]

    def after(self, n: int) -> Array:
        """lambda_{n+1}, the costate paired with state/control node n."""
        return self.values[n]


def evaluate_hamiltonian(p: ProblemDefinition, x: Array, lam: Array, u: Array) -> float:
    """H(x, lambda, u) = lambda . f(x, u) + L(x, u)."""
    return float(lam @ p.dynamics(x, u) + p.running_cost(x, u))


def hamiltonian_grad_x(p: ProblemDefinition, x: Array, lam: Array, u: Array) -> Array:
    """Row vector H_x = lambda^T f_x + L_x."""
    return lam @ p.dynamics_jac_x(x, u) + p.running_cost_grad_x(x, u)


def transversality(p: ProblemDefinition, x: Array, u: Array, manifold_id: int) -> float:
    """Normal approach speed psi_x(x) . f(x, u) toward manifold ``manifold_id``.

    Only meaningful where the detection is in its smooth (approaching)
    branch; callers must not query the constant branch.  Negative values
    mean the state is moving into the manifold.
    """
    return float(p.detection_gradient(x, manifold_id) @ p.dynamics(x, u))
