"""Backward costate sweep with jump conditions.

Between collisions the costate obeys the usual adjoint recursion
``lam_n = lam_{n+1} + dt * H_x^T``.  Across a collision it jumps:

    lam_minus^T = lam_plus^T g_x(x_minus) + eta * psi_x(x_minus)

where the scalar ``eta`` accounts for the variation of the collision time
and is equivalent to requiring the Hamiltonian to be continuous across the
jump.  The jump formula needs the control values just after/before the
control's own discontinuity, which during the iteration is not yet aligned
with the state's collision: we locate the steepest control variation near
the collision index and extrapolate one node past it on either side, which
keeps the (dt-free, hence O(1)-sensitive) jump term stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TransversalityLost
from .ocp import (
    Array,
    ControlGrid,
    CostateGrid,
    CostateJumpRecord,
    HybridTrajectory,
    ProblemDefinition,
    hamiltonian_grad_x,
)

#: Guard on |psi_x . f| in the eta denominator.
TRANSVERSALITY_GUARD = 1e-10


def solve_eta(
    p: ProblemDefinition,
    lam_plus: Array,
    x_minus: Array,
    x_plus: Array,
    u_minus: Array,
    u_plus: Array,
    manifold_id: int,
) -> float:
    """Collision-time multiplier eta of the costate jump.

    Solves
        lam+^T g_x f- - lam+^T f+ + eta psi_x f- + L- - L+ = 0
    for eta; raises :class:`TransversalityLost` when the denominator
    ``psi_x f-`` falls below the guard (grazing collision).
    """
    f_minus = p.dynamics(x_minus, u_minus)
    f_plus = p.dynamics(x_plus, u_plus)
    g_x = p.jump_jacobian(x_minus, manifold_id)
    psi_x = p.detection_gradient(x_minus, manifold_id)
    denom = float(psi_x @ f_minus)
    if abs(denom) <= TRANSVERSALITY_GUARD:
        raise TransversalityLost(denom)
    numer = (
        float((lam_plus @ g_x) @ f_minus)
        - float(lam_plus @ f_plus)
        + p.running_cost(x_minus, u_minus)
        - p.running_cost(x_plus, u_plus)
    )
    return -numer / denom


def costate_jump(
    p: ProblemDefinition,
    lam_plus: Array,
    x_minus: Array,
    x_plus: Array,
    u_minus: Array,
    u_plus: Array,
    manifold_id: int,
) -> Array:
    """Map the after-jump costate to the before-jump costate."""
    eta = solve_eta(p, lam_plus, x_minus, x_plus, u_minus, u_plus, manifold_id)
    g_x = p.jump_jacobian(x_minus, manifold_id)
    psi_x = p.detection_gradient(x_minus, manifold_id)
    return lam_plus @ g_x + eta * psi_x


@dataclass
class JumpControls:
    """Resolved after/before-jump control values around one collision."""

    u_plus: Array
    u_minus: Array
    located_index: int


def locate_discontinuity(u: ControlGrid, c: int, tau: float) -> int:
    """Index of the steepest adjacent control variation near collision index c.

    Searches ``|n - c| < l`` with ``l = max(1, round(tau * N))``, clamped to
    valid difference indices [0, N-2].  Ties break toward the smallest
    index (first occurrence).
    """
    n_steps = u.steps
    if n_steps < 2:
        return 0
    window = max(1, round(tau * n_steps))
    lo = max(0, c - window + 1)
    hi = min(n_steps - 2, c + window - 1)
    diffs = np.linalg.norm(u.values[lo : hi + 1] - u.values[lo + 1 : hi + 2], axis=1)
    return lo + int(np.argmax(diffs))


def resolve_jump_controls(u: ControlGrid, c_star: int) -> JumpControls:
    """One-past extrapolation of the controls on either side of the break.

    The discontinuity sits between nodes ``c_star`` and ``c_star + 1``; the
    nodes adjacent to it are the ones still in flight during the iteration,
    so take the next ones out: ``u[c_star + 2]`` and ``u[c_star - 1]``
    (clamped at the grid ends).
    """
    n_steps = u.steps
    u_plus = u.values[min(c_star + 2, n_steps - 1)]
    u_minus = u.values[max(c_star - 1, 0)]
    return JumpControls(u_plus=u_plus, u_minus=u_minus, located_index=c_star)


def integrate_backward(
    p: ProblemDefinition, traj: HybridTrajectory, u: ControlGrid, tau: float = 0.05
) -> CostateGrid:
    """Solve the costate recursion backward along a simulated trajectory.

    Terminal condition ``lam_N = phi_x^T(x_N)``; plain adjoint steps off the
    collision set; at a collision step the interval is split at the recorded
    sub-step, with the jump applied between the two partial steps.  Raises
    :class:`TransversalityLost` (tagged with the collision index) on grazing
    collisions.
    """
    n_steps = u.steps
    dt = u.dt
    if traj.steps != n_steps:
        raise ValueError("trajectory and control grid disagree on N")
    by_index = {rec.index: rec for rec in traj.collisions}

    values = np.empty((n_steps, p.state_dim))
    lam = np.asarray(p.terminal_cost_grad(traj.states[n_steps]), dtype=float)
    values[n_steps - 1] = lam
    records: list[CostateJumpRecord] = []

    for n in range(n_steps - 1, -1, -1):
        rec = by_index.get(n)
        if rec is None:
            if n == 0:
                break  # lambda_0 is never used
            lam = lam + dt * hamiltonian_grad_x(p, traj.states[n], lam, u.values[n])
        else:
            s_n = rec.substep
            c_star = locate_discontinuity(u, n, tau)
            jc = resolve_jump_controls(u, c_star)
            lam_plus = lam + (dt - s_n) * hamiltonian_grad_x(
                p, rec.post_state, lam, jc.u_plus
            )
            try:
                eta = solve_eta(
                    p, lam_plus, rec.pre_state, rec.post_state,
                    jc.u_minus, jc.u_plus, rec.manifold_id,
                )
            except TransversalityLost as err:
                raise TransversalityLost(err.denominator, collision_index=n) from err
            g_x = p.jump_jacobian(rec.pre_state, rec.manifold_id)
            psi_x = p.detection_gradient(rec.pre_state, rec.manifold_id)
            lam_minus = lam_plus @ g_x + eta * psi_x
            records.append(
                CostateJumpRecord(
                    collision_index=n,
                    lam_plus=lam_plus,
                    lam_minus=lam_minus,
                    eta=eta,
                    u_plus=np.array(jc.u_plus),
                    u_minus=np.array(jc.u_minus),
                    located_index=c_star,
                )
            )
            if n == 0:
                break  # jump recorded; lambda_0 itself is never used
            lam = lam_minus + s_n * hamiltonian_grad_x(p, traj.states[n], lam_minus, u.values[n])
        values[n - 1] = lam

    records.reverse()
    return CostateGrid(values, records)
