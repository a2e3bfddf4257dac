"""Gradient-descent baseline on the fully discretized problem.

The gradient of the discrete objective is computed by an explicit reverse
pass through the integrator's branches, including the collision branch,
where the inserted sub-step length depends implicitly on state and control
through the contact condition ``psi(x_n + s f(x_n, u_n)) = 0``.  Products
with the control Jacobian of the dynamics are obtained exactly from the
supplied Hamiltonian gradient via ``v^T f_u = H_u(x, v, u) - H_u(x, 0, u)``,
so no extra problem data is needed.

At a branch boundary (a collision that an infinitesimal control change
could create or remove) the objective is not differentiable; a one-sided
gradient of the active branch is returned with a warning.
"""

from __future__ import annotations

import math
import warnings

import numpy as np

from .errors import BranchBoundaryWarning, NonFiniteError
from .forward import estimate_collision_time, simulate
from .ocp import Array, ControlGrid, HybridTrajectory, ProblemDefinition
from .solver import SolveReport, _record

#: Relative proximity of the predicted collision time to the interval
#: boundary below which the branch is considered ambiguous.
_BOUNDARY_BAND = 1e-9


def _vec_jac_u(p: ProblemDefinition, v: Array, x: Array, u: Array) -> Array:
    """Row vector v^T f_u(x, u), recovered from the Hamiltonian gradient."""
    zero = np.zeros(p.state_dim)
    return p.hamiltonian_grad_u(x, v, u) - p.hamiltonian_grad_u(x, zero, u)


def _running_grad_u(p: ProblemDefinition, x: Array, u: Array) -> Array:
    """L_u(x, u) = H_u at zero costate."""
    return p.hamiltonian_grad_u(x, np.zeros(p.state_dim), u)


def discrete_gradient(
    p: ProblemDefinition, u: ControlGrid, x0: Array
) -> np.ndarray:
    """Exact gradient of the discrete objective with respect to every u_n."""
    traj, _ = simulate(p, u, x0)
    return _gradient_along(p, u, x0, traj)


def _gradient_along(
    p: ProblemDefinition, u: ControlGrid, x0: Array, traj: HybridTrajectory
) -> np.ndarray:
    n_steps, dt = u.steps, u.dt
    by_index = {rec.index: rec for rec in traj.collisions}
    grads = np.zeros((n_steps, p.control_dim))
    adj = np.asarray(p.terminal_cost_grad(traj.states[n_steps]), dtype=float)

    for n in range(n_steps - 1, -1, -1):
        x_n = traj.states[n]
        u_n = u.values[n]
        rec = by_index.get(n)
        if rec is None:
            s_ahead, _ = estimate_collision_time(p, x_n, u_n, dt)
            if math.isfinite(s_ahead) and abs(s_ahead - dt) < _BOUNDARY_BAND * dt:
                warnings.warn(
                    f"collision boundary grazed at step {n}; one-sided gradient",
                    BranchBoundaryWarning,
                )
            grads[n] += dt * (_vec_jac_u(p, adj, x_n, u_n) + _running_grad_u(p, x_n, u_n))
            adj = adj + dt * (adj @ p.dynamics_jac_x(x_n, u_n)) + dt * p.running_cost_grad_x(x_n, u_n)
            continue

        s = rec.substep
        if abs(dt - s) < _BOUNDARY_BAND * dt or s < _BOUNDARY_BAND * dt:
            warnings.warn(
                f"collision at step {n} sits on a branch boundary; one-sided gradient",
                BranchBoundaryWarning,
            )
        u_next = u.values[min(n + 1, n_steps - 1)]
        x_minus, x_plus = rec.pre_state, rec.post_state
        f_n = p.dynamics(x_n, u_n)
        fx_n = p.dynamics_jac_x(x_n, u_n)
        fx_plus = p.dynamics_jac_x(x_plus, u_next)
        g_x = p.jump_jacobian(x_minus, rec.manifold_id)
        psi_x = p.detection_gradient(x_minus, rec.manifold_id)

        # implicit sensitivities of the sub-step length
        denom = float(psi_x @ f_n)
        s_x = -(psi_x + s * (psi_x @ fx_n)) / denom
        s_u = -s * _vec_jac_u(p, psi_x, x_n, u_n) / denom

        # residual-interval contributions of u_{n+1} (dynamics and cost piece)
        grads[min(n + 1, n_steps - 1)] += (dt - s) * (
            _vec_jac_u(p, adj, x_plus, u_next) + _running_grad_u(p, x_plus, u_next)
        )

        # adjoint at x_plus: dynamics chain plus the residual cost piece
        adj_post = adj + (dt - s) * (adj @ fx_plus) + (dt - s) * p.running_cost_grad_x(
            x_plus, u_next
        )
        through_jump = adj_post @ g_x  # adjoint at x_minus
        # moving the split point trades cost pieces and shifts the restart state
        ds_coeff = (
            float(through_jump @ f_n)
            - float(adj @ p.dynamics(x_plus, u_next))
            + p.running_cost(x_n, u_n)
            - p.running_cost(x_plus, u_next)
        )

        grads[n] += (
            s * (_vec_jac_u(p, through_jump, x_n, u_n) + _running_grad_u(p, x_n, u_n))
            + ds_coeff * s_u
        )
        adj = (
            through_jump
            + s * (through_jump @ fx_n)
            + s * p.running_cost_grad_x(x_n, u_n)
            + ds_coeff * s_x
        )
    return grads


def gd_solve(
    p: ProblemDefinition,
    x0: Array,
    u0: ControlGrid,
    iters: int,
    alpha: float,
    epsilon: float,
    error_fn=None,
    record_every: int = 1,
) -> SolveReport:
    """Plain gradient descent with the rate matched to the relaxed sweep.

    The step size ``alpha N / (2 epsilon)`` makes one descent step coincide
    with one relaxed sweep iteration for the quadratic-effort cost (up to
    collision-step corrections), so learning curves are directly
    comparable.  Runs a fixed budget of ``iters`` updates.
    """
    report = SolveReport()
    u = u0.copy()
    lr = alpha * u.steps / (2.0 * epsilon)
    k = 0
    while True:
        traj, cost = simulate(p, u, x0)
        if not math.isfinite(cost):
            raise NonFiniteError("cost", k)
        grad = _gradient_along(p, u, x0, traj)
        grad_norm = math.sqrt(float(np.sum(grad**2)) / u.dt)  # L2 norm of grad/dt
        if k % record_every == 0:
            _record(report, k, cost, grad_norm, u, error_fn)
        if k >= iters:
            if report.iters[-1] != k:
                _record(report, k, cost, grad_norm, u, error_fn)
            report.control = u
            report.trajectory = traj
            report.cost = cost
            report.hu_norm = grad_norm
            report.iterations = k
            report.converged = False  # fixed budget, no convergence test
            return report
        u = ControlGrid(u.values - lr * grad, u.horizon)
        k += 1
