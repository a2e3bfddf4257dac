"""Relaxed successive-approximation iteration and its diagnostics.

Each iteration simulates the state forward, solves the costate backward,
replaces every control node by a convex combination of itself and the
pointwise Hamiltonian minimizer, and checks the discrete L2 norm of H_u.
A small relaxation weight keeps the update from overshooting the region
where the frozen state/costate pair is informative, at the price of a
linear (geometric) convergence rate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .backward import integrate_backward, locate_discontinuity, resolve_jump_controls
from .errors import NonFiniteError
from .forward import simulate
from .ocp import (
    Array,
    ControlGrid,
    CostateGrid,
    HybridTrajectory,
    ProblemDefinition,
    transversality,
)

log = logging.getLogger(__name__)

#: Convergence test selector: residual-based (default) or cost stagnation
#: for problems whose H_u is non-smooth at the minimizer.
HU_NORM = "hu_norm"
COST_STAGNATION = "cost_stagnation"


@dataclass
class SolverParams:
    """Iteration knobs.

    ``alpha`` is the relaxation weight in (0, 1] (1 = vanilla update);
    ``delta`` the tolerance on the discrete L2 norm of H_u; ``tau`` the
    half-width (as a fraction of N) of the window used to locate control
    discontinuities near collisions.  With ``convergence=COST_STAGNATION``
    the run stops when the cost varies less than ``stagnation_tol`` over
    the trailing ``stagnation_window`` iterations instead.
    """

    alpha: float = 0.01
    delta: float = 1e-3
    tau: float = 0.05
    max_iters: int = 50_000
    record_every: int = 1
    convergence: str = HU_NORM
    stagnation_window: int = 100
    stagnation_tol: float = 1e-9

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if not self.delta > 0.0:
            raise ValueError("delta must be positive")
        if self.convergence not in (HU_NORM, COST_STAGNATION):
            raise ValueError(f"unknown convergence mode {self.convergence!r}")


@dataclass
class StabilityRecord:
    """Per-collision stable-collision margin.

    ``v_minus`` is the pre-collision normal approach speed (negative when
    approaching), ``m_jump`` the largest control variation relative to the
    before-jump control, and ``margin = -v_minus - B_fu * m_jump``.  A
    positive margin certifies that small control perturbations cannot undo
    the collision.
    """

    collision_index: int
    manifold_id: int
    v_minus: float
    m_jump: float
    margin: float

    @property
    def stable(self) -> bool:
        return self.margin > 0.0


@dataclass
class SolveReport:
    """Everything a run produces: iterate series plus the final triple."""

    iters: list[int] = field(default_factory=list)
    cost_series: list[float] = field(default_factory=list)
    hu_series: list[float] = field(default_factory=list)
    err_series: list[float] = field(default_factory=list)
    control: Optional[ControlGrid] = None
    trajectory: Optional[HybridTrajectory] = None
    costate: Optional[CostateGrid] = None
    cost: float = math.nan
    hu_norm: float = math.nan
    iterations: int = 0
    converged: bool = False
    stability: list[StabilityRecord] = field(default_factory=list)


def control_update(
    p: ProblemDefinition,
    traj: HybridTrajectory,
    costate: CostateGrid,
    u: ControlGrid,
    alpha: float,
) -> ControlGrid:
    """Relaxed pointwise update toward the Hamiltonian minimizer.

    Node n is scored with state x_n and costate lambda_{n+1} (the pairing
    under which the discrete H_u is the exact gradient of the discrete
    cost on smooth instances).
    """
    new_values = np.empty_like(u.values)
    for n in range(u.steps):
        u_star = p.hamiltonian_minimizer(traj.states[n], costate.after(n))
        new_values[n] = (1.0 - alpha) * u.values[n] + alpha * u_star
    return ControlGrid(new_values, u.horizon)


def hu_norm(
    p: ProblemDefinition, traj: HybridTrajectory, costate: CostateGrid, u: ControlGrid
) -> float:
    """Discrete L2 norm sqrt(sum_n |H_u(x_n, lambda_{n+1}, u_n)|^2 dt)."""
    total = 0.0
    for n in range(u.steps):
        row = p.hamiltonian_grad_u(traj.states[n], costate.after(n), u.values[n])
        total += float(row @ row)
    return math.sqrt(total * u.dt)


def stability_margin(
    p: ProblemDefinition, traj: HybridTrajectory, u: ControlGrid, tau: float = 0.05
) -> list[StabilityRecord]:
    """Stable-collision margins for every collision of a trajectory.

    Requires ``p.lipschitz_f_u``.  The before-jump control is the resolved
    ``u_minus`` at the located discontinuity, and the variation magnitude is
    taken over all grid nodes.
    """
    if p.lipschitz_f_u is None:
        raise ValueError("stability_margin needs p.lipschitz_f_u")
    out = []
    for rec in traj.collisions:
        jc = resolve_jump_controls(u, locate_discontinuity(u, rec.index, tau))
        v_minus = transversality(p, rec.pre_state, jc.u_minus, rec.manifold_id)
        m_jump = float(np.max(np.linalg.norm(u.values - jc.u_minus, axis=1)))
        margin = -v_minus - p.lipschitz_f_u * m_jump
        out.append(
            StabilityRecord(
                collision_index=rec.index,
                manifold_id=rec.manifold_id,
                v_minus=v_minus,
                m_jump=m_jump,
                margin=margin,
            )
        )
    return out


def solve(
    p: ProblemDefinition,
    x0: Array,
    u0: ControlGrid,
    params: SolverParams,
    error_fn: Optional[Callable[[ControlGrid], float]] = None,
) -> SolveReport:
    """Run the relaxed iteration from ``u0`` until convergence or the cap.

    ``error_fn`` (optional) is evaluated on each recorded iterate and
    collected in ``err_series``; use it to track distance to a reference
    control.  Raises :class:`NonFiniteError` when the cost or the residual
    diverges, and propagates forward/backward errors with context.
    """
    report = SolveReport()
    u = u0.copy()
    history: list[float] = []  # trailing costs for the stagnation test
    last_coll: Optional[int] = None
    k = 0
    while True:
        traj, cost = simulate(p, u, x0)
        costate = integrate_backward(p, traj, u, params.tau)
        residual = hu_norm(p, traj, costate, u)
        if not math.isfinite(cost):
            raise NonFiniteError("cost", k)
        if not math.isfinite(residual):
            raise NonFiniteError("hu_norm", k)

        if k % params.record_every == 0:
            _record(report, k, cost, residual, u, error_fn)

        n_coll = len(traj.collisions)
        if last_coll is not None and last_coll != n_coll:
            log.info("collision count changed %d -> %d at iteration %d", last_coll, n_coll, k)
        last_coll = n_coll

        if params.convergence == HU_NORM:
            done = residual < params.delta
        else:
            history.append(cost)
            if len(history) > params.stagnation_window + 1:
                history.pop(0)
            done = (
                len(history) == params.stagnation_window + 1
                and max(history) - min(history) < params.stagnation_tol
            )

        if done or k >= params.max_iters:
            if not report.iters or report.iters[-1] != k:
                _record(report, k, cost, residual, u, error_fn)
            report.control = u
            report.trajectory = traj
            report.costate = costate
            report.cost = cost
            report.hu_norm = residual
            report.iterations = k
            report.converged = bool(done)
            if p.lipschitz_f_u is not None:
                report.stability = stability_margin(p, traj, u, params.tau)
            return report

        u = control_update(p, traj, costate, u, params.alpha)
        k += 1


def _record(report, k, cost, residual, u, error_fn):
    report.iters.append(k)
    report.cost_series.append(cost)
    report.hu_series.append(residual)
    if error_fn is not None:
        report.err_series.append(float(error_fn(u)))


def fit_geometric_ratio(iters, values) -> float:
    """Per-iteration geometric decay ratio of a positive series.

    Least-squares slope of log(values) against the iteration index,
    exponentiated.  Matches the usual "fit mu * sigma^k" convention.
    """
    iters = np.asarray(iters, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > 0.0
    if keep.sum() < 2:
        raise ValueError("need at least two positive samples to fit a ratio")
    slope = np.polyfit(iters[keep], np.log(values[keep]), 1)[0]
    return float(math.exp(slope))


def semimetric(
    u1: ControlGrid,
    u2: ControlGrid,
    breakpoint1: Optional[int] = None,
    breakpoint2: Optional[int] = None,
) -> float:
    """Breakpoint-aware distance between two one-discontinuity controls.

    Each grid is annotated with the index of its discontinuity (between
    nodes b and b+1); when omitted the steepest adjacent difference over
    the whole grid is used.  The distance is the max of the sup-norms over
    the common smooth pieces (nodes strictly left / right of both breaks)
    and the distance |beta_1 - beta_2| between the break times.
    """
    if u1.steps != u2.steps or u1.horizon != u2.horizon:
        raise ValueError("semimetric expects matching grids")
    n_steps, dt = u1.steps, u1.dt
    if breakpoint1 is None:
        breakpoint1 = locate_discontinuity(u1, 0, tau=1.0)
    if breakpoint2 is None:
        breakpoint2 = locate_discontinuity(u2, 0, tau=1.0)
    lo, hi = min(breakpoint1, breakpoint2), max(breakpoint1, breakpoint2)
    diff = np.linalg.norm(u1.values - u2.values, axis=1)
    left = float(diff[: lo + 1].max()) if lo >= 0 else 0.0
    right = float(diff[hi + 1 :].max()) if hi + 1 < n_steps else 0.0
    return max(left, right, abs(breakpoint1 - breakpoint2) * dt)
