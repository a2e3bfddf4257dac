"""Two-disc benchmark problems: frictionless 2-D discs, optional wall.

State layout (8-vector): ``x = [q1, q2, v1, v2]`` with 2-D position and
velocity per disc.  A force on disc 1 is the only control; disc 2 moves
freely and is the one the terminal cost cares about (squared distance to
the origin).  Collisions are perfectly inelastic-to-elastic impulses
parameterized by a restitution coefficient; walls are infinite-mass lines.

Manifold ids are stable: 0 = disc-disc, 1 = wall-disc 1, 2 = wall-disc 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateWindow
from .ocp import Array, ProblemDefinition

Q1, Q2, V1, V2 = slice(0, 2), slice(2, 4), slice(4, 6), slice(6, 8)

INTERDISC = 0
WALL_DISC1 = 1
WALL_DISC2 = 2

QUADRATIC = "quadratic"
L1 = "l1"

# Detection scale making |psi_x| = 1 on the disc-disc manifold.
_HALF_SQRT2 = math.sqrt(2.0) / 2.0


@dataclass(frozen=True)
class WallConfig:
    """A line at distance ``b`` from the origin with outward unit normal."""

    b: float
    normal: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("wall normal must be a unit vector")


@dataclass(frozen=True)
class DiscWorldConfig:
    """Masses, radii, restitution, cost weights and initial placement."""

    epsilon: float
    horizon: float = 1.0
    m1: float = 1.0
    m2: float = 1.0
    r1: float = 0.2
    r2: float = 0.2
    restitution: float = 1.0
    q1: tuple[float, float] = (0.0, 0.0)
    q2: tuple[float, float] = (1.0, 0.0)
    v1: tuple[float, float] = (0.0, 0.0)
    v2: tuple[float, float] = (0.0, 0.0)
    wall: Optional[WallConfig] = None
    cost: str = QUADRATIC
    u_max: Optional[float] = None

    def __post_init__(self):
        if min(self.m1, self.m2, self.r1, self.r2) <= 0.0:
            raise ValueError("masses and radii must be positive")
        if not 0.0 <= self.restitution <= 1.0:
            raise ValueError("restitution must lie in [0, 1]")
        if self.epsilon <= 0.0 or self.horizon <= 0.0:
            raise ValueError("epsilon and horizon must be positive")
        if self.cost not in (QUADRATIC, L1):
            raise ValueError(f"unknown cost kind {self.cost!r}")
        if self.cost == L1 and not (self.u_max and self.u_max > 0.0):
            raise ValueError("the bounded-force cost needs a positive u_max")
        gap = np.linalg.norm(np.subtract(self.q1, self.q2)) - self.r1 - self.r2
        if gap <= 0.0:
            raise ValueError("discs must start non-overlapping")
        if self.wall is not None:
            n = np.asarray(self.wall.normal)
            for q, r in ((self.q1, self.r1), (self.q2, self.r2)):
                if self.wall.b - float(np.dot(q, n)) - r <= 0.0:
                    raise ValueError("discs must start on the origin side of the wall")


def initial_state(cfg: DiscWorldConfig) -> Array:
    return np.concatenate([cfg.q1, cfg.q2, cfg.v1, cfg.v2]).astype(float)


def disc_dynamics(cfg: DiscWorldConfig, x: Array, u: Array) -> Array:
    """qdot_i = v_i; the force accelerates disc 1 only."""
    out = np.empty(8)
    out[0:4] = x[4:8]
    out[4:6] = u / cfg.m1
    out[6:8] = 0.0
    return out


def interdisc_jump(cfg: DiscWorldConfig, x: Array) -> Array:
    """Impulse exchange along the contact normal; positions unchanged.

    The elastic exchange is applied first and then pulled toward the
    center-of-mass velocity by ``restitution - 1`` along the normal, so
    restitution 1 is fully elastic and 0 leaves both discs moving with the
    center of mass (along the normal).
    """
    m1, m2, cr = cfg.m1, cfg.m2, cfg.restitution
    dq = x[Q1] - x[Q2]
    n = dq / np.linalg.norm(dq)
    v1, v2 = x[V1], x[V2]
    rel = float((v1 - v2) @ n)
    v1e = v1 - (2.0 * m2 * rel / (m1 + m2)) * n
    v2e = v2 + (2.0 * m1 * rel / (m1 + m2)) * n
    vcom_n = float(((m1 * v1 + m2 * v2) @ n) / (m1 + m2))
    out = x.copy()
    out[V1] = v1e + (cr - 1.0) * (float(v1e @ n) - vcom_n) * n
    out[V2] = v2e + (cr - 1.0) * (float(v2e @ n) - vcom_n) * n
    return out


def interdisc_detection(cfg: DiscWorldConfig, x: Array) -> float:
    """Scaled center gap while approaching, a positive constant otherwise."""
    dq = x[Q1] - x[Q2]
    if float(dq @ (x[V1] - x[V2])) < 0.0:
        return _HALF_SQRT2 * (float(np.linalg.norm(dq)) - cfg.r1 - cfg.r2)
    return _HALF_SQRT2


def wall_detection(cfg: DiscWorldConfig, x: Array, disc: int) -> float:
    """Gap between disc ``disc`` (1 or 2) and the wall while approaching."""
    wall = cfg.wall
    n = np.asarray(wall.normal)
    q = x[Q1] if disc == 1 else x[Q2]
    v = x[V1] if disc == 1 else x[V2]
    if float(v @ n) > 0.0:
        return wall.b - float(q @ n) - (cfg.r1 if disc == 1 else cfg.r2)
    return 1.0


def wall_jump(cfg: DiscWorldConfig, x: Array, disc: int) -> Array:
    """Mirror the velocity of disc ``disc`` across the wall plane."""
    n = np.asarray(cfg.wall.normal)
    out = x.copy()
    sl = V1 if disc == 1 else V2
    out[sl] = x[sl] - 2.0 * float(x[sl] @ n) * n
    return out


def _interdisc_jump_jacobian(cfg: DiscWorldConfig, x: Array) -> Array:
    """Exact Jacobian of :func:`interdisc_jump` at ``x``.

    Written via the equivalent impulse form v1' = v1 - k1 (w.n) n,
    v2' = v2 + k2 (w.n) n with k_i = (1+C_R) m_j / (m1+m2); the position
    dependence enters through the normal n(q1, q2).
    """
    m1, m2, cr = cfg.m1, cfg.m2, cfg.restitution
    dq = x[Q1] - x[Q2]
    dist = float(np.linalg.norm(dq))
    n = dq / dist
    w = x[V1] - x[V2]
    k1 = (1.0 + cr) * m2 / (m1 + m2)
    k2 = (1.0 + cr) * m1 / (m1 + m2)
    eye = np.eye(2)
    proj = np.outer(n, n)
    # d[(w.n) n]/dq1 = [n w^T + (w.n) I] (I - n n^T) / |dq|;  dq2 flips sign
    a_blk = (np.outer(n, w) + float(w @ n) * eye) @ (eye - proj) / dist

    jac = np.eye(8)
    jac[V1, Q1] = -k1 * a_blk
    jac[V1, Q2] = k1 * a_blk
    jac[V1, V1] = eye - k1 * proj
    jac[V1, V2] = k1 * proj
    jac[V2, Q1] = k2 * a_blk
    jac[V2, Q2] = -k2 * a_blk
    jac[V2, V1] = k2 * proj
    jac[V2, V2] = eye - k2 * proj
    return jac


def _wall_jump_jacobian(cfg: DiscWorldConfig, disc: int) -> Array:
    n = np.asarray(cfg.wall.normal)
    jac = np.eye(8)
    sl = V1 if disc == 1 else V2
    jac[sl, sl] = np.eye(2) - 2.0 * np.outer(n, n)
    return jac


def _predict_collision(cfg: DiscWorldConfig, x: Array, u: Array, dt: float):
    """Exact first root of each detection along the Euler ray; min over ids.

    Disc-disc gives a quadratic in the sub-step (positions move with frozen
    velocities), walls a linear equation.  Each candidate root is gated by
    the approaching branch of its detection evaluated at the extrapolated
    state (velocities there include the frozen control acceleration).
    """
    best_s, best_id = math.inf, None
    q1, q2, v1, v2 = x[Q1], x[Q2], x[V1], x[V2]
    acc = u / cfg.m1

    dq = q1 - q2
    w = v1 - v2
    a = float(w @ w)
    if a > 0.0:
        b = float(dq @ w)
        c = float(dq @ dq) - (cfg.r1 + cfg.r2) ** 2
        disc = b * b - a * c
        if disc > 0.0:  # tangential (disc <= 0) counts as no collision
            sq = math.sqrt(disc)
            for root in ((-b - sq) / a, (-b + sq) / a):
                if root > 0.0:
                    rel = (dq + root * w) @ (w + root * acc)
                    if float(rel) < 0.0 and root < best_s:
                        best_s, best_id = root, INTERDISC
                    break  # only the smallest positive root is physical

    if cfg.wall is not None:
        n = np.asarray(cfg.wall.normal)
        for disc_i, mid, q, v, dv in (
            (1, WALL_DISC1, q1, v1, acc),
            (2, WALL_DISC2, q2, v2, np.zeros(2)),
        ):
            vn = float(v @ n)
            if vn <= 0.0:
                continue
            gap = cfg.wall.b - float(q @ n) - (cfg.r1 if disc_i == 1 else cfg.r2)
            root = gap / vn
            if root > 0.0 and float((v + root * dv) @ n) > 0.0 and root < best_s:
                best_s, best_id = root, mid
    return best_s, best_id


def quadratic_minimizer(cfg: DiscWorldConfig, x: Array, lam: Array) -> Array:
    """argmin of lam_v1 . u / m1 + eps |u|^2 over the plane."""
    return -lam[V1] / (2.0 * cfg.epsilon * cfg.m1)


def l1_minimizer(cfg: DiscWorldConfig, x: Array, lam: Array) -> Array:
    """Bang-off minimizer of lam_v1 . u / m1 + eps |u| on the disc |u| <= u_max.

    Fires at full magnitude against lam_v1 whenever |lam_v1| >= m1 eps
    (active at the exact threshold), and is off otherwise.
    """
    lam_v1 = lam[V1]
    mag = float(np.linalg.norm(lam_v1))
    if mag >= cfg.m1 * cfg.epsilon and mag > 0.0:
        return -cfg.u_max * lam_v1 / mag
    return np.zeros(2)


def build_problem(cfg: DiscWorldConfig) -> ProblemDefinition:
    """Assemble the full problem for a world configuration.

    Without a wall there is a single colliding pair; with one there are
    three, indexed by the module-level manifold ids.  The per-step
    minimum-root selection in the forward integrator realizes the active
    pair; simultaneous hits surface as isolation errors there.
    """
    jump_maps = [lambda x: interdisc_jump(cfg, x)]
    detections = [lambda x: interdisc_detection(cfg, x)]
    if cfg.wall is not None:
        jump_maps += [
            lambda x: wall_jump(cfg, x, 1),
            lambda x: wall_jump(cfg, x, 2),
        ]
        detections += [
            lambda x: wall_detection(cfg, x, 1),
            lambda x: wall_detection(cfg, x, 2),
        ]

    f_x = np.zeros((8, 8))
    f_x[0:4, 4:8] = np.eye(4)
    zero_row = np.zeros(8)

    def detection_gradient(x: Array, mid: int) -> Array:
        grad = np.zeros(8)
        if mid == INTERDISC:
            dq = x[Q1] - x[Q2]
            n = dq / np.linalg.norm(dq)
            grad[Q1] = _HALF_SQRT2 * n
            grad[Q2] = -_HALF_SQRT2 * n
        else:
            n = np.asarray(cfg.wall.normal)
            grad[Q1 if mid == WALL_DISC1 else Q2] = -n
        return grad

    def jump_jacobian(x: Array, mid: int) -> Array:
        if mid == INTERDISC:
            return _interdisc_jump_jacobian(cfg, x)
        return _wall_jump_jacobian(cfg, 1 if mid == WALL_DISC1 else 2)

    def terminal_cost(x: Array) -> float:
        return float(x[Q2] @ x[Q2])

    def terminal_cost_grad(x: Array) -> Array:
        grad = np.zeros(8)
        grad[Q2] = 2.0 * x[Q2]
        return grad

    if cfg.cost == QUADRATIC:

        def running_cost(x: Array, u: Array) -> float:
            return cfg.epsilon * float(u @ u)

        def hamiltonian_grad_u(x: Array, lam: Array, u: Array) -> Array:
            return lam[V1] / cfg.m1 + 2.0 * cfg.epsilon * u

        minimizer = quadratic_minimizer
    else:

        def running_cost(x: Array, u: Array) -> float:
            return cfg.epsilon * float(np.linalg.norm(u))

        def hamiltonian_grad_u(x: Array, lam: Array, u: Array) -> Array:
            # subgradient selection 0 at u = 0; H_u is only a diagnostic here
            mag = float(np.linalg.norm(u))
            sub = u / mag if mag > 0.0 else np.zeros(2)
            return lam[V1] / cfg.m1 + cfg.epsilon * sub

        minimizer = l1_minimizer

    return ProblemDefinition(
        state_dim=8,
        control_dim=2,
        dynamics=lambda x, u: disc_dynamics(cfg, x, u),
        jump_maps=jump_maps,
        detections=detections,
        detection_gradient=detection_gradient,
        jump_jacobian=jump_jacobian,
        running_cost=running_cost,
        running_cost_grad_x=lambda x, u: zero_row,
        terminal_cost=terminal_cost,
        terminal_cost_grad=terminal_cost_grad,
        dynamics_jac_x=lambda x, u: f_x,
        hamiltonian_minimizer=lambda x, lam: minimizer(cfg, x, lam),
        hamiltonian_grad_u=hamiltonian_grad_u,
        lipschitz_f_u=1.0 / cfg.m1,
        collision_time=lambda x, u, dt: _predict_collision(cfg, x, u, dt),
    )


def seminorm(
    samples: Array, horizon: float, collision_times, omega: float
) -> float:
    """L2 semi-norm over [0, T] excluding omega-windows around collisions.

    ``samples`` holds left-endpoint values on a uniform grid (scalar series
    shaped (K,), vector series (K, d)); each sample represents its interval
    [t_k, t_{k+1}).  The squared values are integrated outside the union of
    ``[t_c - omega, t_c + omega]`` windows and normalized by the surviving
    measure, so constants are fixed points.  Vector series combine
    component-wise in root-sum-square fashion.
    """
    if omega <= 0.0:
        raise ValueError("omega must be positive")
    samples = np.asarray(samples, dtype=float)
    sq = samples**2 if samples.ndim == 1 else np.sum(samples**2, axis=1)
    n_samples = sq.shape[0]
    dt = horizon / n_samples
    t_lo = np.arange(n_samples) * dt
    t_hi = t_lo + dt

    covered = np.zeros(n_samples)
    for a, b in _merge_windows(collision_times, omega, horizon):
        covered += np.clip(np.minimum(t_hi, b) - np.maximum(t_lo, a), 0.0, None)
    weights = dt - covered
    total = float(weights.sum())
    if total <= 1e-12 * horizon:
        raise DegenerateWindow("exclusion windows cover the whole horizon")
    return math.sqrt(float(weights @ sq) / total)


def _merge_windows(collision_times, omega: float, horizon: float):
    spans = sorted(
        (max(0.0, t - omega), min(horizon, t + omega)) for t in collision_times
    )
    merged: list[list[float]] = []
    for a, b in spans:
        if b <= a:
            continue
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return merged
