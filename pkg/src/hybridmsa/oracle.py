"""Machine-accuracy reference solutions for the quadratic-cost experiments.

The optimal play has one shape: accelerate disc 1 so it strikes disc 2 at
time s with velocity v', the contact normal being n; afterwards the control
is identically zero.  For a quadratic effort cost, the cheapest control
realizing given (s, v', displacement d) is affine in time,

    u(t) = 6 d / s^2 - 2 v' / s + (6 v' / s^2 - 12 d / s^3) t,

and substituting it back reduces the whole problem to a smooth cost in
(s, v', n).  v' can be eliminated in closed form (the reduced cost is a
strictly convex quadratic in v'), leaving a rational function of s for the
symmetric placement -- minimized by isolating the real roots of its
derivative numerator -- or a smooth function of (s, theta) in general --
minimized by a dense grid scan plus Newton refinement on the exact gradient.

A wall behind the target is folded away by reflecting the target across the
wall plane shifted inward by the disc radius: the after-bounce path of the
struck disc is the mirror image of the straight path.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial import Polynomial

from .discs import DiscWorldConfig, QUADRATIC
from .errors import DomainError, NoInteriorMinimum, OracleUnavailable, WallNotReached

_GRID = 1000
_NEWTON_TOL = 1e-12
_ROOT_POLISH_TOL = 1e-13


@dataclass
class OracleSolution:
    """Closed-form optimum of one experiment.

    ``collision_time`` is the disc-disc impact time s*, ``normal`` the
    contact normal pointing from disc 1 to disc 2, ``v_prime`` the
    pre-impact velocity of disc 1 and ``v_post`` the post-impact velocity
    of disc 2.  The optimal control is ``a0 + a1 t`` on [0, s*) and zero
    afterwards.  ``wall_time`` is the later wall impact when a wall is
    part of the problem.
    """

    kind: str
    collision_time: float
    theta: float
    normal: np.ndarray
    v_prime: np.ndarray
    v_post: np.ndarray
    a0: np.ndarray
    a1: np.ndarray
    cost: float
    wall_time: Optional[float] = None

    def control_at(self, t) -> np.ndarray:
        """Optimal control sampled at times ``t`` (zero from s* on)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        u = self.a0[None, :] + np.outer(t, self.a1)
        u[t >= self.collision_time] = 0.0
        return u

    def collision_times(self) -> list[float]:
        times = [self.collision_time]
        if self.wall_time is not None:
            times.append(self.wall_time)
        return times


def pre_collision_control(s: float, v_prime, d) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of the cheapest affine control meeting the impact.

    Minimizes the integrated squared force subject to the velocity gained
    being v' and the displacement accumulated being d over [0, s].
    """
    if s <= 0.0:
        raise DomainError("collision time must be positive")
    v_prime = np.asarray(v_prime, dtype=float)
    d = np.asarray(d, dtype=float)
    a0 = 6.0 * d / s**2 - 2.0 * v_prime / s
    a1 = 6.0 * v_prime / s**2 - 12.0 * d / s**3
    return a0, a1


def _target(cfg: DiscWorldConfig) -> np.ndarray:
    if cfg.wall is None:
        return np.zeros(2)
    n = np.asarray(cfg.wall.normal)
    return 2.0 * (cfg.wall.b - cfg.r2) * n


def reduced_objective(
    cfg: DiscWorldConfig, s: float, v_prime, normal, target=None
) -> float:
    """Total cost of the candidate (s, v', n): terminal plus control effort.

    The terminal term measures the struck disc's straight-line miss of the
    target (the mirrored target when a wall is configured); the effort term
    is the optimal-control value of the two-moment problem.
    """
    if not 0.0 < s < cfg.horizon:
        raise DomainError("candidate collision time must lie in (0, T)")
    v_prime = np.asarray(v_prime, dtype=float)
    n = np.asarray(normal, dtype=float)
    target = _target(cfg) if target is None else np.asarray(target, dtype=float)
    q1, q2 = np.asarray(cfg.q1), np.asarray(cfg.q2)
    d = q2 - q1 - (cfg.r1 + cfg.r2) * n
    z = q2 - target
    v_post = float(v_prime @ n) * n
    terminal = float(np.sum((z + (cfg.horizon - s) * v_post) ** 2))
    effort = cfg.epsilon * (
        12.0 * float(d @ d) / s**3
        + 4.0 * float(v_prime @ v_prime) / s
        - 12.0 * float(v_prime @ d) / s**2
    )
    return terminal + effort


def _require_closed_form(cfg: DiscWorldConfig) -> None:
    if cfg.cost != QUADRATIC:
        raise OracleUnavailable("closed-form solutions exist only for the quadratic cost")
    if cfg.m1 != cfg.m2 or cfg.restitution != 1.0:
        raise OracleUnavailable("closed form assumes equal masses and elastic impact")
    if np.any(np.asarray(cfg.v1) != 0.0) or np.any(np.asarray(cfg.v2) != 0.0):
        raise OracleUnavailable("closed form assumes both discs start at rest")


def solve_concentric(cfg: DiscWorldConfig, target=None) -> OracleSolution:
    """Symmetric placement: the normal is fixed by symmetry and the cost
    becomes a rational function of the impact time alone.

    Requires disc 2 and the target to be aligned with the disc 1 - disc 2
    axis; the 1-D minimizer is found by isolating the real roots of the
    derivative's numerator polynomial and polishing them with Newton.
    """
    _require_closed_form(cfg)
    horizon = cfg.horizon
    eps = cfg.epsilon
    q1, q2 = np.asarray(cfg.q1, dtype=float), np.asarray(cfg.q2, dtype=float)
    if target is None:
        target = _target(cfg)
    target = np.asarray(target, dtype=float)

    w = q2 - q1
    n = w / np.linalg.norm(w)
    z = q2 - target
    zeta_perp = float(z @ np.array([-n[1], n[0]]))
    if abs(zeta_perp) > 1e-10 * max(1.0, float(np.linalg.norm(z))):
        raise OracleUnavailable("placement is not concentric with the target")

    dist = float(np.linalg.norm(w)) - cfg.r1 - cfg.r2  # d = dist * n
    zeta = float(z @ n)

    s_poly = Polynomial([0.0, 1.0])
    rem = Polynomial([horizon, -1.0])  # T - s
    vn_num = -zeta * s_poly**2 * rem + 6.0 * eps * dist
    denom = s_poly**2 * rem**2 + 4.0 * eps * s_poly
    total_num = (zeta * denom + rem * vn_num) ** 2 * s_poly**3 + eps * (
        12.0 * dist**2 * denom**2
        + 4.0 * vn_num**2 * s_poly**2
        - 12.0 * dist * vn_num * denom * s_poly
    )
    total_den = denom**2 * s_poly**3

    deriv_num = total_num.deriv() * total_den - total_num * total_den.deriv()
    candidates = _interior_real_roots(deriv_num, horizon)
    if not candidates:
        raise NoInteriorMinimum("no stationary point of the reduced cost in (0, T)")

    def cost_at(s: float) -> float:
        return total_num(s) / total_den(s)

    best_s = min(candidates, key=cost_at)
    # keep only genuine local minima (derivative sign change - to +)
    h = 1e-7 * horizon
    if not (cost_at(min(best_s + h, horizon * (1 - 1e-12))) >= cost_at(best_s)
            and cost_at(max(best_s - h, horizon * 1e-12)) >= cost_at(best_s)):
        raise NoInteriorMinimum("stationary points in (0, T) are not minima")

    v_n = vn_num(best_s) / denom(best_s)
    v_prime = v_n * n
    a0, a1 = pre_collision_control(best_s, v_prime, dist * n)
    return OracleSolution(
        kind="concentric",
        collision_time=float(best_s),
        theta=float(math.atan2(n[1], n[0])),
        normal=n,
        v_prime=v_prime,
        v_post=v_n * n,
        a0=a0,
        a1=a1,
        cost=float(cost_at(best_s)),
    )


def _interior_real_roots(poly: Polynomial, horizon: float) -> list[float]:
    roots = poly.roots()
    out = []
    for r in roots:
        if abs(r.imag) > 1e-8 * max(1.0, abs(r.real)):
            continue
        s = float(r.real)
        if not 1e-9 * horizon < s < horizon * (1.0 - 1e-12):
            continue
        s = _newton_polish(poly, s, horizon)
        out.append(s)
    return sorted(set(round(s, 15) for s in out))


def _newton_polish(poly: Polynomial, s: float, horizon: float) -> float:
    dpoly = poly.deriv()
    for _ in range(100):
        val, dval = poly(s), dpoly(s)
        if dval == 0.0:
            break
        step = val / dval
        s_new = min(max(s - step, 1e-12 * horizon), horizon * (1.0 - 1e-12))
        if abs(s_new - s) < _ROOT_POLISH_TOL * max(1.0, abs(s)):
            return s_new
        s = s_new
    return s


class _PlanarReduction:
    """Reduced cost F(s, theta) after eliminating v' in closed form."""

    def __init__(self, cfg: DiscWorldConfig, target: np.ndarray):
        self.cfg = cfg
        self.T = cfg.horizon
        self.eps = cfg.epsilon
        self.w = np.asarray(cfg.q2, dtype=float) - np.asarray(cfg.q1, dtype=float)
        self.radius_sum = cfg.r1 + cfg.r2
        self.z = np.asarray(cfg.q2, dtype=float) - target

    def _scalars(self, s, theta):
        cos, sin = np.cos(theta), np.sin(theta)
        wx, wy = self.w
        zx, zy = self.z
        p = wx * cos + wy * sin - self.radius_sum  # d . n
        q_perp = -wx * sin + wy * cos  # d . n_perp (radius drops out)
        zeta = zx * cos + zy * sin
        zeta_perp = -zx * sin + zy * cos
        rem = self.T - s
        v_n = (-zeta * s**2 * rem + 6.0 * self.eps * p) / (s**2 * rem**2 + 4.0 * self.eps * s)
        v_perp = 1.5 * q_perp / s
        return p, q_perp, zeta, zeta_perp, rem, v_n, v_perp

    def value(self, s, theta):
        p, q_perp, zeta, zeta_perp, rem, v_n, v_perp = self._scalars(s, theta)
        return (
            (zeta + rem * v_n) ** 2
            + zeta_perp**2
            + self.eps
            * (
                12.0 * (p**2 + q_perp**2) / s**3
                + 4.0 * (v_n**2 + v_perp**2) / s
                - 12.0 * (v_n * p + v_perp * q_perp) / s**2
            )
        )

    def gradient(self, s, theta):
        """Exact gradient via the envelope theorem (v' is a strict inner min)."""
        p, q_perp, zeta, zeta_perp, rem, v_n, v_perp = self._scalars(s, theta)
        g_s = -2.0 * v_n * (zeta + rem * v_n) + self.eps * (
            -36.0 * (p**2 + q_perp**2) / s**4
            - 4.0 * (v_n**2 + v_perp**2) / s**2
            + 24.0 * (v_n * p + v_perp * q_perp) / s**3
        )
        g_t = (
            2.0 * rem * v_n * zeta_perp
            + self.eps
            * (
                -24.0 * self.radius_sum * q_perp / s**3
                - 12.0 * (v_n * q_perp - v_perp * (p + self.radius_sum)) / s**2
            )
        )
        return np.array([g_s, g_t])

    def v_prime(self, s, theta):
        _, q_perp, _, _, _, v_n, v_perp = self._scalars(s, theta)
        n = np.array([np.cos(theta), np.sin(theta)])
        n_perp = np.array([-n[1], n[0]])
        return v_n * n + v_perp * n_perp, v_n, n

    def v_normal(self, s, theta):
        return self._scalars(s, theta)[5]


def _solve_planar(cfg: DiscWorldConfig, kind: str, target: np.ndarray) -> OracleSolution:
    _require_closed_form(cfg)
    red = _PlanarReduction(cfg, target)
    horizon = cfg.horizon

    s_axis = (np.arange(_GRID) + 0.5) * (horizon / _GRID)
    t_axis = np.arange(_GRID) * (2.0 * math.pi / _GRID)
    ss, tt = np.meshgrid(s_axis, t_axis, indexing="ij")
    values = red.value(ss, tt)
    # impacts only push: disc 1 must approach along the normal, so candidates
    # whose eliminated normal velocity points the wrong way are infeasible
    values = np.where(red.v_normal(ss, tt) > 0.0, values, np.inf)
    if not np.any(np.isfinite(values)):
        raise NoInteriorMinimum("no candidate with an approaching impact")
    i, j = np.unravel_index(np.argmin(values), values.shape)
    point = np.array([s_axis[i], t_axis[j]])

    grad = red.gradient(*point)
    for _ in range(200):
        norm = float(np.linalg.norm(grad))
        if norm <= _NEWTON_TOL:
            break
        hess = _fd_hessian(red, point, horizon)
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            step = -grad
        scale = 1.0
        for _ in range(40):
            trial = point + scale * step
            trial[0] = min(max(trial[0], 1e-9 * horizon), horizon * (1.0 - 1e-9))
            trial_grad = red.gradient(*trial)
            if float(np.linalg.norm(trial_grad)) < norm:
                point, grad = trial, trial_grad
                break
            scale *= 0.5
        else:
            break

    s_star, theta_star = float(point[0]), float(point[1] % (2.0 * math.pi))
    if not 1e-8 * horizon < s_star < horizon * (1.0 - 1e-8):
        raise NoInteriorMinimum("reduced-cost minimum escaped the open horizon")
    if red.v_normal(s_star, theta_star) <= 0.0:
        raise NoInteriorMinimum("refinement left the approaching-impact branch")

    v_prime, v_n, n = red.v_prime(s_star, theta_star)
    d = red.w - red.radius_sum * n
    a0, a1 = pre_collision_control(s_star, v_prime, d)
    return OracleSolution(
        kind=kind,
        collision_time=s_star,
        theta=theta_star,
        normal=n,
        v_prime=v_prime,
        v_post=v_n * n,
        a0=a0,
        a1=a1,
        cost=float(red.value(s_star, theta_star)),
    )


def _fd_hessian(red: _PlanarReduction, point: np.ndarray, horizon: float) -> np.ndarray:
    hess = np.empty((2, 2))
    steps = (1e-7 * horizon, 1e-7)
    for k in range(2):
        offset = np.zeros(2)
        offset[k] = steps[k]
        hess[:, k] = (red.gradient(*(point + offset)) - red.gradient(*(point - offset))) / (
            2.0 * steps[k]
        )
    return 0.5 * (hess + hess.T)


def solve_general(cfg: DiscWorldConfig, target=None) -> OracleSolution:
    """Oblique placement: scan the (impact time, normal angle) plane densely,
    then Newton-refine on the exact reduced gradient."""
    if cfg.wall is not None:
        raise OracleUnavailable("use solve_wall for configurations with a wall")
    target = np.zeros(2) if target is None else np.asarray(target, dtype=float)
    return _solve_planar(cfg, "general", target)


def solve_wall(cfg: DiscWorldConfig) -> OracleSolution:
    """Wall variant: compare bouncing off the wall against ignoring it.

    The bounce candidate aims the struck disc at the target mirrored across
    the wall plane (shifted inward by the disc radius) and is valid when the
    implied wall impact falls inside (s*, T); the no-bounce candidate aims
    at the target directly and is valid when the straight path never reaches
    the wall before T.  Returns the cheaper valid candidate; raises
    :class:`WallNotReached` when the optimum cannot involve the wall and the
    direct path is infeasible.
    """
    if cfg.wall is None:
        raise OracleUnavailable("solve_wall needs a wall in the configuration")
    wall_n = np.asarray(cfg.wall.normal)
    gap = cfg.wall.b - cfg.r2 - float(np.asarray(cfg.q2) @ wall_n)

    candidates = []
    try:
        bounce = _solve_planar(cfg, "wall", _target(cfg))
        approach = float(bounce.v_post @ wall_n)
        if approach > 0.0:
            bounce.wall_time = bounce.collision_time + gap / approach
            if bounce.wall_time < cfg.horizon:
                candidates.append(bounce)
    except NoInteriorMinimum:
        pass

    try:
        direct = _solve_planar(cfg, "wall", np.zeros(2))
        approach = float(direct.v_post @ wall_n)
        crosses = (
            approach > 0.0 and direct.collision_time + gap / approach < cfg.horizon
        )
        if not crosses:
            candidates.append(direct)
    except NoInteriorMinimum:
        pass

    if not candidates:
        raise WallNotReached(
            "neither the bounce nor the direct candidate is feasible for this layout"
        )
    return min(candidates, key=lambda sol: sol.cost)


def solve_experiment(cfg: DiscWorldConfig, kind: str) -> OracleSolution:
    """Dispatch on the experiment kind; raises for setups with no oracle."""
    if kind == "concentric":
        return solve_concentric(cfg)
    if kind == "general":
        return solve_general(cfg)
    if kind == "wall":
        return solve_wall(cfg)
    raise OracleUnavailable(f"no reference solution for kind {kind!r}")


GOLDEN_FIELDS = ("experiment", "s_star", "theta_star", "J_star", "vpx", "vpy")


def write_goldens(path, solutions: dict[str, OracleSolution]) -> None:
    """Persist reference values as CSV (one row per experiment)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GOLDEN_FIELDS)
        for name in sorted(solutions):
            sol = solutions[name]
            writer.writerow(
                [name]
                + [
                    f"{v:.17g}"
                    for v in (sol.collision_time, sol.theta, sol.cost, *sol.v_prime)
                ]
            )


def read_goldens(path) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            name = row.pop("experiment")
            out[name] = {k: float(v) for k, v in row.items()}
    return out
