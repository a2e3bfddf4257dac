"""Exception types shared across the solver stack."""

from __future__ import annotations


class SolverError(Exception):
    """Base class for all errors raised by this package."""


class IsolationViolation(SolverError):
    """Two collisions were predicted inside a single integration interval.

    The forward integrator inserts at most one collision sub-step per
    interval; hitting this usually means the time grid is too coarse for
    the collision spacing of the trajectory.  Increase N.
    """

    def __init__(self, step_index: int, message: str | None = None):
        self.step_index = step_index
        super().__init__(
            message
            or f"second collision predicted inside interval {step_index}; "
            "collisions are assumed isolated -- increase N"
        )


class TransversalityLost(SolverError):
    """The pre-collision flow is (numerically) tangent to the jump manifold.

    The costate jump multiplier divides by the normal approach speed; a
    vanishing denominator signals an ill-posed grazing collision.
    """

    def __init__(self, denominator: float, collision_index: int | None = None):
        self.denominator = denominator
        self.collision_index = collision_index
        where = "" if collision_index is None else f" at collision step {collision_index}"
        super().__init__(
            f"normal approach speed {denominator:.3e} below guard{where}; "
            "grazing collision makes the costate jump ill-posed"
        )


class NonFiniteError(SolverError):
    """Cost or convergence indicator became non-finite (divergence)."""

    def __init__(self, quantity: str, iteration: int):
        self.quantity = quantity
        self.iteration = iteration
        super().__init__(f"{quantity} became non-finite at iteration {iteration}")


class DegenerateWindow(SolverError):
    """Exclusion windows of the semi-norm cover the whole horizon."""


class DomainError(SolverError):
    """An argument fell outside the mathematically valid domain."""


class NoInteriorMinimum(SolverError):
    """No stationary minimum of the reduced cost inside the open horizon."""


class WallNotReached(SolverError):
    """The candidate optimum never drives the struck disc into the wall."""


class OracleUnavailable(SolverError):
    """No closed-form reference solution exists for the requested setup."""


class ConfigError(SolverError):
    """Invalid or incomplete run configuration."""


class BranchBoundaryWarning(UserWarning):
    """A control perturbation could toggle a collision on/off at this iterate.

    The discrete objective is only piecewise differentiable; the returned
    gradient is the one-sided gradient of the currently active branch.
    """
