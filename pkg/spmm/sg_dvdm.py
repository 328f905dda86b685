"""Conservative time stepping of the sine-Gordon equation theta_{tau s} = sin(theta).

Both schemes replace sin(theta) by the discrete variational derivative of
H_d = -sum cos(theta_k) ds between two time levels,

    a_k = -(cos z_k - cos t_k) / (z_k - t_k) = sin((z+t)/2) sinc((z-t)/2),

and differ only in the s-difference on the left:

    average     (shift(d, 1) - d) / (ds dtau) = (a_k + a_{k+1}) / 2
    central     (shift(d, 1) - shift(d, -1)) / (2 ds dtau) = a_k

with d = theta^{m+1} - theta^m. d is periodic because both levels carry the
same winding, so the residual needs no winding offsets. a is periodic too.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import NewtonDivergence, SingularJacobian
from .fields import ThetaField, shift
from .nonlinear_solver import CyclicBandedMatrix, SolverConfig, solve

log = logging.getLogger(__name__)

SCHEMES = ("average", "central")

# Below this |h| sinc'(h) uses its Taylor series.
_SERIES_CUTOFF = 1e-4

# Residual rounding level in units of eps * |theta| / (ds * dtau).
_FLOOR_FACTOR = 4.0


@dataclass(frozen=True)
class DvdSequence:
    values: np.ndarray
    levels: Tuple[int, int]


def hamiltonian_d(theta):
    """H_d = -sum_k cos(theta_k) ds."""
    return -float(np.sum(np.cos(theta.theta))) * theta.grid.delta_s


def _sinc(h):
    return np.sinc(np.asarray(h) / math.pi)


def _dsinc(h):
    h = np.asarray(h, dtype=float)
    small = np.abs(h) < _SERIES_CUTOFF
    safe = np.where(small, 1.0, h)
    exact = (safe * np.cos(safe) - np.sin(safe)) / safe**2
    return np.where(small, -h / 3.0 + h**3 / 30.0, exact)


def dvd_values(z, t):
    """a = sin((z+t)/2) sinc((z-t)/2), elementwise."""
    return np.sin(0.5 * (z + t)) * _sinc(0.5 * (z - t))


def dvd_derivative(z, t):
    """da/dz of dvd_values."""
    mid, half = 0.5 * (z + t), 0.5 * (z - t)
    return 0.5 * np.cos(mid) * _sinc(half) + 0.5 * np.sin(mid) * _dsinc(half)


def discrete_variational_derivative(theta_next, theta_curr):
    if theta_next.grid != theta_curr.grid or theta_next.winding != theta_curr.winding:
        raise ValueError("theta levels must share grid and winding")
    values = dvd_values(theta_next.theta, theta_curr.theta)
    return DvdSequence(values, (theta_curr.time_index, theta_next.time_index))


def _system(theta_curr, scheme, dtau):
    t = np.asarray(theta_curr.theta)
    ds = theta_curr.grid.delta_s
    coef = 1.0 / (ds * dtau)

    if scheme == "average":

        def residual(z):
            d = z - t
            a = dvd_values(z, t)
            return (shift(d, 1) - d) * coef - 0.5 * (a + shift(a, 1))

        def jacobian(z):
            da = dvd_derivative(z, t)
            return CyclicBandedMatrix({0: -coef - 0.5 * da, 1: coef - 0.5 * shift(da, 1)})

    elif scheme == "central":
        half = 0.5 * coef

        def residual(z):
            d = z - t
            return (shift(d, 1) - shift(d, -1)) * half - dvd_values(z, t)

        def jacobian(z):
            K = t.size
            return CyclicBandedMatrix(
                {-1: np.full(K, -half), 0: -dvd_derivative(z, t), 1: np.full(K, half)}
            )

    else:
        raise ValueError(f"Unknown scheme {scheme!r}; expected one of {SCHEMES}")
    return residual, jacobian


def solve_step(theta_curr, scheme="average", solver=None, guess=None, reverse=False, step=None):
    """One implicit step; returns (ThetaField, SolveResult).

    reverse=True steps with -dtau, i.e. solves the same system with the roles
    of the two levels swapped.
    """
    cfg = solver or SolverConfig()
    grid = theta_curr.grid
    dtau = -grid.delta_tau if reverse else grid.delta_tau
    residual, jacobian = _system(theta_curr, scheme, dtau)
    start = np.array(theta_curr.theta if guess is None else guess, dtype=float)
    scale = float(np.max(np.abs(theta_curr.theta))) + 1.0
    floor = _FLOOR_FACTOR * np.finfo(float).eps * scale / (grid.delta_s * grid.delta_tau)
    try:
        result = solve(residual, jacobian, start, cfg, floor=floor)
    except NewtonDivergence as exc:
        raise NewtonDivergence(exc.iterations, exc.residual, exc.history, step=step) from exc
    except SingularJacobian as exc:
        raise SingularJacobian(exc.condition, step=step) from exc
    index = theta_curr.time_index + (-1 if reverse else 1)
    return theta_curr.with_values(result.solution, index), result


def step_average_difference(theta_curr, solver=None, guess=None, reverse=False):
    return solve_step(theta_curr, "average", solver, guess, reverse)[0]


def step_central_difference(theta_curr, solver=None, guess=None, reverse=False):
    return solve_step(theta_curr, "central", solver, guess, reverse)[0]


class SineGordonStepper:
    """Sequential stepper that extrapolates the Newton guess from two levels.

    Not shared between threads: it holds the previous level.
    """

    def __init__(self, scheme="average", solver=None, reverse=False):
        if scheme not in SCHEMES:
            raise ValueError(f"Unknown scheme {scheme!r}; expected one of {SCHEMES}")
        self.scheme = scheme
        self.solver = solver or SolverConfig()
        self.reverse = reverse
        self._previous: Optional[ThetaField] = None
        self.last_result = None
        self.total_iterations = 0

    def advance(self, theta_curr):
        guess = None
        if self._previous is not None:
            guess = 2.0 * theta_curr.theta - self._previous.theta
        nxt, result = solve_step(
            theta_curr, self.scheme, self.solver, guess, self.reverse, step=theta_curr.time_index
        )
        self._previous = theta_curr
        self.last_result = result
        self.total_iterations += result.iterations
        log.debug(
            "step %d: %d Newton iterations, residual %.3e",
            theta_curr.time_index, result.iterations, result.residual,
        )
        return nxt
