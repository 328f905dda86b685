"""Fixed uniform-mesh comparison schemes for the short pulse equation.

Both schemes advance u on N periodic points with spacing dx. With
a = (u' + u) / 2 the midpoint value and e = u' - u the increment:

norm-preserving (local stencil form)
    (e_{k+1} - e_k) / (dx dt) = (a_k + a_{k+1}) / 2 + (P_{k+1} - P_k) / dx
    P_k = c_k q_k,  c_k = (a_{k+1} - a_{k-1}) / (2 dx),
    q_k = (a_{k+1} a_k + a_k a_{k-1}) / 4

multi-symplectic (box scheme)
    (e_{k+1} - e_{k-1}) / (2 dx dt) = (a_{k+1} + 2 a_k + a_{k-1}) / 4
                                      + (b_{k+1} - 2 b_k + b_{k-1}) / (6 dx^2),  b = a^3

Summing the norm-preserving equations over k telescopes everything except the
average term, so sum(u') = -sum(u) at a converged step and zero-mean data
stays zero-mean.
"""

import logging

import numpy as np

from .errors import NewtonDivergence, NonZeroMean, SingularJacobian
from .fields import UniformField, shift
from .nonlinear_solver import CyclicBandedMatrix, SolverConfig, solve

log = logging.getLogger(__name__)

SCHEMES = ("norm_preserving", "multisymplectic")

_MEAN_REL = 1e-10

# Residual rounding level, as in sg_dvdm.
_FLOOR_FACTOR = 4.0


def _check_zero_mean(v):
    total = float(np.sum(v))
    bound = _MEAN_REL * v.size * float(np.max(np.abs(v))) if v.size else 0.0
    if abs(total) > bound:
        raise NonZeroMean(total, bound)


def discrete_antiderivative(v, delta_x, check=True):
    """Trapezoidal periodic antiderivative of a zero-mean sequence, mean removed.

    Satisfies (out_{k+1} - out_k) / dx = (v_k + v_{k+1}) / 2 exactly.
    """
    v = np.asarray(v, dtype=float)
    if check:
        _check_zero_mean(v)
    tilde = delta_x * (0.5 * v[-1] + np.cumsum(v) - 0.5 * v)
    return tilde - np.mean(tilde)


def norm_d(field):
    """I_d = 1/2 sum u_k^2 dx."""
    return 0.5 * float(np.sum(field.u**2)) * field.delta_x


def energy_d(field):
    """E_d = sum (u^4 / 24 - (antiderivative u)^2 / 2) dx."""
    w = discrete_antiderivative(field.u, field.delta_x)
    return float(np.sum(field.u**4 / 24.0 - 0.5 * w**2)) * field.delta_x


def _norm_preserving_system(u, dx, dt):
    coef = 1.0 / (dx * dt)
    inv2dx = 0.5 / dx

    def parts(z):
        a = 0.5 * (z + u)
        ap, am = shift(a, 1), shift(a, -1)
        c = (ap - am) * inv2dx
        q = 0.25 * a * (ap + am)
        return a, ap, am, c, q

    def residual(z):
        a, ap, _, c, q = parts(z)
        e = z - u
        P = c * q
        return (shift(e, 1) - e) * coef - 0.5 * (a + ap) - (shift(P, 1) - P) / dx

    def jacobian(z):
        a, ap, am, c, q = parts(z)
        # partial derivatives of P_k with respect to a_{k-1}, a_k, a_{k+1}
        dPm = -q * inv2dx + 0.25 * c * a
        dP0 = 0.25 * c * (ap + am)
        dPp = q * inv2dx + 0.25 * c * a
        return CyclicBandedMatrix(
            {
                -1: dPm * inv2dx,
                0: -coef - 0.25 - (shift(dPm, 1) - dP0) * inv2dx,
                1: coef - 0.25 - (shift(dP0, 1) - dPp) * inv2dx,
                2: -shift(dPp, 1) * inv2dx,
            }
        )

    return residual, jacobian


def _multisymplectic_system(u, dx, dt):
    half = 0.5 / (dx * dt)
    inv6dx2 = 1.0 / (6.0 * dx * dx)

    def residual(z):
        e = z - u
        a = 0.5 * (z + u)
        b = a**3
        return (
            (shift(e, 1) - shift(e, -1)) * half
            - 0.25 * (shift(a, 1) + 2.0 * a + shift(a, -1))
            - (shift(b, 1) - 2.0 * b + shift(b, -1)) * inv6dx2
        )

    def jacobian(z):
        a2 = (0.5 * (z + u)) ** 2
        scale = 0.25 / (dx * dx)
        return CyclicBandedMatrix(
            {
                -1: -half - 0.125 - shift(a2, -1) * scale,
                0: -0.25 + 2.0 * a2 * scale,
                1: half - 0.125 - shift(a2, 1) * scale,
            }
        )

    return residual, jacobian


_SYSTEMS = {
    "norm_preserving": _norm_preserving_system,
    "multisymplectic": _multisymplectic_system,
}


def solve_step(u_curr, delta_t, scheme, solver=None, guess=None, step=None):
    """One implicit fixed-mesh step; returns (UniformField, SolveResult)."""
    if scheme not in _SYSTEMS:
        raise ValueError(f"Unknown scheme {scheme!r}; expected one of {SCHEMES}")
    cfg = solver or SolverConfig()
    u = np.asarray(u_curr.u)
    dx = u_curr.delta_x
    residual, jacobian = _SYSTEMS[scheme](u, dx, delta_t)
    start = np.array(u if guess is None else guess, dtype=float)
    scale = float(np.max(np.abs(u))) + 1.0
    floor = _FLOOR_FACTOR * np.finfo(float).eps * (scale / (dx * delta_t) + scale**3 / dx**2)
    try:
        result = solve(residual, jacobian, start, cfg, floor=floor)
    except NewtonDivergence as exc:
        raise NewtonDivergence(exc.iterations, exc.residual, exc.history, step=step) from exc
    except SingularJacobian as exc:
        raise SingularJacobian(exc.condition, step=step) from exc
    return u_curr.with_values(result.solution, u_curr.time_index + 1), result


def step_norm_preserving(u_curr, delta_t, solver=None, guess=None):
    return solve_step(u_curr, delta_t, "norm_preserving", solver, guess)[0]


def step_multisymplectic(u_curr, delta_t, solver=None, guess=None):
    return solve_step(u_curr, delta_t, "multisymplectic", solver, guess)[0]


class FixedMeshStepper:
    """Sequential fixed-mesh stepper with an extrapolated Newton guess."""

    def __init__(self, scheme, delta_t, solver=None):
        if scheme not in _SYSTEMS:
            raise ValueError(f"Unknown scheme {scheme!r}; expected one of {SCHEMES}")
        self.scheme = scheme
        self.delta_t = delta_t
        self.solver = solver or SolverConfig()
        self._previous = None
        self.last_result = None

    def advance(self, u_curr):
        guess = None
        if self._previous is not None:
            guess = 2.0 * u_curr.u - self._previous.u
        nxt, result = solve_step(
            u_curr, self.delta_t, self.scheme, self.solver, guess, step=u_curr.time_index
        )
        self._previous = u_curr
        self.last_result = result
        log.debug(
            "step %d: %d Newton iterations, residual %.3e",
            u_curr.time_index, result.iterations, result.residual,
        )
        return nxt
