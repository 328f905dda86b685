"""Initial data: theta fields from sampled or analytic curves.

Three entry points produce the level-0 data of a run:

- a parametrized exact curve (InitialCurve), converted with theta_from_analytic;
- a sampled curve (s, x, u) or (x, u) read from CSV, converted with
  theta_from_samples;
- a single-valued periodic profile u0(x), first equidistributed in arc length
  (equidistribute) and then converted like sampled data.

Angles are two-argument angles lifted by nearest-branch continuation; plain
arctan(du/dx) loses the quadrant as soon as dx changes sign on a loop.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.optimize import root_scalar

from .errors import (
    AmbiguousBranch,
    CoincidentPoints,
    ConfigError,
    NonClosingCurve,
    QuadratureError,
)
from .exact import unwrap_angle
from .fields import TWO_PI, GridSpec, ThetaField, UniformField

log = logging.getLogger(__name__)

DEFAULT_WINDING_TOL = 1e-6
DEFAULT_BRANCH_TOL = 1e-3

# Central-difference step for samplers without an exact tangent.
_FD_STEP = 1e-6

# Unit-speed spot check of analytic initial curves
_SPEED_TOL = 1e-6
_SPEED_SPOTS = 16

# Sampled curves: every chord within this fraction of delta_s
CHORD_TOL = 0.05

# Arc-length quadrature
_QUAD_EPSREL = 1e-12
_QUAD_LIMIT = 400


@dataclass(frozen=True)
class InitialCurve:
    """Arc-length parametrized curve at tau = 0.

    sampler(s) -> (x, u). tangent(s) -> (x_s, u_s) is optional; without it the
    tangent is taken by central differences.
    """

    sampler: Callable
    S: float
    s_start: float = 0.0
    tangent: Optional[Callable] = None
    winding_tol: float = DEFAULT_WINDING_TOL

    @property
    def origin(self):
        x, u = self.sampler(np.array([self.s_start]))
        return float(x[0]), float(u[0])

    def tangent_at(self, s):
        s = np.asarray(s, dtype=float)
        if self.tangent is not None:
            return self.tangent(s)
        xp, up = self.sampler(s + _FD_STEP)
        xm, um = self.sampler(s - _FD_STEP)
        return (xp - xm) / (2 * _FD_STEP), (up - um) / (2 * _FD_STEP)

    @classmethod
    def from_family(cls, family):
        return cls(
            sampler=lambda s: family.curve(0.0, s),
            S=family.S,
            s_start=family.s_start,
            tangent=lambda s: family.tangent(0.0, s),
            winding_tol=family.winding_tol,
        )


def _wrap(angle):
    return (angle + math.pi) % TWO_PI - math.pi


def _check_winding(total, tol):
    n = int(round(total / TWO_PI))
    mismatch = abs(total - TWO_PI * n)
    if mismatch > tol:
        raise NonClosingCurve(mismatch, tol)
    if mismatch > DEFAULT_WINDING_TOL:
        log.info("Curve closes with winding mismatch %.3e (tolerance %.1e)", mismatch, tol)
    return n


def theta_from_samples(
    x,
    u,
    delta_tau=1.0,
    delta_s=None,
    winding_tol=DEFAULT_WINDING_TOL,
    branch_tol=DEFAULT_BRANCH_TOL,
):
    """Chord angles of K+1 samples (k = 0..K) of one period of a curve.

    Returns (ThetaField, winding). theta_1 is on the principal branch; each
    following chord is lifted to within pi of its predecessor. theta_0 is the
    wrap-around chord (x_K - x_{K-1}, u_0 - u_{K-1}) lifted next to theta_1.
    delta_s defaults to the mean chord length.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != u.shape or x.ndim != 1 or x.size < 4:
        raise ValueError("x and u must be matching 1-D arrays of K+1 >= 4 samples")
    dx = np.diff(x)
    du = np.diff(u)
    chord = np.hypot(dx, du)
    zero = np.flatnonzero(chord == 0.0)
    if zero.size:
        raise CoincidentPoints(int(zero[0]) + 1)

    raw = np.arctan2(du, dx)
    jumps = _wrap(np.diff(raw))
    bad = np.flatnonzero(np.abs(jumps) >= math.pi - branch_tol)
    if bad.size:
        raise AmbiguousBranch(int(bad[0]) + 2, float(jumps[bad[0]]))
    theta = raw[0] + np.concatenate(([0.0], np.cumsum(jumps)))

    wrap_raw = math.atan2(u[0] - u[-2], x[-1] - x[-2])
    wrap_jump = _wrap(theta[0] - wrap_raw)
    if abs(wrap_jump) >= math.pi - branch_tol:
        raise AmbiguousBranch(1, float(wrap_jump))
    theta0 = theta[0] - wrap_jump
    winding = _check_winding(theta[-1] - theta0, winding_tol)

    K = theta.size
    if delta_s is None:
        delta_s = float(np.mean(chord))
    grid = GridSpec(K=K, delta_s=delta_s, delta_tau=delta_tau)
    return ThetaField(theta, winding, grid), winding


def _check_unit_speed(curve, s):
    spots = s[:: max(1, s.size // _SPEED_SPOTS)]
    xs, us = curve.tangent_at(spots)
    defect = np.abs(np.asarray(xs) ** 2 + np.asarray(us) ** 2 - 1.0)
    worst = int(np.argmax(defect))
    if defect[worst] > _SPEED_TOL:
        raise ConfigError(
            f"initial curve is not arc-length parametrized: |x_s^2 + u_s^2 - 1| = "
            f"{defect[worst]:.3e} at s = {spots[worst]:.6g}"
        )


def theta_from_analytic(curve, grid, branch_tol=DEFAULT_BRANCH_TOL):
    """theta(0, s_k) at s_k = s_start + k*delta_s, k = 1..K, on a continuous branch."""
    if not math.isclose(curve.S, grid.S, rel_tol=1e-12):
        raise ConfigError(f"grid period {grid.S:.12g} differs from curve period {curve.S:.12g}")
    s = curve.s_start + grid.delta_s * np.arange(grid.K + 1)
    s[-1] = curve.s_start + curve.S
    _check_unit_speed(curve, s)
    theta = unwrap_angle(curve.tangent_at, s)
    steps = np.abs(np.diff(theta))
    bad = np.flatnonzero(steps >= math.pi - branch_tol)
    if bad.size:
        raise AmbiguousBranch(int(bad[0]) + 1, float(steps[bad[0]]))
    winding = _check_winding(theta[-1] - theta[0], curve.winding_tol)
    return ThetaField(theta[1:], winding, grid)


def _derivative(u0, du0, h=1e-6):
    if du0 is not None:
        return du0
    return lambda x: (u0(x + h) - u0(x - h)) / (2 * h)


def _arc_density(u0, du0):
    deriv = _derivative(u0, du0)
    return lambda x: math.sqrt(1.0 + float(deriv(x)) ** 2)


def _quad(fn, a, b):
    result = quad(fn, a, b, epsabs=0.0, epsrel=_QUAD_EPSREL, limit=_QUAD_LIMIT, full_output=1)
    if len(result) > 3:
        raise QuadratureError(f"Arc-length quadrature on [{a:.6g}, {b:.6g}] failed: {result[3]}")
    return result[0]


def arclength_total(u0, L, du0=None):
    """Total arc length S(u0) = integral_0^L sqrt(1 + u0'(x)^2) dx."""
    if not L > 0:
        raise ConfigError(f"profile period L must be positive, got {L}")
    return _quad(_arc_density(u0, du0), 0.0, L)


def equidistribute(u0, L, K, du0=None):
    """Points x_0..x_K with equal arc length S(u0)/K between neighbours.

    Returns (x, u, S): the points, u0 at the points and the total arc length
    S(u0), from which callers take delta_s = S/K.

    Each x_k solves A(x_k) = k*delta_s for the cumulative arc length A by
    Newton (A' is the arc density); a bracketing solve takes over when Newton
    fails or leaves [x_{k-1}, L].
    """
    if int(K) != K or K < 3:
        raise ConfigError(f"K must be an integer >= 3, got {K}")
    density = _arc_density(u0, du0)
    S = arclength_total(u0, L, du0)
    delta_s = S / K
    tol = 1e-12 * S
    x = np.empty(K + 1)
    x[0], x[K] = 0.0, L
    prev = 0.0
    for k in range(1, K):
        target = k * delta_s
        base = (k - 1) * delta_s

        def gap(xk, prev=prev, base=base, target=target):
            return base + _quad(density, prev, xk) - target

        guess = min(prev + delta_s / density(prev), L)
        root = None
        try:
            sol = root_scalar(gap, x0=guess, fprime=density, method="newton", xtol=1e-15, maxiter=50)
            if sol.converged and prev <= sol.root <= L and abs(gap(sol.root)) <= tol:
                root = sol.root
        except (ArithmeticError, RuntimeError, QuadratureError):
            root = None
        if root is None:
            sol = root_scalar(gap, bracket=(prev, L), method="brentq", xtol=1e-15, rtol=4 * np.finfo(float).eps)
            if not sol.converged:
                raise QuadratureError(f"Equidistribution failed at k={k}: {sol.flag}")
            root = sol.root
        x[k] = root
        prev = root
    u = np.array([float(u0(xk)) for xk in x])
    return x, u, S


# ─── CSV input ──────────────────────────────────────────────────────────────


def _read_columns(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Initial data file not found: {path}")
    with path.open() as fh:
        first = fh.readline()
    skip = 1 if any(c.isalpha() for c in first) else 0
    try:
        data = np.loadtxt(path, delimiter=",", comments="#", skiprows=skip, ndmin=2)
    except ValueError as exc:
        raise ConfigError(f"Could not parse {path}: {exc}") from exc
    return data


def read_curve_csv(path):
    """Sampled curve with columns (s, x, u) or (x, u). Returns (s or None, x, u)."""
    data = _read_columns(path)
    if data.shape[1] == 3:
        return data[:, 0], data[:, 1], data[:, 2]
    if data.shape[1] == 2:
        return None, data[:, 0], data[:, 1]
    raise ConfigError(f"{path}: expected 2 or 3 columns, got {data.shape[1]}")


def read_profile_csv(path, L=None):
    """Periodic profile samples (x_j, u_j) on [0, L) as a spline.

    Returns (u0, du0, L). L defaults to N times the sample spacing.
    """
    data = _read_columns(path)
    if data.shape[1] != 2:
        raise ConfigError(f"{path}: profile needs 2 columns (x, u), got {data.shape[1]}")
    xs, us = data[:, 0] - data[0, 0], data[:, 1]
    if np.any(np.diff(xs) <= 0):
        raise ConfigError(f"{path}: profile x values must be strictly increasing")
    if L is None:
        L = xs[-1] + (xs[-1] - xs[-2])
    if not L > xs[-1]:
        raise ConfigError(f"{path}: period L={L} must exceed the last sample offset {xs[-1]}")
    spline = CubicSpline(np.append(xs, L), np.append(us, us[0]), bc_type="periodic")
    deriv = spline.derivative()

    def u0(x):
        return spline(np.mod(x, L))

    def du0(x):
        return deriv(np.mod(x, L))

    return u0, du0, float(L)


def theta_from_profile(u0, L, K, delta_tau, du0=None):
    """Equidistribute a profile and convert it; returns (ThetaField, x, u)."""
    x, u, S = equidistribute(u0, L, K, du0)
    theta, _ = theta_from_samples(x, u, delta_tau=delta_tau, delta_s=S / K)
    return theta, x, u


def theta_from_curve_csv(path, delta_tau, winding_tol=DEFAULT_WINDING_TOL):
    """Sampled curve file -> (ThetaField, x, u).

    The samples must already be equally spaced in arc length: every chord has
    to lie within CHORD_TOL of delta_s (the s spacing, or the mean chord when
    the file has no s column). Points taken at equal steps of some other
    parameter are rejected; resample them with csv_profile or by arc length.
    """
    s, x, u = read_curve_csv(path)
    chord = np.hypot(np.diff(x), np.diff(u))
    if s is not None:
        spacing = np.diff(s)
        delta_s = float(np.mean(spacing))
        if np.max(np.abs(spacing - delta_s)) > 1e-9 * max(1.0, abs(delta_s)):
            raise ConfigError(f"{path}: s column must be uniformly spaced")
    else:
        delta_s = float(np.mean(chord))
    if delta_s > 0.0:
        spread = np.abs(chord - delta_s) / delta_s
        worst = int(np.argmax(spread))
        if spread[worst] > CHORD_TOL:
            raise ConfigError(
                f"{path}: samples are not equally spaced in arc length "
                f"(chord {worst + 1} is {chord[worst]:.6g}, delta_s is {delta_s:.6g})"
            )
    theta, _ = theta_from_samples(x, u, delta_tau=delta_tau, delta_s=delta_s, winding_tol=winding_tol)
    return theta, x, u


# ─── fixed mesh ─────────────────────────────────────────────────────────────


def _invert_monotone(fn, target, guess, width):
    lo, hi = guess - width, guess + width
    for _ in range(60):
        if fn(lo) <= target <= fn(hi):
            break
        lo, hi = lo - width, hi + width
        width *= 2.0
    else:
        raise QuadratureError(f"Could not bracket x = {target:.6g}")
    sol = root_scalar(lambda q: fn(q) - target, bracket=(lo, hi), method="brentq", xtol=1e-14)
    return sol.root


def _x_along(family, t):
    def x_of(s):
        return float(family.curve(t, np.array([s]))[0][0])

    return x_of


def sample_on_grid(family, x, t=0.0):
    """Exact u(t, x_j) of a single-valued family at physical points x_j.

    Points are folded into the window [x(t, s_start), x(t, s_start + S)) first,
    so a fixed grid can be compared with the travelling exact solution.
    """
    x_of = _x_along(family, t)
    left = x_of(family.s_start)
    L = x_of(family.s_start + family.S) - left
    targets = left + np.mod(np.asarray(x, dtype=float) - left, L)
    s_vals = np.empty(targets.size)
    guess = family.s_start
    width = max(L / max(targets.size, 1), 1e-3)
    for j in np.argsort(targets, kind="stable"):
        guess = _invert_monotone(x_of, targets[j], guess, width)
        s_vals[j] = guess
    _, u = family.curve(t, s_vals)
    return np.asarray(u, dtype=float)


def fixed_mesh_from_family(family, N):
    """Uniform samples u_j = u(0, s(x_j)) of a single-valued exact curve.

    The grid spans one window [x(s_start), x(s_start + S)); the small mean left
    by truncation is removed so the data satisfies the implicit constraint.
    """
    if int(N) != N or N < 3:
        raise ConfigError(f"N must be an integer >= 3, got {N}")
    if not family.is_single_valued():
        raise ConfigError(f"{family.name} initial data is multi-valued; fixed-mesh methods need u(x)")
    x_of = _x_along(family, 0.0)
    x_start = x_of(family.s_start)
    delta_x = (x_of(family.s_start + family.S) - x_start) / N
    u = sample_on_grid(family, x_start + delta_x * np.arange(N))
    mean = float(np.mean(u))
    log.debug("Removed mean %.3e from fixed-mesh initial data", mean)
    return UniformField(u - mean, delta_x), x_start
