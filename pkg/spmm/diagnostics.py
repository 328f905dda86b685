"""Invariants, error metrics and the oscillation indicator."""

import logging
import math
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from .baselines import energy_d, norm_d
from .fields import TWO_PI, UniformField
from .hodograph import naive_gap
from .sg_dvdm import hamiltonian_d

log = logging.getLogger(__name__)

_ROUGHNESS_GUARD = 1e-300


@dataclass(frozen=True)
class InvariantRecord:
    step: int
    time: float
    H_d: Optional[float] = None
    window_L: Optional[float] = None
    constraint_residual: Optional[float] = None
    max_u: Optional[float] = None
    norm_I: Optional[float] = None
    energy_E: Optional[float] = None
    winding: Optional[int] = None
    roughness: Optional[float] = None
    naive_gap: Optional[float] = None
    base_x: Optional[float] = None
    base_u: Optional[float] = None

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]

    def as_row(self):
        return asdict(self)


def implicit_constraint_residual(curve):
    """sum_{k=1..K} u_k (x_k - x_{k-1})."""
    return float(np.sum(curve.u[1:] * np.diff(curve.x)))


def norm_on_curve(curve):
    """1/2 sum of squared cell-midpoint u times the cell width."""
    mid = 0.5 * (curve.u[1:] + curve.u[:-1])
    return 0.5 * float(np.sum(mid**2 * np.diff(curve.x)))


def energy_on_curve(curve):
    """Energy of the curve resampled on a uniform grid; None if x is not increasing."""
    if np.any(np.diff(curve.x) <= 0.0):
        return None
    K = curve.K
    dx = curve.window / K
    grid = curve.x[0] + dx * np.arange(K)
    u = np.interp(grid, curve.x, curve.u)
    return energy_d(UniformField(u - np.mean(u), dx))


def roughness_indicator(values):
    v = np.asarray(values, dtype=float)
    if v.size < 3:
        raise ValueError("roughness needs at least 3 values")
    second = v[2:] - 2.0 * v[1:-1] + v[:-2]
    return float(np.sum(np.abs(second)) / np.sum(np.abs(v) + _ROUGHNESS_GUARD))


def theta_deviation(theta):
    """theta_k minus its winding ramp 2 pi n k/K and its mean.

    A constant shift of theta or a change of the 2 pi branch leaves the result
    unchanged, so the roughness of it only sees the shape of the curve.
    """
    K = theta.grid.K
    ramp = theta.offset * np.arange(1, K + 1) / K
    detrended = theta.theta - ramp
    return detrended - np.mean(detrended)


def spurious_roughness(u, u_exact):
    """Periodic second-difference mass of u - u_exact relative to that of u_exact.

    Zero for the exact profile; near 1 once the grid-scale content of the error
    is as large as that of the pulse itself.
    """
    u = np.asarray(u, dtype=float)
    u_exact = np.asarray(u_exact, dtype=float)
    if u.shape != u_exact.shape or u.size < 3:
        raise ValueError("u and u_exact must be matching sequences of at least 3 values")

    def mass(v):
        return float(np.sum(np.abs(np.roll(v, -1) - 2.0 * v + np.roll(v, 1))))

    return mass(u - u_exact) / max(mass(u_exact), _ROUGHNESS_GUARD)


def sample_points(grid, s_start=0.0):
    """s_k = s_start + k ds for k = 1..K."""
    return s_start + grid.delta_s * np.arange(1, grid.K + 1)


def theta_branch(theta, exact_theta, s_start=0.0):
    """Whole turns between the initial theta and the exact angle at t = 0."""
    exact = np.asarray(exact_theta(0.0, sample_points(theta.grid, s_start)), dtype=float)
    return int(round(float(np.mean(theta.theta - exact)) / TWO_PI))


def error_vs_exact_theta(theta, exact_theta, t, s_start=0.0, branch=0):
    """sup |theta_k - theta_exact(t, s_k) - 2 pi branch|.

    branch is fixed once from the initial data (theta_branch); a full-turn
    slip later in the run shows up as an error of about 2 pi.
    """
    exact = np.asarray(exact_theta(t, sample_points(theta.grid, s_start)), dtype=float)
    return float(np.max(np.abs(theta.theta - exact - TWO_PI * branch)))


def physical_error(curve, exact_curve, t, delta_s, s_start=0.0, u_time=None, x_shift=0.0):
    """sup distance to the exact curve after aligning the base points.

    Aligning removes the O(dtau) drift of the discrete base point, which is a
    rigid translation of the whole curve. x_k sums cos(theta_j) ds up to the
    sample theta_k, so it stands for the exact curve at s_k + x_shift
    (ds/2 for the hodograph reconstruction). u is compared at u_time, which
    defaults to t.
    """
    s = s_start + delta_s * np.arange(curve.K + 1)
    ex, _ = exact_curve(t, s + x_shift)
    _, eu = exact_curve(t if u_time is None else u_time, s)
    ex = np.asarray(ex, dtype=float)
    eu = np.asarray(eu, dtype=float)
    dx = (curve.x - curve.x[0]) - (ex - ex[0])
    du = (curve.u - curve.u[0]) - (eu - eu[0])
    return float(np.max(np.hypot(dx, du)))


def record_moving(step, time, theta, curve, base):
    """InvariantRecord for one level of a moving-mesh run."""
    energy = energy_on_curve(curve)
    return InvariantRecord(
        step=step,
        time=time,
        H_d=hamiltonian_d(theta),
        window_L=curve.window,
        constraint_residual=implicit_constraint_residual(curve),
        max_u=max_abs(curve.u),
        norm_I=norm_on_curve(curve),
        energy_E=energy,
        winding=theta.winding,
        roughness=roughness_indicator(theta_deviation(theta)),
        naive_gap=naive_gap(theta),
        base_x=base.x0,
        base_u=base.u0,
    )


def record_fixed(step, time, field):
    """InvariantRecord for one level of a fixed-mesh run."""
    return InvariantRecord(
        step=step,
        time=time,
        window_L=field.L,
        max_u=max_abs(field.u),
        norm_I=norm_d(field),
        energy_E=_energy_or_none(field),
        roughness=roughness_indicator(field.u),
    )


def _energy_or_none(field):
    # The multi-symplectic scheme only keeps the mean approximately zero.
    u = field.u - np.mean(field.u)
    value = energy_d(UniformField(u, field.delta_x))
    return value if math.isfinite(value) else None


def relative_drift(series):
    """max |q_m - q_0| / max(|q_0|, tiny) over a sequence, ignoring None."""
    vals = np.array([v for v in series if v is not None], dtype=float)
    if vals.size == 0:
        return None
    ref = abs(vals[0])
    return float(np.max(np.abs(vals - vals[0])) / max(ref, np.finfo(float).tiny))


def max_abs(series):
    vals = np.array([v for v in series if v is not None], dtype=float)
    return float(np.max(np.abs(vals))) if vals.size else None
