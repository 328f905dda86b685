"""Discrete hodograph transformation: theta levels -> physical curve (x, u).

x-increments are cos(theta^m_i) ds. u-increments use the backward average of
the discrete variational derivative between levels m and m+1, which sums to
zero over one period whenever the step residual vanishes. That keeps the
reconstructed curve periodic in u without any correction. The naive variant
with sin(theta^m_i) increments is kept for comparison; its closing gap
u_K - u_0 = sum sin(theta_k) ds is generally nonzero.

The base point moves by x0' = x0 - dtau/2 * u0^2 with u0 computed at level m,
so u0 must be evaluated before x0 is advanced. HodographTracker enforces the
order.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ZeroWindow
from .fields import CurveState, shift, wide_avg
from .sg_dvdm import dvd_values

log = logging.getLogger(__name__)

_ZERO_WINDOW_REL = 1e-12


@dataclass(frozen=True)
class BasePoint:
    x0: float
    u0: Optional[float] = None
    time_index: int = 0


def _tau_rate(theta_curr, theta_next):
    if theta_next.grid != theta_curr.grid or theta_next.winding != theta_curr.winding:
        raise ValueError("theta levels must share grid and winding")
    return (theta_next.theta - theta_curr.theta) / theta_curr.grid.delta_tau


def base_u(theta_curr, theta_next, naive=False, scheme="average"):
    """u0 at level m from the discrete constraint sum u_k (x_k - x_{k-1}) = 0.

    With the average scheme u_k - u_0 telescopes to the tau-rate difference
    r_k - r_0; with the central scheme to the same difference of the wide
    average of r. naive=True returns the uncorrected delta_tau theta_0.
    """
    rate = _tau_rate(theta_curr, theta_next)
    if scheme == "central" and not naive:
        rate = wide_avg(rate)
    elif scheme not in ("average", "central"):
        raise ValueError(f"Unknown scheme {scheme!r}")
    # theta_0 = theta_K - 2 pi n on both levels, so its tau-difference is rate_K
    rate0 = float(rate[-1])
    if naive:
        return rate0
    grid = theta_curr.grid
    cos = np.cos(theta_curr.theta)
    window = float(np.sum(cos)) * grid.delta_s
    if abs(window) < _ZERO_WINDOW_REL * grid.S:
        raise ZeroWindow(window)
    return rate0 - float(np.sum(rate * cos)) * grid.delta_s / window


def advance_base_x(base, delta_tau):
    if base.u0 is None:
        raise ValueError("base point u0 must be computed before advancing x0")
    return base.x0 - 0.5 * delta_tau * base.u0**2


def _cumulative(start, increments, compensated):
    if not compensated:
        return start + np.concatenate(([0.0], np.cumsum(increments)))
    out = np.empty(increments.size + 1)
    out[0] = total = start
    carry = 0.0
    for i, inc in enumerate(increments, start=1):
        y = inc - carry
        t = total + y
        carry = (t - total) - y
        total = t
        out[i] = total
    return out


def reconstruct_curve(theta_curr, theta_next, base, compensated=False, scheme="average"):
    """Curve at level m from theta^m and theta^{m+1}; u0 is computed if missing."""
    u0 = base.u0 if base.u0 is not None else base_u(theta_curr, theta_next, scheme=scheme)
    ds = theta_curr.grid.delta_s
    a = dvd_values(theta_next.theta, theta_curr.theta)
    x = _cumulative(base.x0, np.cos(theta_curr.theta) * ds, compensated)
    u = _cumulative(u0, 0.5 * (a + shift(a, -1)) * ds, compensated)
    return CurveState(x, u, theta_curr.time_index)


def reconstruct_curve_naive(theta_curr, base, compensated=False):
    """Curve with u-increments sin(theta^m_i) ds."""
    if base.u0 is None:
        raise ValueError("naive reconstruction needs an explicit base u0")
    ds = theta_curr.grid.delta_s
    x = _cumulative(base.x0, np.cos(theta_curr.theta) * ds, compensated)
    u = _cumulative(base.u0, np.sin(theta_curr.theta) * ds, compensated)
    return CurveState(x, u, theta_curr.time_index)


def naive_gap(theta):
    """u_K - u_0 of the naive reconstruction."""
    return float(np.sum(np.sin(theta.theta))) * theta.grid.delta_s


class HodographTracker:
    """Carries the base point through consecutive levels of one run."""

    def __init__(self, x0, naive_base=False, compensated=False, scheme="average"):
        self.x0 = float(x0)
        self.scheme = scheme
        self.naive_base = naive_base
        self.compensated = compensated
        self.time_index = None

    def reconstruct(self, theta_curr, theta_next):
        """Curve and base point at level m; advances x0 to level m+1."""
        if self.time_index is not None and theta_curr.time_index != self.time_index:
            raise ValueError(
                f"expected level {self.time_index}, got {theta_curr.time_index}"
            )
        u0 = base_u(theta_curr, theta_next, naive=self.naive_base, scheme=self.scheme)
        base = BasePoint(self.x0, u0, theta_curr.time_index)
        curve = reconstruct_curve(theta_curr, theta_next, base, self.compensated)
        self.x0 = advance_base_x(base, theta_curr.grid.delta_tau)
        self.time_index = theta_curr.time_index + 1
        return curve, base
