"""Closed-form solutions of the short pulse equation in parametric form.

Every family maps (tau, s) to a point (x, u) of the solution curve, with s the
arc-length parameter. The families double as initial data and as oracles for
error measurement, so each one also reports its tangent (x_s, u_s) and the
continuous tangent angle theta with x_s = cos(theta), u_s = sin(theta).

Breathers (pulse and loop/anti-loop) are solitary: they are sampled on the
centred window s in [-S/2, S/2) and only close up to their exponentially
small tails. The traveling waves are exactly periodic in s.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .elliptic import complete_K, incomplete_E, jacobi_amplitude, jacobi_sn_cn_dn
from .errors import ConfigError

log = logging.getLogger(__name__)

# Above this xi the pulse develops u_x -> infinity (multi-valued profile).
XI_CRITICAL = math.sin(math.pi / 8.0)

# Complex-step size for breather tangents; no subtractive cancellation.
_COMPLEX_STEP = 1e-30

# Sub-grid refinement used to unwrap numerically evaluated angles.
_UNWRAP_REFINE = 16

# Closing tolerance of the truncated solitary families.
SOLITARY_WINDING_TOL = 1e-3

TRAVELING_FAMILIES = ("hump", "upright_loop", "alternating")


@dataclass(frozen=True)
class BreatherParams:
    xi: float

    def __post_init__(self):
        if not self.xi > 0 or self.xi == 1.0:
            raise ConfigError(f"breather xi must be positive and != 1, got {self.xi}")

    @property
    def mode(self):
        return "pulse" if self.xi < 1.0 else "loop_antiloop"

    @property
    def zeta(self):
        return math.sqrt(abs(1.0 - self.xi * self.xi))


@dataclass(frozen=True)
class TravelingWaveParams:
    family: str
    xi: float
    v: float = 1.0
    x0: float = 0.0
    sign: int = 1

    def __post_init__(self):
        if self.family not in TRAVELING_FAMILIES:
            raise ConfigError(f"Unknown traveling-wave family {self.family!r}")
        if not self.v > 0:
            raise ConfigError(f"wave speed v must be positive, got {self.v}")
        if self.sign not in (1, -1):
            raise ConfigError(f"sign must be +1 or -1, got {self.sign}")
        lo, hi = {"hump": (0.0, 0.5), "upright_loop": (0.0, 1.0), "alternating": (0.5, 1.0)}[
            self.family
        ]
        if not lo < self.xi < hi:
            raise ConfigError(f"{self.family} needs xi in ({lo}, {hi}), got {self.xi}")

    @property
    def alpha(self):
        if self.family == "hump":
            return math.sqrt((1.0 - 2.0 * self.xi) / self.v)
        if self.family == "alternating":
            return math.sqrt((2.0 * self.xi - 1.0) / self.v)
        return math.sqrt((2.0 - self.xi) / (self.xi * self.xi * self.v))

    @property
    def period(self):
        """Period in s of one copy of the wave."""
        quarter = complete_K(self.xi) / self.alpha
        return 2.0 * quarter if self.family == "upright_loop" else 4.0 * quarter

    @property
    def winding_per_period(self):
        # theta = -sign * 2 am(w) advances by -sign * 2 pi per dn period
        return -self.sign if self.family == "upright_loop" else 0

    def argument(self, tau, s):
        a = self.alpha
        if self.family == "upright_loop":
            return a * s - tau / (self.xi * a)
        return a * s - tau / a


# ─── breathers ──────────────────────────────────────────────────────────────


def _require_mode(p, mode):
    if p.mode != mode:
        raise ConfigError(f"{mode} requires xi {'< 1' if mode == 'pulse' else '> 1'}, got {p.xi}")


def breather_pulse(p, tau, s):
    """Pulse solution; accepts complex s or tau for complex-step derivatives."""
    _require_mode(p, "pulse")
    xi, zeta = p.xi, p.zeta
    phi = xi * (s + tau)
    psi = zeta * (s - tau)
    denom = xi**2 * np.sin(psi) ** 2 + zeta**2 * np.cosh(phi) ** 2
    u = 4.0 * xi * zeta * (xi * np.sin(psi) * np.sinh(phi) + zeta * np.cos(psi) * np.cosh(phi)) / denom
    x = s + 2.0 * xi * zeta * (xi * np.sin(2.0 * psi) - zeta * np.sinh(2.0 * phi)) / denom
    return x, u


def loop_antiloop(p, tau, s):
    """Loop/anti-loop pair; x - s tends to -+4 xi as s -> +-inf."""
    _require_mode(p, "loop_antiloop")
    xi, zeta = p.xi, p.zeta
    phi = xi * (s + tau)
    psi = zeta * (s - tau)
    denom = xi**2 * np.sinh(psi) ** 2 + zeta**2 * np.cosh(phi) ** 2
    u = (
        4.0 * xi * zeta
        * (xi * np.sinh(psi) * np.sinh(phi) + zeta * np.cosh(psi) * np.cosh(phi))
        / denom
    )
    x = s + 2.0 * xi * zeta * (xi * np.sinh(2.0 * psi) - zeta * np.sinh(2.0 * phi)) / denom
    return x, u


def _complex_step_tangent(curve, tau, s):
    s = np.asarray(s, dtype=float)
    x, u = curve(tau, s + 1j * _COMPLEX_STEP)
    return np.imag(x) / _COMPLEX_STEP, np.imag(u) / _COMPLEX_STEP


def unwrap_angle(tangent, s, refine=_UNWRAP_REFINE):
    """Continuous atan2 angle of a tangent field along increasing s.

    The angle is tracked on a sub-grid `refine` times finer than s so that
    tangent turns between samples never alias; theta at s[0] is the principal
    value.
    """
    s = np.asarray(s, dtype=float)
    if s.size == 1:
        xs, us = tangent(s)
        return np.arctan2(us, xs)
    frac = np.arange(refine) / refine
    fine = (s[:-1, None] + np.diff(s)[:, None] * frac[None, :]).ravel()
    fine = np.append(fine, s[-1])
    xs, us = tangent(fine)
    angle = np.unwrap(np.arctan2(us, xs))
    return angle[::refine]


# ─── traveling waves ────────────────────────────────────────────────────────


def _require_family(p, family):
    if p.family != family:
        raise ConfigError(f"expected {family} parameters, got {p.family}")


def periodic_hump(p, tau, s):
    _require_family(p, "hump")
    return _cn_wave(p, tau, s, speed=p.v)


def periodic_alternating(p, tau, s):
    _require_family(p, "alternating")
    return _cn_wave(p, tau, s, speed=-p.v)


def _cn_wave(p, tau, s, speed):
    a = p.alpha
    w = p.argument(tau, s)
    _, cn, _ = jacobi_sn_cn_dn(w, p.xi)
    x = speed * tau + p.x0 - s + tau / a**2 + (2.0 / a) * incomplete_E(w, p.xi)
    u = p.sign * (2.0 * math.sqrt(p.xi) / a) * cn
    return x, u


def periodic_loop(p, tau, s):
    _require_family(p, "upright_loop")
    a, xi = p.alpha, p.xi
    w = p.argument(tau, s)
    _, _, dn = jacobi_sn_cn_dn(w, xi)
    x = p.x0 - xi * p.v * a**2 * s + (2.0 / (xi * a)) * incomplete_E(w, xi)
    u = p.sign * (2.0 / (xi * a)) * dn
    return x, u


def traveling_wave_theta(p, tau, s):
    """Continuous tangent angle of any traveling-wave family."""
    w = p.argument(tau, np.asarray(s, dtype=float))
    if p.family == "upright_loop":
        return -p.sign * 2.0 * jacobi_amplitude(w, p.xi)
    sn, _, _ = jacobi_sn_cn_dn(w, p.xi)
    return -p.sign * 2.0 * np.arcsin(math.sqrt(p.xi) * sn)


def periodic_hump_theta(p, tau, s):
    _require_family(p, "hump")
    return traveling_wave_theta(p, tau, s)


# ─── families ───────────────────────────────────────────────────────────────


class ExactSolution:
    """One exact family with the window it is simulated on.

    Subclasses provide curve(); tangent() and theta() default to complex-step
    tangents and an unwrapped angle.
    """

    name = "exact"
    winding_tol = 1e-6

    def __init__(self, S, s_start=0.0, winding=0):
        if not S > 0:
            raise ConfigError(f"period S must be positive, got {S}")
        self.S = float(S)
        self.s_start = float(s_start)
        self.winding = int(winding)

    def curve(self, tau, s):
        raise NotImplementedError

    def tangent(self, tau, s):
        return _complex_step_tangent(self.curve, tau, s)

    def theta(self, tau, s):
        return unwrap_angle(lambda q: self.tangent(tau, q), s)

    def window(self, tau=0.0):
        x, _ = self.curve(tau, np.array([self.s_start, self.s_start + self.S]))
        return float(x[1] - x[0])

    def is_single_valued(self, samples=4096):
        s = self.s_start + self.S * np.arange(samples) / samples
        xs, _ = self.tangent(0.0, s)
        return bool(np.all(xs > 0.0))

    def __repr__(self):
        return f"{type(self).__name__}(S={self.S:g}, s_start={self.s_start:g})"


class FlatSolution(ExactSolution):
    name = "flat"

    def curve(self, tau, s):
        s = np.asarray(s, dtype=float)
        return s.copy(), np.zeros_like(s)

    def tangent(self, tau, s):
        s = np.asarray(s, dtype=float)
        return np.ones_like(s), np.zeros_like(s)

    def theta(self, tau, s):
        return np.zeros_like(np.asarray(s, dtype=float))


class BreatherSolution(ExactSolution):
    winding_tol = SOLITARY_WINDING_TOL

    def __init__(self, params, S):
        super().__init__(S, s_start=-0.5 * S, winding=0)
        self.params = params
        self.name = params.mode

    def curve(self, tau, s):
        fn = breather_pulse if self.params.mode == "pulse" else loop_antiloop
        return fn(self.params, tau, s)


class TravelingWaveSolution(ExactSolution):
    def __init__(self, params, periods=1):
        if int(periods) != periods or periods < 1:
            raise ConfigError(f"periods must be a positive integer, got {periods}")
        periods = int(periods)
        super().__init__(params.period * periods, winding=params.winding_per_period * periods)
        self.params = params
        self.periods = periods
        self.name = params.family

    def curve(self, tau, s):
        s = np.asarray(s, dtype=float)
        if self.params.family == "hump":
            return periodic_hump(self.params, tau, s)
        if self.params.family == "alternating":
            return periodic_alternating(self.params, tau, s)
        return periodic_loop(self.params, tau, s)

    def theta(self, tau, s):
        return traveling_wave_theta(self.params, tau, s)

    def tangent(self, tau, s):
        th = self.theta(tau, s)
        return np.cos(th), np.sin(th)


EXACT_KINDS = ("flat", "breather", "loop_antiloop") + TRAVELING_FAMILIES


def build_family(kind, xi=None, S=None, v=1.0, x0=0.0, sign=1, periods=1):
    """Construct the exact family named by an `initial.kind` config value."""
    if kind == "flat":
        return FlatSolution(S if S is not None else 10.0)
    if kind in ("breather", "loop_antiloop"):
        params = BreatherParams(xi)
        expected = "pulse" if kind == "breather" else "loop_antiloop"
        _require_mode(params, expected)
        if S is None:
            S = 70.0 if kind == "breather" else 80.0
        if kind == "breather" and xi >= XI_CRITICAL:
            log.debug("Pulse xi=%.4g is above the critical value %.4f (multi-valued)", xi, XI_CRITICAL)
        return BreatherSolution(params, S)
    if kind in TRAVELING_FAMILIES:
        family = TravelingWaveSolution(TravelingWaveParams(kind, xi, v, x0, int(sign)), periods)
        if S is not None and not math.isclose(S, family.S, rel_tol=1e-9):
            raise ConfigError(
                f"{kind} has period {family.S:.12g} for {periods} copies; S={S} does not match"
            )
        return family
    raise ConfigError(f"Unknown exact family {kind!r}; expected one of {', '.join(EXACT_KINDS)}")
