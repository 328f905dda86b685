"""Grid and field value types plus the difference/average operator algebra.

Theta values are stored for k = 1..K (array index k-1). Every access outside
that range goes through the winding extension theta_{k+K} = theta_k + 2*pi*n,
so the operators below never need ghost cells.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * math.pi


def _frozen_array(values):
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class GridSpec:
    K: int
    delta_s: float
    delta_tau: float
    M: int = 1
    S: float = field(init=False)

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 3:
            raise ValueError(f"K must be an integer >= 3, got {self.K}")
        if not self.delta_s > 0:
            raise ValueError(f"delta_s must be positive, got {self.delta_s}")
        if not self.delta_tau > 0:
            raise ValueError(f"delta_tau must be positive, got {self.delta_tau}")
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "S", self.K * self.delta_s)

    @classmethod
    def from_period(cls, K, S, delta_tau, M=1):
        return cls(K=K, delta_s=S / K, delta_tau=delta_tau, M=M)


@dataclass(frozen=True)
class ThetaField:
    """One time level of the SG angle on the computational grid."""

    theta: np.ndarray
    winding: int
    grid: GridSpec
    time_index: int = 0

    def __post_init__(self):
        arr = _frozen_array(self.theta)
        if arr.shape != (self.grid.K,):
            raise ValueError(f"theta must have {self.grid.K} values, got shape {arr.shape}")
        object.__setattr__(self, "theta", arr)
        object.__setattr__(self, "winding", int(self.winding))

    @property
    def offset(self):
        """Jump of theta over one computational period."""
        return TWO_PI * self.winding

    def at(self, k):
        return extend_periodic(self, k)

    def with_values(self, theta, time_index):
        return ThetaField(theta, self.winding, self.grid, time_index)


@dataclass(frozen=True)
class CurveState:
    """Physical-plane samples (x_k, u_k), k = 0..K, for one time level."""

    x: np.ndarray
    u: np.ndarray
    time_index: int = 0

    def __post_init__(self):
        x = _frozen_array(self.x)
        u = _frozen_array(self.u)
        if x.shape != u.shape or x.ndim != 1 or x.size < 4:
            raise ValueError("x and u must be matching 1-D arrays of K+1 >= 4 values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u", u)

    @property
    def K(self):
        return self.x.size - 1

    @property
    def base_x(self):
        return float(self.x[0])

    @property
    def base_u(self):
        return float(self.u[0])

    @property
    def window(self):
        return float(self.x[-1] - self.x[0])


@dataclass(frozen=True)
class UniformField:
    """Fixed-mesh physical solution for the baseline schemes."""

    u: np.ndarray
    delta_x: float
    time_index: int = 0

    def __post_init__(self):
        u = _frozen_array(self.u)
        if u.ndim != 1 or u.size < 3:
            raise ValueError("u must be a 1-D array of at least 3 values")
        if not self.delta_x > 0:
            raise ValueError(f"delta_x must be positive, got {self.delta_x}")
        object.__setattr__(self, "u", u)

    @property
    def N(self):
        return self.u.size

    @property
    def L(self):
        return self.N * self.delta_x

    def with_values(self, u, time_index):
        return UniformField(u, self.delta_x, time_index)


def extend_periodic(theta_field, k):
    """theta_k for any integer k, using theta_{k+K} = theta_k + 2*pi*n."""
    K = theta_field.grid.K
    period, index = divmod(k - 1, K)
    return float(theta_field.theta[index]) + theta_field.offset * period


class OpKind(str, enum.Enum):
    FWD_DIFF = "fwd_diff"
    BWD_DIFF = "bwd_diff"
    FWD_AVG = "fwd_avg"
    BWD_AVG = "bwd_avg"
    CENTRAL_DIFF = "central_diff"
    SECOND_DIFF = "second_diff"
    WIDE_AVG = "wide_avg"


def shift(values, j, offset=0.0):
    """Return b with b_k = a_{k+j} for the periodic sequence a with jump offset."""
    values = np.asarray(values, dtype=float)
    n = values.size
    idx = np.arange(n) + j
    wraps = np.floor_divide(idx, n)
    out = values[idx % n]
    if offset:
        out = out + offset * wraps
    return out


def _apply(kind, prev, cur, nxt, h):
    if kind is OpKind.FWD_DIFF:
        return (nxt - cur) / h
    if kind is OpKind.BWD_DIFF:
        return (cur - prev) / h
    if kind is OpKind.FWD_AVG:
        return (nxt + cur) / 2.0
    if kind is OpKind.BWD_AVG:
        return (cur + prev) / 2.0
    if kind is OpKind.CENTRAL_DIFF:
        return (nxt - prev) / (2.0 * h)
    if kind is OpKind.SECOND_DIFF:
        return (nxt - 2.0 * cur + prev) / (h * h)
    if kind is OpKind.WIDE_AVG:
        return (nxt + 2.0 * cur + prev) / 4.0
    raise ValueError(f"Unknown operator {kind!r}")


def stencil(op_kind, values, k, h, offset=0.0):
    """Evaluate one operator at 1-based index k of a periodic sequence.

    `values` holds a_1..a_K; `offset` is the jump a_{k+K} - a_k (2*pi*n for a
    theta field, 0 for plain periodic data).
    """
    kind = OpKind(op_kind)
    values = np.asarray(values, dtype=float)
    n = values.size

    def at(j):
        period, index = divmod(j - 1, n)
        return float(values[index]) + offset * period

    return _apply(kind, at(k - 1), at(k), at(k + 1), h)


def apply_operator(op_kind, values, h, offset=0.0):
    """Vectorized form of stencil() over k = 1..K."""
    kind = OpKind(op_kind)
    values = np.asarray(values, dtype=float)
    return _apply(kind, shift(values, -1, offset), values, shift(values, 1, offset), h)


def fwd_diff(values, h, offset=0.0):
    return apply_operator(OpKind.FWD_DIFF, values, h, offset)


def bwd_diff(values, h, offset=0.0):
    return apply_operator(OpKind.BWD_DIFF, values, h, offset)


def fwd_avg(values, offset=0.0):
    return apply_operator(OpKind.FWD_AVG, values, 1.0, offset)


def bwd_avg(values, offset=0.0):
    return apply_operator(OpKind.BWD_AVG, values, 1.0, offset)


def central_diff(values, h, offset=0.0):
    return apply_operator(OpKind.CENTRAL_DIFF, values, h, offset)


def second_diff(values, h, offset=0.0):
    return apply_operator(OpKind.SECOND_DIFF, values, h, offset)


def wide_avg(values, offset=0.0):
    return apply_operator(OpKind.WIDE_AVG, values, 1.0, offset)
