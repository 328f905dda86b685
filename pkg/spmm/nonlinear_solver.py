"""Damped Newton iteration for the implicit steps, plus cyclic banded solves.

Every implicit scheme in the package has a Jacobian that is banded up to the
periodic wrap-around, so the linear algebra goes through CyclicBandedMatrix:
a banded LU from scipy.linalg.solve_banded with a Woodbury correction for the
corner entries. The corrected solution is verified against the full matrix;
a sparse LU is the fallback when the correction loses accuracy.
"""

import logging
import warnings
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import ConfigError, NewtonDivergence, SingularJacobian

log = logging.getLogger(__name__)

JACOBIAN_MODES = ("analytic", "finite_difference")
DAMPING_MODES = ("none", "backtracking")

# Below this size the cyclic system is solved densely.
DENSE_LIMIT = 64

# Accepted relative residual of a structured linear solve before falling back.
_LINEAR_CHECK = 1e-10


@dataclass(frozen=True)
class SolverConfig:
    tol_residual: float = 1e-12
    max_iter: int = 50
    jacobian_mode: str = "analytic"
    fd_epsilon: float = 1e-7
    damping: str = "backtracking"
    max_halvings: int = 8

    def __post_init__(self):
        # YAML 1.1 reads "1e-12" as a string
        for name in ("tol_residual", "fd_epsilon"):
            try:
                object.__setattr__(self, name, float(getattr(self, name)))
            except (TypeError, ValueError):
                raise ConfigError(f"solver.{name} must be a number, got {getattr(self, name)!r}") from None
        if not self.tol_residual > 0:
            raise ConfigError(f"solver.tol_residual must be positive, got {self.tol_residual}")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigError(f"solver.max_iter must be an integer >= 1, got {self.max_iter}")
        if self.jacobian_mode not in JACOBIAN_MODES:
            raise ConfigError(f"solver.jacobian_mode must be one of {JACOBIAN_MODES}, got {self.jacobian_mode!r}")
        if not self.fd_epsilon > 0:
            raise ConfigError(f"solver.fd_epsilon must be positive, got {self.fd_epsilon}")
        if self.damping not in DAMPING_MODES:
            raise ConfigError(f"solver.damping must be one of {DAMPING_MODES}, got {self.damping!r}")
        object.__setattr__(self, "max_iter", int(self.max_iter))


@dataclass(frozen=True)
class SolveResult:
    solution: np.ndarray
    iterations: int
    residual: float
    history: Tuple[float, ...] = field(default_factory=tuple)


class CyclicBandedMatrix:
    """K x K matrix with A[k, (k + off) % K] = bands[off][k].

    Offsets are small integers (|off| <= 2 in this package). Entries whose
    column wraps around the matrix edge form the corner block.
    """

    def __init__(self, bands):
        if not bands:
            raise ValueError("at least one band is required")
        self.bands = {int(off): np.asarray(vals, dtype=float) for off, vals in bands.items()}
        sizes = {vals.size for vals in self.bands.values()}
        if len(sizes) != 1:
            raise ValueError("all bands must have the same length")
        self.size = sizes.pop()

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(self.size)
        for off, vals in self.bands.items():
            out += vals * np.roll(x, -off)
        return out

    def _entries(self):
        K = self.size
        rows = np.arange(K)
        for off, vals in self.bands.items():
            yield rows, (rows + off) % K, vals

    def to_dense(self):
        A = np.zeros((self.size, self.size))
        for rows, cols, vals in self._entries():
            np.add.at(A, (rows, cols), vals)
        return A

    def to_sparse(self):
        rows, cols, vals = zip(*self._entries())
        K = self.size
        return scipy.sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(K, K)
        ).tocsc()

    def condition_estimate(self):
        if self.size <= 2000:
            return float(np.linalg.cond(self.to_dense()))
        return float("inf")

    def solve(self, rhs):
        return solve_cyclic_banded(self, rhs)


def _split_corners(matrix):
    """Banded storage of the non-wrapping part and the corner entries."""
    K = matrix.size
    lower = max(0, -min(matrix.bands))
    upper = max(0, max(matrix.bands))
    ab = np.zeros((lower + upper + 1, K))
    corner_rows, corner_cols, corner_vals = [], [], []
    rows = np.arange(K)
    for off, vals in matrix.bands.items():
        cols = rows + off
        inside = (cols >= 0) & (cols < K)
        ab[upper - off, cols[inside]] += vals[inside]
        wrapped = ~inside
        corner_rows.extend(rows[wrapped])
        corner_cols.extend(cols[wrapped] % K)
        corner_vals.extend(vals[wrapped])
    return (lower, upper), ab, corner_rows, corner_cols, corner_vals


def _woodbury(matrix, rhs):
    K = matrix.size
    widths, ab, c_rows, c_cols, c_vals = _split_corners(matrix)
    if not c_rows:
        return scipy.linalg.solve_banded(widths, ab, rhs, check_finite=False)
    # A = B + P C with P selecting the corner rows, C the dense corner rows
    rows = sorted(set(c_rows))
    position = {r: i for i, r in enumerate(rows)}
    C = np.zeros((len(rows), K))
    for r, c, v in zip(c_rows, c_cols, c_vals):
        C[position[r], c] += v
    P = np.zeros((K, len(rows)))
    P[rows, np.arange(len(rows))] = 1.0
    Y = scipy.linalg.solve_banded(widths, ab, np.column_stack([rhs, P]), check_finite=False)
    y, Z = Y[:, 0], Y[:, 1:]
    capacitance = np.eye(len(rows)) + C @ Z
    return y - Z @ scipy.linalg.solve(capacitance, C @ y, check_finite=False)


def _accurate(matrix, x, rhs):
    if not np.all(np.isfinite(x)):
        return False
    scale = sum(np.max(np.abs(v)) for v in matrix.bands.values()) * np.max(np.abs(x)) + np.max(np.abs(rhs))
    return np.max(np.abs(matrix.matvec(x) - rhs)) <= _LINEAR_CHECK * max(scale, np.finfo(float).tiny)


def solve_cyclic_banded(matrix, rhs):
    """Solve A x = rhs for a CyclicBandedMatrix A."""
    rhs = np.asarray(rhs, dtype=float)
    if matrix.size <= DENSE_LIMIT:
        return _dense_solve(matrix.to_dense(), rhs)
    x = None
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            x = _woodbury(matrix, rhs)
    except (np.linalg.LinAlgError, ValueError):
        x = None
    if x is not None and _accurate(matrix, x, rhs):
        return x
    log.debug("Banded solve inaccurate for K=%d, falling back to sparse LU", matrix.size)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.sparse.linalg.MatrixRankWarning)
        try:
            x = scipy.sparse.linalg.spsolve(matrix.to_sparse(), rhs)
        except RuntimeError:
            x = None
    if x is None or not _accurate(matrix, x, rhs):
        raise SingularJacobian(matrix.condition_estimate())
    return x


def _dense_solve(A, rhs):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            x = scipy.linalg.solve(A, rhs)
    except (np.linalg.LinAlgError, ValueError):
        raise SingularJacobian(float(np.linalg.cond(A))) from None
    if not np.all(np.isfinite(x)):
        raise SingularJacobian(float(np.linalg.cond(A)))
    return x


def _linear_solve(J, rhs):
    if isinstance(J, CyclicBandedMatrix):
        return solve_cyclic_banded(J, rhs)
    return _dense_solve(np.atleast_2d(np.asarray(J, dtype=float)), rhs)


def fd_jacobian(residual, z, r0, epsilon):
    """Forward-difference Jacobian, column j perturbed by epsilon * (1 + |z_j|)."""
    n = z.size
    J = np.empty((r0.size, n))
    for j in range(n):
        h = epsilon * (1.0 + abs(z[j]))
        zp = z.copy()
        zp[j] += h
        J[:, j] = (residual(zp) - r0) / h
    return J


def _sup(r):
    return float(np.max(np.abs(r))) if r.size else 0.0


def solve(residual, jacobian, guess, cfg=None, floor=0.0):
    """Newton iteration until sup|residual| <= max(cfg.tol_residual, floor).

    `jacobian(z)` returns a dense array or a CyclicBandedMatrix; it is ignored
    in finite-difference mode. `floor` is the attainable rounding level of the
    residual, supplied by callers whose residual scales like 1/(h*dt).
    """
    cfg = cfg or SolverConfig()
    tol = max(cfg.tol_residual, floor)
    z = np.array(guess, dtype=float, ndmin=1)
    r = np.atleast_1d(residual(z))
    norm = _sup(r)
    history = [norm]
    if not np.isfinite(norm):
        raise NewtonDivergence(0, norm, history)

    iterations = 0
    while norm > tol:
        if iterations >= cfg.max_iter:
            raise NewtonDivergence(iterations, norm, history)
        if cfg.jacobian_mode == "analytic" and jacobian is not None:
            J = jacobian(z)
        else:
            J = fd_jacobian(residual, z, r, cfg.fd_epsilon)
        dz = _linear_solve(J, -r)

        lam = 1.0
        z_new = z + dz
        r_new = np.atleast_1d(residual(z_new))
        new_norm = _sup(r_new)
        if cfg.damping == "backtracking":
            halvings = 0
            while not (np.isfinite(new_norm) and new_norm < norm) and halvings < cfg.max_halvings:
                lam *= 0.5
                halvings += 1
                z_new = z + lam * dz
                r_new = np.atleast_1d(residual(z_new))
                new_norm = _sup(r_new)
        if not np.isfinite(new_norm):
            raise NewtonDivergence(iterations + 1, new_norm, history + [new_norm])

        z, r, norm = z_new, r_new, new_norm
        iterations += 1
        history.append(norm)
        log.debug("newton it=%d residual=%.3e step=%.3g", iterations, norm, lam)

    return SolveResult(z, iterations, norm, tuple(history))
