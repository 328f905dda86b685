"""Error types raised across the solver suite.

Every error carries the offending values in its message so a failed run can be
diagnosed from the CLI output alone. The CLI maps the families below to exit
codes (see cli.EXIT_CODES).
"""


class SpmmError(Exception):
    """Base class for all solver-suite errors."""


class ConfigError(SpmmError):
    """Invalid or incompatible run configuration."""


class CoincidentPoints(SpmmError):
    def __init__(self, index):
        super().__init__(f"Chord {index} has zero length (coincident sample points)")
        self.index = index


class AmbiguousBranch(SpmmError):
    def __init__(self, index, jump):
        super().__init__(
            f"Angle jump {jump:.6g} at chord {index} is too close to pi; "
            "grid too coarse for branch tracking"
        )
        self.index = index
        self.jump = jump


class NonClosingCurve(SpmmError):
    def __init__(self, mismatch, tol):
        super().__init__(
            f"Winding mismatch {mismatch:.3e} exceeds tolerance {tol:.1e}; "
            "the sampled curve does not close over one period"
        )
        self.mismatch = mismatch
        self.tol = tol


class NewtonDivergence(SpmmError):
    def __init__(self, iterations, residual, history, step=None):
        where = "" if step is None else f" at step {step}"
        super().__init__(
            f"Newton iteration did not converge{where} after {iterations} "
            f"iterations (final residual {residual:.3e})"
        )
        self.iterations = iterations
        self.residual = residual
        self.history = list(history)
        self.step = step


class SingularJacobian(SpmmError):
    def __init__(self, condition, step=None):
        where = "" if step is None else f" at step {step}"
        super().__init__(f"Singular Jacobian{where} (condition estimate {condition:.3e})")
        self.condition = condition
        self.step = step


class ZeroWindow(SpmmError):
    def __init__(self, window):
        super().__init__(
            f"Window length {window:.3e} is numerically zero; base point u0 is undefined"
        )
        self.window = window


class NonZeroMean(SpmmError):
    def __init__(self, total, bound):
        super().__init__(f"Sequence sum {total:.3e} exceeds zero-mean bound {bound:.3e}")
        self.total = total
        self.bound = bound


class EllipticDomainError(SpmmError, ValueError):
    """Elliptic parameter outside the supported range."""


class QuadratureError(SpmmError):
    """Adaptive quadrature or root finding failed to converge."""


class GateFailure(SpmmError):
    """A conservation gate in the invariants report failed."""
