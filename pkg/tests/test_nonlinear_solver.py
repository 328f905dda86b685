"""Tests for the Newton driver and the cyclic banded solves in spmm.nonlinear_solver.

Run: python -m unittest discover -s tests
"""

import math
import os
import sys
import unittest

import numpy as np

_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if _ROOT not in sys.path:
    sys.path.insert(0, _ROOT)

from spmm.errors import ConfigError, NewtonDivergence, SingularJacobian  # noqa: E402
from spmm.nonlinear_solver import (  # noqa: E402
    DENSE_LIMIT,
    CyclicBandedMatrix,
    SolverConfig,
    fd_jacobian,
    solve,
    solve_cyclic_banded,
)

# ─── helpers ─────────────────────────────────────────────────────────────────


def _random_bands(K, offsets=(-1, 0, 1, 2), seed=0):
    rng = np.random.default_rng(seed)
    bands = {off: rng.uniform(-1.0, 1.0, K) for off in offsets}
    bands[0] = bands[0] + 6.0
    return bands


def _skew_banded(K):
    # the sine-Gordon Jacobian shape: skew difference plus a diagonal
    coef = 40.0
    rng = np.random.default_rng(3)
    return CyclicBandedMatrix({-1: np.full(K, -coef), 0: rng.uniform(0.2, 0.8, K), 1: np.full(K, coef)})


# ─── configuration ───────────────────────────────────────────────────────────


class TestSolverConfig(unittest.TestCase):
    def test_defaults(self):
        cfg = SolverConfig()
        self.assertEqual(cfg.tol_residual, 1e-12)
        self.assertEqual(cfg.max_iter, 50)
        self.assertEqual(cfg.jacobian_mode, "analytic")
        self.assertEqual(cfg.damping, "backtracking")

    def test_string_floats_from_yaml(self):
        cfg = SolverConfig(tol_residual="1e-10", fd_epsilon="1e-6")
        self.assertEqual(cfg.tol_residual, 1e-10)
        self.assertEqual(cfg.fd_epsilon, 1e-6)

    def test_invalid_values(self):
        for kwargs in (
            {"tol_residual": 0.0},
            {"tol_residual": "tight"},
            {"max_iter": 0},
            {"max_iter": 2.5},
            {"jacobian_mode": "broyden"},
            {"fd_epsilon": -1.0},
            {"damping": "linesearch"},
        ):
            with self.assertRaises(ConfigError, msg=str(kwargs)):
                SolverConfig(**kwargs)


# ─── cyclic banded matrices ──────────────────────────────────────────────────


class TestCyclicBandedMatrix(unittest.TestCase):
    def test_dense_layout(self):
        A = CyclicBandedMatrix({-1: [1.0, 2.0, 3.0], 1: [4.0, 5.0, 6.0]}).to_dense()
        expected = np.array([[0.0, 4.0, 1.0], [2.0, 0.0, 5.0], [6.0, 3.0, 0.0]])
        np.testing.assert_array_equal(A, expected)

    def test_matvec_and_sparse_agree_with_dense(self):
        M = CyclicBandedMatrix(_random_bands(9))
        x = np.arange(9.0)
        np.testing.assert_allclose(M.matvec(x), M.to_dense() @ x, atol=1e-13)
        np.testing.assert_allclose(M.to_sparse().toarray(), M.to_dense(), atol=0)

    def test_bands_must_match(self):
        with self.assertRaises(ValueError):
            CyclicBandedMatrix({0: [1.0, 2.0], 1: [1.0]})
        with self.assertRaises(ValueError):
            CyclicBandedMatrix({})


class TestSolveCyclicBanded(unittest.TestCase):
    def test_small_system_uses_dense_solve(self):
        M = CyclicBandedMatrix(_random_bands(12))
        rhs = np.linspace(-1, 1, 12)
        np.testing.assert_allclose(solve_cyclic_banded(M, rhs), np.linalg.solve(M.to_dense(), rhs), atol=1e-13)

    def test_large_system_with_corners(self):
        K = 4 * DENSE_LIMIT + 1
        M = CyclicBandedMatrix(_random_bands(K, seed=11))
        rhs = np.sin(np.arange(K))
        x = M.solve(rhs)
        np.testing.assert_allclose(M.matvec(x), rhs, atol=1e-12)
        np.testing.assert_allclose(x, np.linalg.solve(M.to_dense(), rhs), atol=1e-12)

    def test_skew_dominant_system(self):
        K = 511
        M = _skew_banded(K)
        rhs = np.cos(np.arange(K) / 7.0)
        x = M.solve(rhs)
        np.testing.assert_allclose(M.matvec(x), rhs, atol=1e-9)

    def test_singular_system(self):
        for K in (10, 3 * DENSE_LIMIT):
            M = CyclicBandedMatrix({0: np.ones(K), 1: -np.ones(K)})
            with self.assertRaises(SingularJacobian, msg=f"K={K}"):
                solve_cyclic_banded(M, np.arange(K, dtype=float))


# ─── Newton ──────────────────────────────────────────────────────────────────


class TestNewton(unittest.TestCase):
    def test_square_root(self):
        result = solve(lambda z: z**2 - 2.0, lambda z: np.array([[2.0 * z[0]]]), [1.0])
        self.assertAlmostEqual(float(result.solution[0]), math.sqrt(2.0), places=14)
        self.assertLessEqual(result.residual, 1e-12)
        self.assertEqual(len(result.history), result.iterations + 1)
        self.assertTrue(all(b < a for a, b in zip(result.history, result.history[1:])))

    def test_converged_guess_takes_no_iterations(self):
        result = solve(lambda z: z - 1.0, None, [1.0])
        self.assertEqual(result.iterations, 0)

    def test_finite_difference_mode(self):
        cfg = SolverConfig(jacobian_mode="finite_difference")

        def residual(z):
            return np.array([z[0] ** 2 + z[1] ** 2 - 4.0, z[0] - z[1]])

        result = solve(residual, None, [1.0, 0.5], cfg)
        np.testing.assert_allclose(result.solution, [math.sqrt(2.0), math.sqrt(2.0)], atol=1e-12)

    def test_backtracking_rescues_arctan(self):
        result = solve(np.arctan, lambda z: np.diag(1.0 / (1.0 + z**2)), [3.0])
        self.assertAlmostEqual(float(result.solution[0]), 0.0, places=12)

    def test_undamped_arctan_diverges(self):
        cfg = SolverConfig(damping="none", max_iter=5)
        with np.errstate(all="ignore"):
            with self.assertRaises(NewtonDivergence) as ctx:
                solve(np.arctan, lambda z: np.diag(1.0 / (1.0 + z**2)), [3.0], cfg)
        self.assertEqual(len(ctx.exception.history), 6)

    def test_iteration_limit(self):
        cfg = SolverConfig(max_iter=2)
        with self.assertRaises(NewtonDivergence) as ctx:
            solve(lambda z: z**3 - 8.0, lambda z: np.array([[3.0 * z[0] ** 2]]), [50.0], cfg)
        self.assertEqual(ctx.exception.iterations, 2)
        self.assertEqual(len(ctx.exception.history), 3)

    def test_nonfinite_start(self):
        with np.errstate(invalid="ignore"), self.assertRaises(NewtonDivergence):
            solve(lambda z: np.log(z), lambda z: np.diag(1.0 / z), [-1.0])

    def test_floor_relaxes_tolerance(self):
        result = solve(lambda z: z - 1.0 + 1e-9, lambda z: np.eye(1), [1.0], floor=1e-8)
        self.assertEqual(result.iterations, 0)

    def test_banded_jacobian(self):
        K = 101
        M = _skew_banded(K)
        rhs = np.sin(np.arange(K))
        result = solve(lambda z: M.matvec(z) - rhs, lambda z: M, np.zeros(K))
        self.assertLessEqual(result.iterations, 2)
        np.testing.assert_allclose(M.matvec(result.solution), rhs, atol=1e-11)

    def test_fd_jacobian(self):
        def residual(z):
            return np.array([np.sin(z[0]) * z[1], z[0] ** 3])

        z = np.array([0.4, 1.5])
        J = fd_jacobian(residual, z, residual(z), 1e-7)
        exact = np.array([[np.cos(0.4) * 1.5, np.sin(0.4)], [3 * 0.4**2, 0.0]])
        np.testing.assert_allclose(J, exact, atol=1e-6)


if __name__ == "__main__":
    unittest.main()
