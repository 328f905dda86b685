"""Tests for the discrete hodograph transformation in spmm.hodograph.

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

from spmm.diagnostics import implicit_constraint_residual  # noqa: E402
from spmm.errors import ZeroWindow  # noqa: E402
from spmm.exact import build_family  # noqa: E402
from spmm.fields import GridSpec, ThetaField  # noqa: E402
from spmm.hodograph import (  # noqa: E402
    BasePoint,
    HodographTracker,
    advance_base_x,
    base_u,
    naive_gap,
    reconstruct_curve,
    reconstruct_curve_naive,
)
from spmm.init import InitialCurve, theta_from_analytic, theta_from_samples  # noqa: E402
from spmm.sg_dvdm import dvd_values, hamiltonian_d, solve_step  # noqa: E402

# ─── helpers ─────────────────────────────────────────────────────────────────


def _theta(K=33, winding=0, delta_s=0.2, delta_tau=0.05):
    grid = GridSpec(K=K, delta_s=delta_s, delta_tau=delta_tau)
    k = np.arange(1, K + 1)
    values = 0.4 * np.sin(2 * math.pi * k / K) + 0.1 * np.cos(6 * math.pi * k / K)
    return ThetaField(values + 2 * math.pi * winding * k / K, winding, grid)


def _hump_start():
    family = build_family("hump", xi=0.25)
    grid = GridSpec.from_period(65, family.S, 0.1)
    return family, theta_from_analytic(InitialCurve.from_family(family), grid)


# ─── base point ──────────────────────────────────────────────────────────────


class TestBaseU(unittest.TestCase):
    def test_stationary_levels(self):
        theta = _theta()
        self.assertEqual(base_u(theta, theta), 0.0)

    def test_uniform_shift_cancels(self):
        theta = _theta(winding=1)
        shifted = theta.with_values(theta.theta + 0.03, 1)
        for scheme in ("average", "central"):
            self.assertAlmostEqual(base_u(theta, shifted, scheme=scheme), 0.0, places=12)
        self.assertAlmostEqual(base_u(theta, shifted, naive=True), 0.03 / 0.05, places=12)

    def test_zero_window(self):
        K = 8
        grid = GridSpec(K=K, delta_s=1.0, delta_tau=0.1)
        # chords pointing straight up and down
        theta = ThetaField(np.where(np.arange(K) < K // 2, math.pi / 2, -math.pi / 2), 0, grid)
        with self.assertRaises(ZeroWindow):
            base_u(theta, theta.with_values(theta.theta + 0.01, 1))

    def test_unknown_scheme(self):
        theta = _theta()
        with self.assertRaises(ValueError):
            base_u(theta, theta, scheme="upwind")

    def test_hump_base_point_near_exact(self):
        family, theta = _hump_start()
        nxt, _ = solve_step(theta, "average")
        _, u_exact = family.curve(0.0, np.array([0.0]))
        self.assertAlmostEqual(base_u(theta, nxt), float(u_exact[0]), delta=0.05)
        self.assertAlmostEqual(float(u_exact[0]), math.sqrt(2.0), places=12)

    def test_advance_base_x(self):
        self.assertEqual(advance_base_x(BasePoint(2.0, 0.0), 0.1), 2.0)
        self.assertAlmostEqual(advance_base_x(BasePoint(0.0, math.sqrt(2.0)), 0.1), -0.1, places=15)
        with self.assertRaises(ValueError):
            advance_base_x(BasePoint(0.0), 0.1)


# ─── reconstruction ──────────────────────────────────────────────────────────


class TestReconstructCurve(unittest.TestCase):
    def test_straight_line(self):
        grid = GridSpec(K=6, delta_s=0.5, delta_tau=0.1)
        flat = ThetaField(np.zeros(6), 0, grid)
        curve = reconstruct_curve(flat, flat, BasePoint(0.0, 0.0))
        np.testing.assert_allclose(curve.x, 0.5 * np.arange(7))
        np.testing.assert_array_equal(curve.u, np.zeros(7))
        naive = reconstruct_curve_naive(flat, BasePoint(0.0, 0.0))
        np.testing.assert_array_equal(naive.u, np.zeros(7))

    def test_matches_cumulative_sums(self):
        theta = _theta(K=5, delta_s=0.4, delta_tau=0.1)
        nxt, _ = solve_step(theta, "average")
        curve = reconstruct_curve(theta, nxt, BasePoint(1.0, -0.5))
        a = dvd_values(np.array(nxt.theta), np.array(theta.theta))
        x, u = [1.0], [-0.5]
        for k in range(5):
            x.append(x[-1] + math.cos(theta.theta[k]) * 0.4)
            u.append(u[-1] + 0.5 * (a[k] + a[k - 1]) * 0.4)
        np.testing.assert_allclose(curve.x, x, atol=1e-14)
        np.testing.assert_allclose(curve.u, u, atol=1e-14)

    def test_periodic_closure_and_window(self):
        for scheme in ("average", "central"):
            for winding in (0, 1):
                theta = _theta(winding=winding)
                nxt, _ = solve_step(theta, scheme)
                curve = reconstruct_curve(theta, nxt, BasePoint(0.0, 0.3))
                self.assertLess(abs(curve.u[-1] - curve.u[0]), 1e-9, msg=f"{scheme} n={winding}")
                self.assertAlmostEqual(curve.window, -hamiltonian_d(theta), places=12)

    def test_constraint_with_computed_base(self):
        for scheme in ("average", "central"):
            theta = _theta(winding=-1)
            nxt, _ = solve_step(theta, scheme)
            curve = reconstruct_curve(theta, nxt, BasePoint(0.0), scheme=scheme)
            scale = theta.grid.S * max(1.0, float(np.max(np.abs(curve.u))))
            self.assertLess(abs(implicit_constraint_residual(curve)), 1e-9 * scale, msg=scheme)

    def test_naive_base_breaks_constraint(self):
        _, theta = _hump_start()
        nxt, _ = solve_step(theta, "average")
        good = reconstruct_curve(theta, nxt, BasePoint(0.0, base_u(theta, nxt)))
        bad = reconstruct_curve(theta, nxt, BasePoint(0.0, base_u(theta, nxt, naive=True)))
        r_good = abs(implicit_constraint_residual(good))
        r_bad = abs(implicit_constraint_residual(bad))
        self.assertGreater(r_bad, 100 * max(r_good, 1e-13))

    def test_compensated_sum_agrees(self):
        theta = _theta(K=129)
        nxt, _ = solve_step(theta, "average")
        plain = reconstruct_curve(theta, nxt, BasePoint(0.0, 0.1))
        kahan = reconstruct_curve(theta, nxt, BasePoint(0.0, 0.1), compensated=True)
        np.testing.assert_allclose(kahan.x, plain.x, atol=1e-13)
        np.testing.assert_allclose(kahan.u, plain.u, atol=1e-13)

    def test_naive_reconstruction_needs_base_u(self):
        with self.assertRaises(ValueError):
            reconstruct_curve_naive(_theta(), BasePoint(0.0))


class TestNaiveReconstruction(unittest.TestCase):
    def test_round_trip_through_chord_angles(self):
        K = 16
        grid = GridSpec(K=K, delta_s=0.3, delta_tau=0.1)
        values = 0.3 * np.sin(2 * math.pi * np.arange(1, K + 1) / K)
        theta = ThetaField(values, 0, grid)
        curve = reconstruct_curve_naive(theta, BasePoint(0.0, 0.0))
        back, winding = theta_from_samples(curve.x, curve.u, delta_tau=0.1)
        self.assertEqual(winding, 0)
        np.testing.assert_allclose(back.theta, values, atol=1e-12)
        self.assertAlmostEqual(back.grid.delta_s, 0.3, places=12)

    def test_gap_is_exposed(self):
        _, theta = _hump_start()
        nxt, _ = solve_step(theta, "average")
        naive = reconstruct_curve_naive(nxt, BasePoint(0.0, 0.0))
        gap = naive.u[-1] - naive.u[0]
        self.assertAlmostEqual(gap, naive_gap(nxt), places=13)


# ─── tracker ─────────────────────────────────────────────────────────────────


class TestHodographTracker(unittest.TestCase):
    def test_base_point_moves_left(self):
        theta = _theta()
        tracker = HodographTracker(5.0)
        xs = []
        for _ in range(4):
            nxt, _ = solve_step(theta, "average")
            _, base = tracker.reconstruct(theta, nxt)
            xs.append(base.x0)
            theta = nxt
        self.assertEqual(xs[0], 5.0)
        self.assertTrue(all(b <= a for a, b in zip(xs, xs[1:])))
        self.assertEqual(tracker.time_index, 4)

    def test_x0_advances_with_level_m_base_u(self):
        theta = _theta()
        nxt, _ = solve_step(theta, "average")
        tracker = HodographTracker(0.0)
        _, base = tracker.reconstruct(theta, nxt)
        self.assertAlmostEqual(tracker.x0, -0.5 * 0.05 * base.u0**2, places=15)

    def test_rejects_skipped_level(self):
        theta = _theta()
        nxt, _ = solve_step(theta, "average")
        tracker = HodographTracker(0.0)
        tracker.reconstruct(theta, nxt)
        with self.assertRaises(ValueError):
            tracker.reconstruct(theta, nxt)


if __name__ == "__main__":
    unittest.main()
