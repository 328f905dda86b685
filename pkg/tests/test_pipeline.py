"""End-to-end tests for runs, run directories, refinement studies and the CLI.

Runs are kept tiny (a few steps on coarse grids); the long acceptance runs
live in test_acceptance.py.

Run: python -m unittest discover -s tests
"""

import contextlib
import io
import math
import os
import shutil
import sys
import tempfile
import unittest

import numpy as np
import yaml

_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if _ROOT not in sys.path:
    sys.path.insert(0, _ROOT)

from spmm import cli  # noqa: E402
from spmm.artifacts import (  # noqa: E402
    META_FILE,
    PLOT_FILE,
    read_invariants,
    read_meta,
    read_snapshot,
    snapshot_name,
    write_meta,
    write_table,
)
from spmm.config import config_from_dict, config_to_dict  # noqa: E402
from spmm.diagnostics import InvariantRecord  # noqa: E402
from spmm.errors import ConfigError, GateFailure  # noqa: E402
from spmm.exact import build_family  # noqa: E402
from spmm.pipeline import (  # noqa: E402
    check_gates,
    convergence,
    family_for,
    invariants_report,
    level_errors,
    prepare_initial,
    run,
    simulate,
)

CONFIG_DIR = os.path.join(_ROOT, "configs")

# ─── helpers ─────────────────────────────────────────────────────────────────


def _cfg(method="proposed_avg", size=33, t_end=0.5, kind="hump", **initial):
    grid = {"delta_t": 0.1, "t_end": t_end}
    grid["K" if method.startswith("proposed") else "N"] = size
    ini = {"kind": kind, "xi": 0.25}
    ini.update(initial)
    return config_from_dict(
        {"method": method, "grid": grid, "initial": ini, "output": {"stride": 2}}
    )


def _spacing(cfg):
    return family_for(cfg).S / cfg.K


class _TempDirCase(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.tmp, ignore_errors=True)

    def write(self, name, text):
        path = os.path.join(self.tmp, name)
        with open(path, "w") as f:
            f.write(text)
        return path

    def main(self, *argv):
        out = io.StringIO()
        with contextlib.redirect_stdout(out), self.assertRaises(SystemExit) as ctx:
            cli.main(list(argv))
        return ctx.exception.code, out.getvalue()


# ─── simulation ──────────────────────────────────────────────────────────────


class TestSimulate(unittest.TestCase):
    def test_moving_levels(self):
        levels = list(simulate(_cfg()))
        self.assertEqual([lv.step for lv in levels], list(range(6)))
        self.assertAlmostEqual(levels[-1].time, 0.5)
        H = [lv.record.H_d for lv in levels]
        self.assertLess(max(abs(h - H[0]) for h in H), 1e-10 * abs(H[0]))
        for lv in levels:
            self.assertAlmostEqual(lv.record.window_L, -lv.record.H_d, places=11)
            self.assertLess(abs(lv.curve.u[-1] - lv.curve.u[0]), 1e-9)
        xs = [lv.record.base_x for lv in levels]
        self.assertTrue(all(b <= a for a, b in zip(xs, xs[1:])))

    def test_central_scheme_keeps_constraint(self):
        for lv in simulate(_cfg(method="proposed_central", kind="upright_loop", xi=0.75)):
            scale = max(1.0, float(np.max(np.abs(lv.curve.u))))
            self.assertLess(abs(lv.record.constraint_residual), 1e-9 * scale)
            self.assertEqual(lv.record.winding, -1)

    def test_fixed_levels(self):
        levels = list(simulate(_cfg(method="norm_preserving")))
        self.assertEqual(len(levels), 6)
        norms = [lv.record.norm_I for lv in levels]
        self.assertLess(max(abs(n - norms[0]) for n in norms), 1e-10 * norms[0])
        self.assertIsNone(levels[0].record.H_d)

    def test_fixed_mesh_rejects_loops(self):
        with self.assertRaises(ConfigError):
            prepare_initial(_cfg(method="multisymplectic", kind="upright_loop", xi=0.75))


class TestPrepareInitial(_TempDirCase):
    def test_exact_family(self):
        initial = prepare_initial(_cfg(kind="breather", xi=0.38, S=70.0))
        self.assertEqual(initial.s_start, -35.0)
        self.assertEqual(initial.theta.grid.K, 33)
        self.assertAlmostEqual(initial.base_x, -35.0 + 4 * 0.38, places=8)

    def test_profile_csv(self):
        xs = 2 * math.pi * np.arange(64) / 64
        path = self.write("p.csv", "\n".join(f"{float(a)!r},{0.2 * math.sin(a)!r}" for a in xs))
        cfg = config_from_dict(
            {
                "method": "proposed_avg",
                "grid": {"K": 17, "delta_t": 0.1, "t_end": 0.2},
                "initial": {"kind": "csv_profile", "path": path},
            }
        )
        initial = prepare_initial(cfg)
        self.assertEqual(initial.theta.grid.K, 17)
        self.assertEqual(initial.theta.winding, 0)
        self.assertEqual(initial.base_x, 0.0)
        self.assertIsNone(initial.family)

    def test_profile_csv_on_fixed_mesh(self):
        xs = 2 * math.pi * np.arange(64) / 64
        path = self.write("p.csv", "\n".join(f"{float(a)!r},{0.2 * math.sin(a) + 1.0!r}" for a in xs))
        cfg = config_from_dict(
            {
                "method": "multisymplectic",
                "grid": {"N": 33, "delta_t": 0.1, "t_end": 0.2},
                "initial": {"kind": "csv_profile", "path": path},
            }
        )
        field = prepare_initial(cfg).field
        self.assertEqual(field.N, 33)
        self.assertAlmostEqual(float(np.sum(field.u)), 0.0, places=12)

    def test_curve_csv_keeps_file_size(self):
        family = build_family("upright_loop", xi=0.75)
        x, u = family.curve(0.0, family.S * np.arange(41) / 40)
        rows = "\n".join(f"{float(a)!r},{float(b)!r}" for a, b in zip(x, u))
        path = self.write("c.csv", rows)
        cfg = config_from_dict(
            {
                "method": "proposed_avg",
                "grid": {"K": 99, "delta_t": 0.1, "t_end": 0.2},
                "initial": {"kind": "csv_curve", "path": path},
            }
        )
        with self.assertLogs("spmm.pipeline", level="WARNING"):
            initial = prepare_initial(cfg)
        self.assertEqual(initial.theta.grid.K, 40)
        self.assertEqual(initial.theta.winding, -1)


# ─── run directories ─────────────────────────────────────────────────────────


class TestRunDirectory(_TempDirCase):
    def test_moving_run(self):
        cfg = _cfg()
        out = run(cfg, out_root=self.tmp)
        self.assertEqual(os.path.basename(out), "proposed_avg_hump_33_dt0.1")
        self.assertTrue((out / META_FILE).is_file())
        self.assertTrue((out / PLOT_FILE).is_file())
        rows = read_invariants(out)
        self.assertEqual([r["step"] for r in rows], list(range(6)))
        self.assertEqual(rows[0]["winding"], 0)
        for i in range(4):
            self.assertTrue((out / snapshot_name(i)).is_file())
        self.assertFalse((out / snapshot_name(4)).exists())
        snap = read_snapshot(out / snapshot_name(0))
        self.assertEqual(len(snap), 34)
        self.assertEqual(snap[0]["k"], 0)
        self.assertEqual(snap[0]["x"], rows[0]["base_x"])
        self.assertAlmostEqual(snap[1]["s"] - snap[0]["s"], _spacing(cfg), places=12)

    def test_meta_round_trip(self):
        cfg = _cfg()
        out = run(cfg, out_root=self.tmp)
        meta = read_meta(out)
        self.assertEqual(config_from_dict(meta), cfg)
        self.assertEqual(meta["meta"]["winding"], 0)
        self.assertEqual(meta["meta"]["steps"], 5)

    def test_fixed_run_leaves_s_and_theta_empty(self):
        out = run(_cfg(method="norm_preserving"), out_root=self.tmp)
        snap = read_snapshot(out / snapshot_name(0))
        self.assertEqual(len(snap), 33)
        self.assertIsNone(snap[0]["s"])
        self.assertIsNone(snap[0]["theta"])

    def test_invariants_report(self):
        out = run(_cfg(), out_root=self.tmp)
        summary = invariants_report(out)
        self.assertEqual(summary["method"], "proposed_avg")
        self.assertEqual(summary["levels"], 6)
        self.assertEqual(set(summary["gates"]), {"H_d", "window_L", "constraint"})
        self.assertTrue(all(summary["gates"].values()))
        self.assertLess(summary["constraint_ratio"], 1.0)
        check_gates(summary)

    def test_naive_base_fails_constraint_gate(self):
        cfg = config_from_dict({**config_to_dict(_cfg()), "output": {"stride": 2, "naive_base": True}})
        summary = invariants_report(run(cfg, out_root=self.tmp))
        self.assertTrue(summary["gates"]["H_d"])
        self.assertFalse(summary["gates"]["constraint"])
        with self.assertRaises(GateFailure) as ctx:
            check_gates(summary)
        self.assertIn("constraint", str(ctx.exception))

    def test_constraint_gate_scales_with_solver_tolerance(self):
        out = run(_cfg(), out_root=self.tmp)
        rows = read_invariants(out)
        meta = read_meta(out)
        S = meta["meta"]["S"]
        rows[2]["constraint_residual"] = 5e-9 * S * rows[2]["max_u"]
        write_table(out / "invariants.csv", rows, InvariantRecord.columns())
        self.assertFalse(invariants_report(out)["gates"]["constraint"])
        meta["solver"]["tol_residual"] = 1e-9
        with open(out / META_FILE, "w") as f:
            yaml.safe_dump(meta, f, sort_keys=False)
        self.assertTrue(invariants_report(out)["gates"]["constraint"])

    def test_failed_gate(self):
        with self.assertRaises(GateFailure):
            check_gates({"gates": {"H_d": True, "norm_I": False}})

    def test_not_a_run_directory(self):
        with self.assertRaises(ConfigError):
            invariants_report(self.tmp)


# ─── refinement ──────────────────────────────────────────────────────────────


class TestConvergence(unittest.TestCase):
    def test_errors_shrink(self):
        rows = convergence(_cfg(size=17), 2)
        self.assertEqual([r["K"] for r in rows], [17, 33])
        self.assertIsNone(rows[0]["theta_order"])
        self.assertLess(rows[1]["theta_error"], rows[0]["theta_error"])
        self.assertLess(rows[1]["physical_error"], rows[0]["physical_error"])
        self.assertGreater(rows[1]["physical_order"], 0.5)

    def test_needs_exact_moving_run(self):
        with self.assertRaises(ConfigError):
            level_errors(_cfg(method="norm_preserving"))
        with self.assertRaises(ConfigError):
            convergence(_cfg(), 0)


# ─── command line ────────────────────────────────────────────────────────────


class TestCli(_TempDirCase):
    def test_run(self):
        code, out = self.main(
            "run", os.path.join(CONFIG_DIR, "hump.yaml"),
            "--out", self.tmp, "--set", "grid.K=17", "--set", "grid.t_end=0.3",
        )
        self.assertEqual(code, cli.EXIT_OK)
        self.assertIn("Run written to", out)
        self.assertIn("gate H_d", out)

    def test_convergence_writes_table(self):
        code, out = self.main(
            "convergence", os.path.join(CONFIG_DIR, "hump.yaml"), "--levels", "2",
            "--out", self.tmp, "--set", "grid.K=17", "--set", "grid.t_end=0.2",
        )
        self.assertEqual(code, cli.EXIT_OK)
        table = os.path.join(self.tmp, "proposed_avg_hump_17_dt0.1_convergence", "convergence.csv")
        self.assertTrue(os.path.isfile(table))
        self.assertIn("theta_order", out)

    def test_config_error_exit_code(self):
        code, _ = self.main("run", os.path.join(self.tmp, "missing.yaml"))
        self.assertEqual(code, cli.EXIT_CONFIG)
        code, _ = self.main("invariants", self.tmp)
        self.assertEqual(code, cli.EXIT_CONFIG)

    def test_solver_failure_exit_code(self):
        code, _ = self.main(
            "run", os.path.join(CONFIG_DIR, "hump.yaml"), "--out", self.tmp,
            "--set", "grid.K=17", "--set", "solver.max_iter=1", "--set", "solver.tol_residual=1e-15",
        )
        self.assertEqual(code, cli.EXIT_SOLVER)

    def test_gate_failure_exit_code(self):
        cfg = _cfg()
        write_meta(self.tmp, cfg, {"steps": 1})
        rows = [
            {"step": 0, "time": 0.0, "H_d": -9.0, "window_L": 9.0},
            {"step": 1, "time": 0.1, "H_d": -8.0, "window_L": 8.0},
        ]
        write_table(os.path.join(self.tmp, "invariants.csv"), rows, InvariantRecord.columns())
        code, out = self.main("invariants", self.tmp)
        self.assertEqual(code, cli.EXIT_GATE)
        self.assertIn("FAIL", out)

    def test_exit_code_mapping(self):
        self.assertEqual(cli.exit_code_for(GateFailure("x")), cli.EXIT_GATE)
        self.assertEqual(cli.exit_code_for(RuntimeError("x")), cli.EXIT_ERROR)


if __name__ == "__main__":
    unittest.main()
