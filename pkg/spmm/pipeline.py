"""Run orchestration: initial data, time loop, artifacts, refinement studies.

Moving-mesh runs advance theta one level ahead of the curve: the curve at
level m is reconstructed from theta^m and theta^{m+1}, so a run to step M
solves M+1 implicit steps.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from tqdm import tqdm

from . import __version__
from .artifacts import RunWriter, read_invariants, read_meta
from .baselines import FixedMeshStepper
from .config import output_root, run_name
from .diagnostics import (
    error_vs_exact_theta,
    max_abs,
    physical_error,
    record_fixed,
    record_moving,
    relative_drift,
    theta_branch,
)
from .errors import ConfigError, GateFailure
from .exact import build_family
from .fields import CurveState, GridSpec, ThetaField, UniformField
from .hodograph import HodographTracker
from .init import (
    InitialCurve,
    fixed_mesh_from_family,
    read_profile_csv,
    theta_from_analytic,
    theta_from_curve_csv,
    theta_from_profile,
)
from .sg_dvdm import SineGordonStepper

log = logging.getLogger(__name__)

SCHEME_OF_METHOD = {
    "proposed_avg": "average",
    "proposed_central": "central",
    "norm_preserving": "norm_preserving",
    "multisymplectic": "multisymplectic",
}

# Conservation gates of the invariants report.
HAMILTONIAN_GATE = 1e-8
WINDOW_GATE = 1e-10
NORM_GATE = 1e-8
# Implicit constraint: |sum u_k (x_k - x_{k-1})| <= max(1e-9, 10 tol) S max|u|.
CONSTRAINT_GATE = 1e-9
CONSTRAINT_TOL_FACTOR = 10.0


@dataclass(frozen=True)
class InitialData:
    family: Optional[object] = None
    theta: Optional[ThetaField] = None
    field: Optional[UniformField] = None
    base_x: float = 0.0
    s_start: float = 0.0


@dataclass(frozen=True)
class Level:
    step: int
    time: float
    record: object
    curve: Optional[CurveState] = None
    theta: Optional[ThetaField] = None
    field: Optional[UniformField] = None
    x_start: float = 0.0


def family_for(cfg):
    ini = cfg.initial
    if not ini.has_exact:
        return None
    return build_family(
        ini.kind, xi=ini.xi, S=ini.S, v=ini.v, x0=ini.x0, sign=ini.sign, periods=ini.periods
    )


def prepare_initial(cfg):
    """Level-0 data for the configured method and initial kind."""
    ini = cfg.initial
    family = family_for(cfg)
    if cfg.moving:
        if family is not None:
            curve = InitialCurve.from_family(family)
            if ini.winding_tol is not None:
                curve = InitialCurve(
                    curve.sampler, curve.S, curve.s_start, curve.tangent, ini.winding_tol
                )
            grid = GridSpec.from_period(cfg.K, family.S, cfg.delta_t)
            theta = theta_from_analytic(curve, grid)
            return InitialData(family, theta, base_x=curve.origin[0], s_start=family.s_start)
        if ini.kind == "csv_curve":
            theta, x, _ = theta_from_curve_csv(ini.path, cfg.delta_t, ini.winding_tol or 1e-6)
            if theta.grid.K != cfg.K:
                log.warning("grid.K=%d ignored; %s has %d chords", cfg.K, ini.path, theta.grid.K)
            return InitialData(theta=theta, base_x=float(x[0]))
        u0, du0, L = read_profile_csv(ini.path, ini.L)
        theta, x, _ = theta_from_profile(u0, L, cfg.K, cfg.delta_t, du0)
        return InitialData(theta=theta, base_x=float(x[0]))

    if family is not None:
        field, x_start = fixed_mesh_from_family(family, cfg.N)
        return InitialData(family, field=field, base_x=x_start)
    u0, _, L = read_profile_csv(ini.path, ini.L)
    dx = L / cfg.N
    u = np.asarray(u0(dx * np.arange(cfg.N)), dtype=float)
    return InitialData(field=UniformField(u - np.mean(u), dx))


def _moving_levels(cfg, initial, bar):
    stepper = SineGordonStepper(SCHEME_OF_METHOD[cfg.method], cfg.solver)
    tracker = HodographTracker(
        initial.base_x,
        naive_base=cfg.naive_base,
        compensated=cfg.compensated,
        scheme=SCHEME_OF_METHOD[cfg.method],
    )
    curr = initial.theta
    for m in range(cfg.steps + 1):
        nxt = stepper.advance(curr)
        curve, base = tracker.reconstruct(curr, nxt)
        t = m * cfg.delta_t
        yield Level(m, t, record_moving(m, t, curr, curve, base), curve=curve, theta=curr)
        bar.update(1)
        curr = nxt
    log.info("%d implicit steps, %d Newton iterations", cfg.steps + 1, stepper.total_iterations)


def _fixed_levels(cfg, initial, bar):
    stepper = FixedMeshStepper(cfg.method, cfg.delta_t, cfg.solver)
    field = initial.field
    for m in range(cfg.steps + 1):
        t = m * cfg.delta_t
        yield Level(m, t, record_fixed(m, t, field), field=field, x_start=initial.base_x)
        bar.update(1)
        if m < cfg.steps:
            nxt = stepper.advance(field)
            if cfg.method == "norm_preserving":
                log.debug("step %d: mean flip defect %.3e", m, float(np.sum(nxt.u) + np.sum(field.u)))
            field = nxt


def simulate(cfg, initial=None, progress=False):
    """Yield one Level per time level 0..steps."""
    initial = initial or prepare_initial(cfg)
    if cfg.method in ("proposed_avg", "norm_preserving") and cfg.size % 2 == 0:
        log.warning("%s on an even grid (%d points): invariants are not guaranteed", cfg.method, cfg.size)
    with tqdm(total=cfg.steps + 1, disable=not progress, desc=cfg.method, unit="step") as bar:
        if cfg.moving:
            yield from _moving_levels(cfg, initial, bar)
        else:
            yield from _fixed_levels(cfg, initial, bar)


def _meta(cfg, initial, first):
    meta = {"version": __version__, "steps": cfg.steps}
    if cfg.moving:
        rec = first.record
        meta.update(
            winding=initial.theta.winding,
            window_length=rec.window_L,
            base_point=[rec.base_x, rec.base_u],
            delta_s=initial.theta.grid.delta_s,
            S=initial.theta.grid.S,
            s_start=initial.s_start,
        )
    else:
        meta.update(delta_x=initial.field.delta_x, L=initial.field.L, x_start=initial.base_x)
    return meta


def run(cfg, out_root=None, progress=False):
    """Simulate and write the run directory; returns its path."""
    out_dir = Path(out_root or output_root()) / run_name(cfg)
    initial = prepare_initial(cfg)
    started = time.perf_counter()
    with RunWriter(out_dir, cfg, s_start=initial.s_start) as writer:
        first = None
        for level in simulate(cfg, initial, progress):
            if first is None:
                first = level
                writer.write_meta(_meta(cfg, initial, first))
            writer.add(level)
    log.info("Run finished in %.1fs -> %s", time.perf_counter() - started, out_dir)
    return out_dir


# ─── refinement study ───────────────────────────────────────────────────────


def level_errors(cfg):
    """Errors at t_end of one refinement level against the exact family.

    The curve at level m carries u from the rate between theta^m and
    theta^{m+1}, so u is compared with the exact curve half a step later
    than x; x is compared half a cell further along s (see physical_error).
    """
    family = family_for(cfg)
    if family is None or not cfg.moving:
        raise ConfigError("convergence needs a moving-mesh method and an exact initial family")
    initial = prepare_initial(cfg)
    branch = theta_branch(initial.theta, family.theta, initial.s_start)
    last = None
    gap = 0.0
    for level in simulate(cfg, initial):
        gap = max(gap, abs(level.record.naive_gap))
        last = level
    grid = last.theta.grid
    return {
        "K": grid.K,
        "delta_t": cfg.delta_t,
        "theta_error": error_vs_exact_theta(
            last.theta, family.theta, last.time, initial.s_start, branch
        ),
        "physical_error": physical_error(
            last.curve,
            family.curve,
            last.time,
            grid.delta_s,
            initial.s_start,
            u_time=last.time + 0.5 * cfg.delta_t,
            x_shift=0.5 * grid.delta_s,
        ),
        "naive_gap": gap,
    }


def _order(coarse, fine):
    if coarse > 0 and fine > 0:
        return math.log2(coarse / fine)
    return None


def convergence(cfg, levels, jobs=1):
    """Rows (K, delta_t, errors, observed orders) over successive refinements."""
    if levels < 1:
        raise ConfigError(f"levels must be >= 1, got {levels}")
    configs = [cfg.refined(i) for i in range(levels)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(level_errors, configs))
    else:
        rows = [level_errors(c) for c in configs]
    for prev, row in zip([None] + rows[:-1], rows):
        row["theta_order"] = _order(prev["theta_error"], row["theta_error"]) if prev else None
        row["physical_order"] = _order(prev["physical_error"], row["physical_error"]) if prev else None
    return rows


# ─── invariants report ──────────────────────────────────────────────────────


def invariants_report(run_dir):
    """Drift summary of a run directory plus pass/fail of its conservation gates."""
    run_dir = Path(run_dir)
    meta = read_meta(run_dir)
    rows = read_invariants(run_dir)
    if not rows:
        raise ConfigError(f"{run_dir}: invariants.csv has no rows")
    method = meta.get("method")

    def column(name):
        return [r[name] for r in rows]

    summary = {
        "method": method,
        "levels": len(rows),
        "H_d_drift": relative_drift(column("H_d")),
        "norm_I_drift": relative_drift(column("norm_I")),
        "energy_E_drift": relative_drift(column("energy_E")),
        "constraint_max": max_abs(column("constraint_residual")),
        "naive_gap_max": max_abs(column("naive_gap")),
        "roughness_growth": _growth(column("roughness")),
    }
    gates = {}
    if method in ("proposed_avg", "proposed_central"):
        gates["H_d"] = summary["H_d_drift"] <= HAMILTONIAN_GATE
        K = (meta.get("grid") or {}).get("K") or 1
        window_defect = max(abs(r["window_L"] + r["H_d"]) for r in rows)
        scale = max(abs(r["window_L"]) for r in rows) or 1.0
        summary["window_defect"] = window_defect
        gates["window_L"] = window_defect <= WINDOW_GATE * K * scale
        ratio = _constraint_ratio(meta, rows)
        if ratio is None:
            log.warning("%s: no max_u column, constraint gate skipped", run_dir)
        else:
            summary["constraint_ratio"] = ratio
            gates["constraint"] = ratio <= 1.0
    elif method == "norm_preserving":
        gates["norm_I"] = summary["norm_I_drift"] <= NORM_GATE
    summary["gates"] = gates
    return summary


def _constraint_ratio(meta, rows):
    """Worst |constraint residual| over its allowed bound; None without a max_u column."""
    if any(r.get("max_u") is None or r.get("constraint_residual") is None for r in rows):
        return None
    tol = float((meta.get("solver") or {}).get("tol_residual", 1e-12))
    S = float((meta.get("meta") or {}).get("S", 1.0))
    per_unit = max(CONSTRAINT_GATE, CONSTRAINT_TOL_FACTOR * tol) * S
    worst = 0.0
    for r in rows:
        residual = abs(r["constraint_residual"])
        bound = per_unit * r["max_u"]
        if residual > 0.0:
            worst = max(worst, residual / bound if bound > 0.0 else math.inf)
    return worst


def check_gates(summary):
    failed = [name for name, ok in summary["gates"].items() if not ok]
    if failed:
        raise GateFailure(f"conservation gate(s) failed: {', '.join(failed)}")


def _growth(series):
    vals = [v for v in series if v is not None]
    if not vals or vals[0] == 0:
        return None
    return max(vals) / vals[0]
