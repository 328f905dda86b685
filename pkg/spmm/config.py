"""Run configuration: YAML documents -> frozen RunConfig.

A config has the sections method, grid, initial, solver and output. String
values may reference environment variables as ${VAR}. `meta.txt` written next
to a run's output is the same document plus a `meta` section, so it loads back
into an identical RunConfig.
"""

import logging
import os
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import yaml
from dotenv import load_dotenv

from .errors import ConfigError
from .exact import EXACT_KINDS
from .nonlinear_solver import SolverConfig

log = logging.getLogger(__name__)

PROJECT_ROOT = Path(__file__).resolve().parent.parent

MOVING_METHODS = ("proposed_avg", "proposed_central")
FIXED_METHODS = ("norm_preserving", "multisymplectic")
METHODS = MOVING_METHODS + FIXED_METHODS
CSV_KINDS = ("csv_curve", "csv_profile")
INITIAL_KINDS = EXACT_KINDS + CSV_KINDS

DEFAULT_OUTPUT_ROOT = "runs"
SECTIONS = ("method", "grid", "initial", "solver", "output", "seed", "meta")


def resolve_env_ref(value):
    """Resolve ${ENV_VAR} references in string config values."""
    if not isinstance(value, str):
        return value

    def replacer(match):
        var_name = match.group(1)
        env_val = os.environ.get(var_name)
        if env_val is None:
            log.warning("environment variable '%s' is not set", var_name)
            return match.group(0)
        return env_val

    return re.sub(r"\$\{([^}]+)\}", replacer, value)


def _resolve_tree(node):
    if isinstance(node, dict):
        return {k: _resolve_tree(v) for k, v in node.items()}
    if isinstance(node, list):
        return [_resolve_tree(v) for v in node]
    resolved = resolve_env_ref(node)
    if resolved is not node and isinstance(resolved, str):
        # "${DT}" -> 0.01 rather than "0.01"
        return yaml.safe_load(resolved) if resolved.strip() else resolved
    return resolved


@dataclass(frozen=True)
class InitialConfig:
    kind: str
    xi: Optional[float] = None
    S: Optional[float] = None
    v: float = 1.0
    x0: float = 0.0
    sign: int = 1
    periods: int = 1
    path: Optional[str] = None
    L: Optional[float] = None
    winding_tol: Optional[float] = None

    def __post_init__(self):
        for name in ("xi", "S", "v", "x0", "L", "winding_tol"):
            value = getattr(self, name)
            if value is None:
                continue
            try:
                object.__setattr__(self, name, float(value))
            except (TypeError, ValueError):
                raise ConfigError(f"initial.{name} must be a number, got {value!r}") from None
        if self.kind not in INITIAL_KINDS:
            raise ConfigError(
                f"initial.kind must be one of {', '.join(INITIAL_KINDS)}, got {self.kind!r}"
            )
        if self.kind in CSV_KINDS and not self.path:
            raise ConfigError(f"initial.path is required for {self.kind}")
        if self.kind not in CSV_KINDS and self.kind != "flat" and self.xi is None:
            raise ConfigError(f"initial.xi is required for {self.kind}")

    @property
    def has_exact(self):
        return self.kind in EXACT_KINDS


@dataclass(frozen=True)
class RunConfig:
    method: str
    initial: InitialConfig
    delta_t: float
    t_end: float
    K: Optional[int] = None
    N: Optional[int] = None
    output_stride: int = 10
    solver: SolverConfig = field(default_factory=SolverConfig)
    compensated: bool = False
    naive_base: bool = False
    name: Optional[str] = None
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {', '.join(METHODS)}, got {self.method!r}")
        if not self.delta_t > 0:
            raise ConfigError(f"grid.delta_t must be positive, got {self.delta_t}")
        if not self.t_end >= 0:
            raise ConfigError(f"grid.t_end must be non-negative, got {self.t_end}")
        ratio = self.t_end / self.delta_t
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ConfigError(f"grid.t_end={self.t_end} is not a multiple of delta_t={self.delta_t}")
        size = self.K if self.moving else self.N
        label = "grid.K" if self.moving else "grid.N"
        if size is None or int(size) != size or size < 3:
            raise ConfigError(f"{label} must be an integer >= 3 for method {self.method}, got {size}")
        object.__setattr__(self, "K" if self.moving else "N", int(size))
        if int(self.output_stride) != self.output_stride or self.output_stride < 1:
            raise ConfigError(f"output.stride must be a positive integer, got {self.output_stride}")
        object.__setattr__(self, "output_stride", int(self.output_stride))
        if not self.moving and self.initial.kind == "csv_curve":
            raise ConfigError("fixed-mesh methods need a single-valued profile, not csv_curve")

    @property
    def moving(self):
        return self.method in MOVING_METHODS

    @property
    def steps(self):
        return int(round(self.t_end / self.delta_t))

    @property
    def size(self):
        return self.K if self.moving else self.N

    def refined(self, level):
        """Config with about 2**level times finer spacing and 2**level smaller steps.

        Odd sizes stay odd, (K - 1) * 2**level + 1: the forward average of the
        proposed scheme and the norm-preserving baseline is singular on even
        grids.
        """
        factor = 2**level
        changes = {"delta_t": self.delta_t / factor, "output_stride": self.output_stride * factor}
        size = self.size
        size = (size - 1) * factor + 1 if size % 2 else size * factor
        changes["K" if self.moving else "N"] = size
        return _replace(self, **changes)


def _replace(cfg, **changes):
    values = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    values.update(changes)
    return type(cfg)(**values)


def _section(data, name):
    value = data.get(name) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"section '{name}' must be a mapping")
    return value


def _build(cls, values, section):
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in '{section}': {', '.join(sorted(unknown))}")
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(f"invalid '{section}' section: {exc}") from exc


def config_from_dict(data):
    if not isinstance(data, dict):
        raise ConfigError("config must be a YAML mapping")
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
    data = _resolve_tree(data)
    grid = _section(data, "grid")
    output = _section(data, "output")
    for key in ("delta_t", "t_end"):
        if key not in grid:
            raise ConfigError(f"grid.{key} is required")
    if "method" not in data:
        raise ConfigError("method is required")
    unknown = set(grid) - {"K", "N", "delta_t", "t_end"}
    if unknown:
        raise ConfigError(f"unknown key(s) in 'grid': {', '.join(sorted(unknown))}")
    unknown = set(output) - {"stride", "compensated", "naive_base", "name"}
    if unknown:
        raise ConfigError(f"unknown key(s) in 'output': {', '.join(sorted(unknown))}")
    try:
        return RunConfig(
            method=data["method"],
            initial=_build(InitialConfig, _section(data, "initial"), "initial"),
            delta_t=float(grid["delta_t"]),
            t_end=float(grid["t_end"]),
            K=grid.get("K"),
            N=grid.get("N"),
            output_stride=output.get("stride", 10),
            solver=_build(SolverConfig, _section(data, "solver"), "solver"),
            compensated=bool(output.get("compensated", False)),
            naive_base=bool(output.get("naive_base", False)),
            name=output.get("name"),
            seed=int(data.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc


def config_to_dict(cfg):
    grid = {"delta_t": cfg.delta_t, "t_end": cfg.t_end}
    if cfg.K is not None:
        grid["K"] = cfg.K
    if cfg.N is not None:
        grid["N"] = cfg.N
    initial = {k: v for k, v in asdict(cfg.initial).items() if v is not None}
    return {
        "method": cfg.method,
        "grid": grid,
        "initial": initial,
        "solver": asdict(cfg.solver),
        "output": {
            "stride": cfg.output_stride,
            "compensated": cfg.compensated,
            "naive_base": cfg.naive_base,
            "name": cfg.name,
        },
        "seed": cfg.seed,
    }


def _parse_override(item):
    key, sep, raw = item.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override must look like section.key=value, got {item!r}")
    return key.strip().split("."), yaml.safe_load(raw) if raw.strip() else None


def apply_overrides(data, overrides):
    """Apply sectioned `section.key=value` overrides to a raw config mapping."""
    data = dict(data)
    for item in overrides or ():
        path, value = _parse_override(item)
        node = data
        for part in path[:-1]:
            child = node.get(part)
            child = dict(child) if isinstance(child, dict) else {}
            node[part] = child
            node = child
        node[path[-1]] = value
    return data


def read_config_file(config_path):
    """Raw mapping from a YAML config file."""
    try:
        with open(config_path, "r") as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {config_path}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"Error parsing config {config_path}: {e}") from None
    return data or {}


def load_config(config_path, overrides=None):
    data = apply_overrides(read_config_file(config_path), overrides)
    cfg = config_from_dict(data)
    if cfg.initial.path and not os.path.isabs(cfg.initial.path):
        path = Path(config_path).resolve().parent / cfg.initial.path
        cfg = _replace(cfg, initial=_replace(cfg.initial, path=str(path)))
    return cfg


def output_root():
    """Output root from SPMM_OUT (environment or .env), default ./runs."""
    load_dotenv(PROJECT_ROOT / ".env")
    custom = os.environ.get("SPMM_OUT", "").strip()
    return Path(custom).expanduser() if custom else Path(DEFAULT_OUTPUT_ROOT)


def run_name(cfg):
    if cfg.name:
        return cfg.name
    return f"{cfg.method}_{cfg.initial.kind}_{cfg.size}_dt{cfg.delta_t:g}"
