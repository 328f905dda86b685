"""Run directory layout.

    snapshots_0000.csv   k, s, x, u, theta   (every output stride)
    invariants.csv       one InvariantRecord per level
    meta.txt             YAML: the run config plus a `meta` section
    plot.gp              gnuplot script for the snapshot profiles

Floats are written with 17 significant digits so files round-trip exactly.
Fixed-mesh snapshots leave s and theta empty.
"""

import csv
import logging
from pathlib import Path

import yaml

from .config import config_to_dict
from .diagnostics import InvariantRecord
from .errors import ConfigError

log = logging.getLogger(__name__)

SNAPSHOT_COLUMNS = ("k", "s", "x", "u", "theta")
INVARIANTS_FILE = "invariants.csv"
META_FILE = "meta.txt"
PLOT_FILE = "plot.gp"

_INT_COLUMNS = {"step", "winding", "k"}


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, int) and not isinstance(value, bool):
        return str(value)
    return format(float(value), ".17g")


def snapshot_name(index):
    return f"snapshots_{index:04d}.csv"


def write_snapshot(path, level, s_start=0.0):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(SNAPSHOT_COLUMNS)
        if level.curve is not None:
            theta = level.theta
            ds = theta.grid.delta_s
            curve = level.curve
            for k in range(curve.K + 1):
                th = theta.at(k)
                writer.writerow(
                    [k, _fmt(s_start + k * ds), _fmt(curve.x[k]), _fmt(curve.u[k]), _fmt(th)]
                )
        else:
            field = level.field
            for k in range(field.N):
                x = level.x_start + k * field.delta_x
                writer.writerow([k, "", _fmt(x), _fmt(field.u[k]), ""])


def _plot_script(snapshots, title):
    files = " ".join(snapshots)
    return f"""# gnuplot script; run: gnuplot -p {PLOT_FILE}
set datafile separator ','
set key off
set title '{title}'
set xlabel 'x'
set ylabel 'u'
files = '{files}'
# bar markers on every fourth sample point
plot for [f in files] f using 3:4 with lines lw 1, \\
     for [f in files] f using 3:4 every 4 with points pt 7 ps 0.4
"""


class RunWriter:
    """Streams one run into its directory."""

    def __init__(self, out_dir, cfg, s_start=0.0):
        self.out_dir = Path(out_dir)
        self.cfg = cfg
        self.s_start = s_start
        self.snapshots = []
        self._inv_file = None
        self._inv_writer = None

    def __enter__(self):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._inv_file = open(self.out_dir / INVARIANTS_FILE, "w", newline="")
        self._inv_writer = csv.writer(self._inv_file)
        self._inv_writer.writerow(InvariantRecord.columns())
        return self

    def __exit__(self, exc_type, exc, tb):
        self._inv_file.close()
        if self.snapshots:
            (self.out_dir / PLOT_FILE).write_text(_plot_script(self.snapshots, self.cfg.method))
        return False

    def write_meta(self, meta):
        write_meta(self.out_dir, self.cfg, meta)

    def add(self, level):
        row = level.record.as_row()
        self._inv_writer.writerow([_fmt(row[c]) for c in InvariantRecord.columns()])
        if level.step % self.cfg.output_stride == 0 or level.step == self.cfg.steps:
            name = snapshot_name(len(self.snapshots))
            write_snapshot(self.out_dir / name, level, self.s_start)
            self.snapshots.append(name)


def write_meta(out_dir, cfg, meta):
    doc = config_to_dict(cfg)
    doc["meta"] = meta
    with open(Path(out_dir) / META_FILE, "w") as f:
        yaml.safe_dump(doc, f, sort_keys=False)


def read_meta(run_dir):
    path = Path(run_dir) / META_FILE
    try:
        with open(path) as f:
            return yaml.safe_load(f) or {}
    except FileNotFoundError:
        raise ConfigError(f"{path} not found; not a run directory?") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"Error parsing {path}: {e}") from None


def _parse(name, text):
    if text == "":
        return None
    return int(text) if name in _INT_COLUMNS else float(text)


def read_invariants(run_dir):
    path = Path(run_dir) / INVARIANTS_FILE
    if not path.is_file():
        raise ConfigError(f"{path} not found; not a run directory?")
    with open(path, newline="") as f:
        return [{k: _parse(k, v) for k, v in row.items()} for row in csv.DictReader(f)]


def read_snapshot(path):
    with open(path, newline="") as f:
        return [{k: _parse(k, v) for k, v in row.items()} for row in csv.DictReader(f)]


def write_table(path, rows, columns):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])
