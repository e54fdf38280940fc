"""Branch table, run summary and per-point snapshots.

Floats are written with ``%.17g`` so every value round-trips exactly, and
nothing but the ``timestamp`` field of summary.json depends on wall-clock
time, so identical configurations give byte-identical CSV files.
"""

import csv
import datetime
import json
import math
import os

import numpy as np

from . import __version__, gravity
from .errors import OutputError
from .gravity import AxisymmetricField, Grid

BRANCH_COLUMNS = ("idx", "kappa", "kappa_sq", "offset", "mode", "mass", "mass_error", "sup_rho",
                  "r_eq", "r_pole", "r_max_support", "weighted_norm_s", "o_n_margin",
                  "residual_inf", "scf_iters", "status")
SNAPSHOT_HEADER_LINES = 8


def fmt(x):
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def ensure_dir(path):
    if not path or not str(path).strip():
        raise OutputError("output directory path is empty")
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {path}: {exc}") from None
    if not os.access(path, os.W_OK):
        raise OutputError(f"{path} is not writable")
    return path


def branch_rows(branch):
    rows = []
    for idx, p in enumerate(branch.points):
        d = p.diag
        status = "seed" if idx == 0 else "accepted"
        rows.append({
            "idx": idx, "kappa": p.kappa, "kappa_sq": p.kappa_sq, "offset": p.offset,
            "mode": p.mode, "mass": gravity.total_mass(p.field), "mass_error": p.mass_error,
            "sup_rho": d["sup_rho"], "r_eq": d["r_eq"], "r_pole": d["r_pole"],
            "r_max_support": d["r_max_support"], "weighted_norm_s": d["weighted_norm_s"],
            "o_n_margin": d["o_n_margin"], "residual_inf": p.residual_inf,
            "scf_iters": p.scf_iters, "status": status,
        })
    return rows


def write_branch_csv(branch, path):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(BRANCH_COLUMNS)
            for row in branch_rows(branch):
                w.writerow([fmt(row[c]) for c in BRANCH_COLUMNS])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from None


def read_branch_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        conv = {}
        for k, v in row.items():
            if k in ("mode", "status"):
                conv[k] = v
            elif k in ("idx", "scf_iters"):
                conv[k] = int(v)
            else:
                conv[k] = float(v)
        out.append(conv)
    return out


def write_snapshot(point, path, idx=0):
    """CSV of r, mu, rho, U at every node after an 8-line header."""
    g = point.grid
    U = point.potential.values if point.potential is not None else \
        gravity.potential(point.field).values
    header = [
        "# rotstar snapshot",
        f"# grid nr={g.nr} nmu={g.nmu} r_max={fmt(g.r_max)} lmax={g.lmax}",
        f"# idx={idx}",
        f"# kappa={fmt(point.kappa)}",
        f"# offset={fmt(point.offset)}",
        f"# mode={point.mode}",
        f"# residual_inf={fmt(point.residual_inf)}",
        "r,mu,rho,U",
    ]
    rr = np.repeat(g.r, g.nmu)
    mm = np.tile(g.mu, g.nr)
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(header) + "\n")
            for a, b, c, d in zip(rr, mm, point.field.values.ravel(), U.ravel()):
                fh.write(f"{a:.17g},{b:.17g},{c:.17g},{d:.17g}\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from None


def read_snapshot(path):
    """Return (field, potential, meta) from a snapshot file."""
    meta = {}
    with open(path) as fh:
        lines = fh.read().splitlines()
    for line in lines[:SNAPSHOT_HEADER_LINES - 1]:
        for tok in line.lstrip("# ").split():
            if "=" in tok:
                k, v = tok.split("=", 1)
                meta[k] = v
    data = np.loadtxt(lines[SNAPSHOT_HEADER_LINES:], delimiter=",", ndmin=2)
    nr, nmu = int(meta["nr"]), int(meta["nmu"])
    grid = Grid(nr, nmu, float(meta["r_max"]), int(meta["lmax"]))
    rho = AxisymmetricField(grid, data[:, 2].reshape(nr, nmu))
    U = AxisymmetricField(grid, data[:, 3].reshape(nr, nmu))
    for k in ("kappa", "offset", "residual_inf"):
        meta[k] = float(meta[k])
    meta["idx"] = int(meta["idx"])
    return rho, U, meta


def _json_safe(x):
    if isinstance(x, dict):
        return {k: _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def summary_dict(branch, config_echo, extra=None):
    term = branch.termination
    last = branch.points[-1] if branch.points else None
    out = {
        "termination_reason": term.reason if term else None,
        "n_points": len(branch.points),
        "final_kappa": last.kappa if last else None,
        "config_echo": config_echo,
        "version": __version__,
        "termination_message": term.message if term else "",
        "termination_evidence": term.evidence if term else {},
        "alpha0": branch.alpha0,
    }
    if extra:
        out.update(extra)
    out["timestamp"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
    return _json_safe(out)


def write_json(obj, path):
    try:
        with open(path, "w") as fh:
            json.dump(_json_safe(obj), fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from None


def write_outputs(branch, out_dir, config_echo=None, snapshot_every=1, extra=None):
    """branch.csv, summary.json and point_{idx:04}.csv every ``snapshot_every``
    points (0 disables snapshots; the last point is always written)."""
    ensure_dir(out_dir)
    write_branch_csv(branch, os.path.join(out_dir, "branch.csv"))
    files = []
    if snapshot_every:
        n = len(branch.points)
        for idx, p in enumerate(branch.points):
            if idx % snapshot_every == 0 or idx == n - 1:
                path = os.path.join(out_dir, f"point_{idx:04d}.csv")
                write_snapshot(p, path, idx)
                files.append(path)
    write_json(summary_dict(branch, config_echo or {}, extra), os.path.join(out_dir, "summary.json"))
    return files
