"""Command line entry point: ``rotstar {radial,solve,branch,diagnose}``.

Exit codes: 0 success (any classified branch termination), 1 configuration
or output error, 2 seed failure, 3 numerical failure outside the
classified contract.
"""

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__, diagnostics, gravity
from .errors import (ConfigError, GridTooSmallError, MassUnreachableError, NoBracketError,
                     NoClassificationError, NoConvergenceError, NotCompactError, OutputError,
                     RotStarError, SeedFailureError)
from .config import parse_config

log = logging.getLogger("rotstar")

EXIT_OK, EXIT_CONFIG, EXIT_SEED, EXIT_NUMERIC = 0, 1, 2, 3
SEED_ERRORS = (NoBracketError, NoClassificationError, NotCompactError, GridTooSmallError,
               SeedFailureError)


def _seed(cfg):
    from .radial import seed_density
    from .solver import rescale_to_mass

    from .eos import validate_eos

    sol = cfg.seed_solution()
    if "GAMMA_FOUR_THIRDS" in validate_eos(cfg.eos()).warnings:
        raise SeedFailureError("gamma = 4/3: M(a) is independent of a; continuation is not "
                               "started from this seed")
    grid = cfg.grid(sol.support_radius)
    rho, alpha0 = seed_density(sol, grid)
    log.info("seed: a=%.10g R=%.10g alpha0=%.10g grid=%r", sol.a, sol.support_radius, alpha0,
             grid)
    return sol, rescale_to_mass(rho, cfg.mass), alpha0


def point_diagnostics(point, model, cfg, linearize=False):
    rep = diagnostics.support_bound_check(point, model=model, tol=cfg["scf.tol"])
    out = {
        "support_bound_pass": rep.overall,
        "C0_measured": rep["C0_measured"].measured,
        "formulation_residual": diagnostics.formulation_residual(point, model=model),
    }
    if linearize:
        lin = diagnostics.linearization_check(point, model=model, rng_seed=cfg["rng_seed"])
        out["linearization_pass"] = lin.overall
        out["linearization_ratio"] = lin.checks[0].measured if lin.checks else None
    return out


def cmd_radial(cfg, args):
    from .outputs import ensure_dir, fmt
    from .radial import mass_curve

    eos = cfg.eos()
    a_vals = np.geomspace(args.a_min, args.a_max, args.count)
    rows = mass_curve(eos, a_vals)
    out = ensure_dir(cfg["output.dir"])
    path = os.path.join(out, "radial.csv")
    with open(path, "w") as fh:
        fh.write("a,R,M,alpha0,kind\n")
        for a, R, M, kind in rows:
            alpha0 = -M / R if R else math.nan
            fh.write(",".join(fmt(x) for x in (float(a), R if R is not None else math.nan,
                                                 M if M is not None else math.nan, alpha0))
                     + f",{kind}\n")
    for a, R, M, kind in rows:
        print(f"a={a:.6g} R={R if R is None else f'{R:.10g}'} "
              f"M={M if M is None else f'{M:.10g}'} {kind}")
    return EXIT_OK


def cmd_solve(cfg, args):
    from .outputs import ensure_dir, write_json, write_snapshot
    from .solver import solve_equilibrium

    model = cfg.model()
    _, rho, alpha0 = _seed(cfg)
    opts = cfg.scf_options()
    try:
        p0 = solve_equilibrium(model, 0.0, rho, **opts)
    except (NoConvergenceError, MassUnreachableError) as exc:
        raise SeedFailureError(f"kappa = 0 solve failed: {exc}") from exc
    p = p0 if args.kappa == 0 else solve_equilibrium(model, args.kappa, p0, **opts)
    out = ensure_dir(cfg["output.dir"])
    write_snapshot(p, os.path.join(out, "point_0000.csv"), 0)
    res = {
        "kappa": p.kappa, "offset": p.offset, "alpha0": alpha0, "mode": p.mode,
        "mass": gravity.total_mass(p.field), "mass_error": p.mass_error,
        "residual_inf": p.residual_inf, "scf_iters": p.scf_iters, **p.diag,
        "diagnostics": point_diagnostics(p, model, cfg, linearize=True),
        "config_echo": cfg.echo(), "version": __version__,
    }
    write_json(res, os.path.join(out, "solve.json"))
    print(json.dumps({k: res[k] for k in ("kappa", "offset", "sup_rho", "r_eq", "r_pole",
                                          "residual_inf", "scf_iters")}))
    return EXIT_OK


def cmd_branch(cfg, args):
    from .continuation import run_branch
    from .outputs import ensure_dir, write_outputs

    out = ensure_dir(cfg["output.dir"])
    model = cfg.model()
    _, rho, alpha0 = _seed(cfg)
    branch = run_branch(model, rho, alpha0, cfg.continuation_options(), log=log.info)
    diag = [point_diagnostics(p, model, cfg, linearize=(i in (0, len(branch.points) - 1)))
            for i, p in enumerate(branch.points)]
    extra = {
        "diagnostics": {
            "support_bound_all_pass": all(d["support_bound_pass"] for d in diag),
            "max_formulation_residual": max(d["formulation_residual"] for d in diag),
            "max_mass_error": max(p.mass_error for p in branch.points),
            "linearization_seed": {k: diag[0].get(k) for k in ("linearization_pass",
                                                               "linearization_ratio")},
            "linearization_last": {k: diag[-1].get(k) for k in ("linearization_pass",
                                                                "linearization_ratio")},
        },
        "steps": branch.steps,
    }
    write_outputs(branch, out, cfg.echo(), cfg["output.snapshot_every"], extra)
    print(f"{branch.termination.reason}: {len(branch.points)} points, "
          f"final kappa {branch.points[-1].kappa:.10g} -> {out}")
    return EXIT_OK


def cmd_diagnose(cfg, args):
    from .outputs import read_branch_csv, read_snapshot, write_json
    from .solver import SolutionPoint, fill_diagnostics, residual_F

    rho, U, meta = read_snapshot(args.snapshot)
    model = cfg.model()
    if meta["mode"] != model.mode:
        raise ConfigError(f"snapshot mode {meta['mode']} differs from rotation.mode {model.mode}")
    model.lmax = min(model.lmax, rho.grid.lmax)
    point = SolutionPoint(field=rho, potential=U, kappa=meta["kappa"], offset=meta["offset"],
                          mode=meta["mode"], model=model)
    fill_diagnostics(point, model)
    resid = residual_F(point, model)
    point.residual_inf, point.mass_error = resid["residual_inf"], resid["mass_error"]
    rep = diagnostics.support_bound_check(point, model=model, tol=cfg["scf.tol"])
    rep.add("residual_within_tol", resid["residual_inf"] <= cfg["scf.tol"] * rho.sup(),
            resid["residual_inf"], cfg["scf.tol"] * rho.sup())
    rep.add("mass_error", resid["mass_error"] <= 1e-8 * model.mass, resid["mass_error"],
            1e-8 * model.mass)
    fr = diagnostics.formulation_residual(point, model=model)
    rep.add("formulation_residual", True, fr, None, note="reported")
    lin = diagnostics.linearization_check(point, model=model, rng_seed=cfg["rng_seed"])
    rep.checks.extend(lin.checks)
    if args.branch:
        rows = [r for r in read_branch_csv(args.branch) if r["idx"] == meta["idx"]]
        if rows:
            row = rows[0]
            rep.add("branch_row_offset", row["offset"] == meta["offset"], row["offset"],
                    meta["offset"])
            rep.add("branch_row_kappa", row["kappa"] == meta["kappa"], row["kappa"],
                    meta["kappa"])
        else:
            rep.warnings.append(f"no branch row with idx {meta['idx']}")
    out = rep.as_dict()
    out["diag"] = point.diag
    text = json.dumps(out, indent=2, default=str)
    if args.out:
        write_json(out, args.out)
    print(text)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="rotstar", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)

    def common(sp):
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key (repeatable)")
        sp.add_argument("-v", "--verbose", action="store_true")

    sub = p.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("radial", help="mass-radius sweep of non-rotating profiles")
    common(sp)
    sp.add_argument("--a-min", type=float, default=0.1)
    sp.add_argument("--a-max", type=float, default=10.0)
    sp.add_argument("--count", type=int, default=9)
    sp.set_defaults(func=cmd_radial)
    sp = sub.add_parser("solve", help="single equilibrium at fixed kappa")
    common(sp)
    sp.add_argument("--kappa", type=float, default=0.0)
    sp.set_defaults(func=cmd_solve)
    sp = sub.add_parser("branch", help="continuation in kappa from the non-rotating seed")
    common(sp)
    sp.set_defaults(func=cmd_branch)
    sp = sub.add_parser("diagnose", help="re-verify a snapshot")
    common(sp)
    sp.add_argument("--snapshot", required=True)
    sp.add_argument("--branch", help="branch.csv holding the snapshot's row")
    sp.add_argument("--out", help="also write the JSON report here")
    sp.set_defaults(func=cmd_diagnose)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        cfg = parse_config(args.config, args.set)
        return args.func(cfg, args)
    except (ConfigError, OutputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SEED_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEED
    except (RotStarError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
