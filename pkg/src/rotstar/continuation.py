"""Natural-parameter continuation in kappa^2 from the non-rotating seed."""

import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .errors import MassUnreachableError, NoConvergenceError, SeedFailureError
from .gravity import AxisymmetricField
from .solver import SolutionPoint, rescale_to_mass, solve_equilibrium

REASONS = (
    "DENSITY_UNBOUNDED_SUSPECTED",
    "SUPPORT_UNBOUNDED_SUSPECTED",
    "ON_BOUNDARY",
    "FOLD_SUSPECTED",
    "KAPPA_MAX_REACHED",
    "MAX_STEPS",
    "GRID_EXHAUSTED",
)


@dataclass
class ContinuationOptions:
    """Step control and termination thresholds.

    ``kappa_sq_step_init`` None means 0.02 |alpha0| / max cf1, with cf1 the
    rotation term at kappa = 1 over the seed support.  ``step_min`` and
    ``step_max`` None mean 1e-3 and 1 times the initial step.  ``rho_max``
    None means 100 times the seed's sup rho; ``margin_min`` None means
    1e-6 |alpha0|.
    """

    kappa_sq_step_init: Optional[float] = None
    step_min: Optional[float] = None
    step_max: Optional[float] = None
    kappa_max: float = 100.0
    max_steps: int = 200
    rho_max: Optional[float] = None
    support_frac: float = 0.9
    margin_min: Optional[float] = None
    growth: float = 1.5
    coherence: float = 0.5
    tol: float = 1e-8
    max_iter: int = 500
    relax: float = 0.5


@dataclass
class TerminationReport:
    reason: str
    message: str = ""
    evidence: dict = field(default_factory=dict)

    def as_dict(self):
        return {"reason": self.reason, "message": self.message, "evidence": self.evidence}


@dataclass
class Branch:
    points: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    termination: Optional[TerminationReport] = None
    alpha0: float = math.nan
    seed: Any = None
    options: Any = None


def _evidence(points, n=5):
    tail = points[-max(n, 5):]
    return {
        "kappa_sq": [p.kappa_sq for p in tail],
        "sup_rho": [p.diag["sup_rho"] for p in tail],
        "r_max_support": [p.diag["r_max_support"] for p in tail],
        "r_max": [p.grid.r_max for p in tail],
        "o_n_margin": [p.diag["o_n_margin"] for p in tail],
    }


def superlinear_growth(kappa_sq, values, window=5, factor=2.0):
    """True when the last ``window`` values increase with increasing slopes
    in kappa^2 and grow by at least ``factor`` overall."""
    if len(values) < window:
        return False
    x = np.asarray(kappa_sq[-window:], dtype=float)
    y = np.asarray(values[-window:], dtype=float)
    dx = np.diff(x)
    if np.any(dx <= 0) or np.any(np.diff(y) <= 0):
        return False
    slopes = np.diff(y) / dx
    return bool(np.all(np.diff(slopes) > 0) and y[-1] >= factor * y[0])


def classify_termination(state):
    """Threshold rules on the branch state; returns a TerminationReport or None.

    ``state`` maps kappa_sq, sup_rho, r_max_support, r_max, o_n_margin to
    sequences over accepted points, plus the scalars rho_max, support_frac,
    margin_min and can_enlarge (one domain doubling still available).  A
    support excursion while doubling is still available returns None; the
    caller enlarges the grid.
    """
    sup = state["sup_rho"]
    ev = {k: list(state[k][-5:]) for k in ("kappa_sq", "sup_rho", "r_max_support", "r_max",
                                            "o_n_margin") if k in state}
    if sup[-1] > state["rho_max"]:
        return TerminationReport("DENSITY_UNBOUNDED_SUSPECTED",
                                 f"sup rho {sup[-1]:.6g} > rho_max {state['rho_max']:.6g}", ev)
    if superlinear_growth(state["kappa_sq"], sup):
        return TerminationReport("DENSITY_UNBOUNDED_SUSPECTED",
                                 "sup rho grows superlinearly over the last 5 points", ev)
    frac = state["r_max_support"][-1] / state["r_max"][-1]
    if frac > state["support_frac"] and not state.get("can_enlarge", False):
        return TerminationReport(
            "SUPPORT_UNBOUNDED_SUSPECTED",
            f"support radius reaches {frac:.4f} of r_max (threshold {state['support_frac']})", ev)
    margin = state["o_n_margin"][-1]
    if margin < state["margin_min"]:
        return TerminationReport("ON_BOUNDARY",
                                 f"o_n_margin {margin:.6g} < {state['margin_min']:.6g}", ev)
    return None


def _state(points, opts, can_enlarge):
    return {
        "kappa_sq": [p.kappa_sq for p in points],
        "sup_rho": [p.diag["sup_rho"] for p in points],
        "r_max_support": [p.diag["r_max_support"] for p in points],
        "r_max": [p.grid.r_max for p in points],
        "o_n_margin": [p.diag["o_n_margin"] for p in points],
        "rho_max": opts.rho_max,
        "support_frac": opts.support_frac,
        "margin_min": opts.margin_min,
        "can_enlarge": can_enlarge,
    }


def _rotation_scale(model, rho):
    """max |rotation term at kappa = 1| over the support of ``rho``."""
    from .solver import _centrifugal

    cf = _centrifugal(model, rho, 1.0, "nodes")
    inside = rho.values > 0
    val = float(np.max(np.abs(cf[inside]))) if inside.any() else 0.0
    return val


def run_branch(model, rho_seed, alpha0, options=None, log=None):
    """Trace equilibria from kappa = 0 upward in kappa^2.

    Warm-starts each solve from the previous accepted density.  A step is
    rejected (and halved) on NoConvergenceError or when the new density
    differs from the previous one by more than ``coherence`` in relative
    sup norm.  One automatic doubling of r_max is allowed, triggered by
    MassUnreachableError or by the support passing ``support_frac`` of the
    domain.
    """
    opts = options or ContinuationOptions()
    say = log or (lambda msg: None)
    branch = Branch(alpha0=alpha0, options=opts)
    solve_kw = dict(tol=opts.tol, max_iter=opts.max_iter, relax=opts.relax)
    try:
        p0 = solve_equilibrium(model, 0.0, rho_seed, **solve_kw)
    except (NoConvergenceError, MassUnreachableError) as exc:
        raise SeedFailureError(f"kappa = 0 solve failed: {exc}") from exc
    branch.points.append(p0)
    say(f"seed: sup_rho={p0.diag['sup_rho']:.6g} offset={p0.offset:.10g} iters={p0.scf_iters}")

    if opts.rho_max is None:
        opts.rho_max = 100.0 * p0.diag["sup_rho"]
    if opts.margin_min is None:
        opts.margin_min = 1e-6 * abs(alpha0)
    scale = _rotation_scale(model, p0.field)
    if opts.kappa_sq_step_init is None:
        opts.kappa_sq_step_init = 0.02 * abs(alpha0) / scale if scale > 0 else 1.0
    if opts.step_min is None:
        opts.step_min = 1e-3 * opts.kappa_sq_step_init
    if opts.step_max is None:
        opts.step_max = opts.kappa_sq_step_init

    enlarged = False

    def enlarge(point):
        """Double r_max, interpolate, re-solve at the same kappa."""
        new_grid = point.grid.with_radius(2.0 * point.grid.r_max)
        rho = rescale_to_mass(point.field.regrid(new_grid), model.mass)
        return solve_equilibrium(model, point.kappa, rho, **solve_kw)

    def finish(reason, message):
        branch.termination = TerminationReport(reason, message, _evidence(branch.points))
        return branch

    kappa_sq_max = opts.kappa_max ** 2
    delta = opts.kappa_sq_step_init
    attempts = 0
    while True:
        rep = classify_termination(_state(branch.points, opts, not enlarged))
        last = branch.points[-1]
        if rep is None and not enlarged and (
                last.diag["r_max_support"] > opts.support_frac * last.grid.r_max):
            enlarged = True
            try:
                branch.points[-1] = enlarge(last)
            except (NoConvergenceError, MassUnreachableError) as exc:
                return finish("GRID_EXHAUSTED", f"re-solve after domain doubling failed: {exc}")
            branch.steps.append({"kappa_sq": last.kappa_sq, "delta": 0.0,
                                 "outcome": "enlarged", "r_max": branch.points[-1].grid.r_max})
            say(f"domain doubled to r_max={branch.points[-1].grid.r_max:g}")
            continue
        if rep is not None:
            branch.termination = rep
            rep.evidence = _evidence(branch.points)
            return branch
        if last.kappa_sq >= kappa_sq_max:
            return finish("KAPPA_MAX_REACHED", f"kappa reached kappa_max = {opts.kappa_max:g}")
        if attempts >= opts.max_steps:
            return finish("MAX_STEPS", f"{opts.max_steps} continuation steps taken")
        attempts += 1

        target = min(last.kappa_sq + delta, kappa_sq_max)
        kappa = math.sqrt(target)
        try:
            p = solve_equilibrium(model, kappa, last, **solve_kw)
            jump = float(np.max(np.abs(p.field.values - last.field.values))) / last.field.sup()
            if jump > opts.coherence:
                raise NoConvergenceError(f"density jump {jump:.3g} exceeds {opts.coherence}")
        except NoConvergenceError as exc:
            branch.steps.append({"kappa_sq": target, "delta": delta, "outcome": "rejected",
                                 "error": str(exc)})
            say(f"step to kappa^2={target:.6g} rejected: {exc}")
            delta *= 0.5
            if delta < opts.step_min:
                return finish("FOLD_SUSPECTED",
                              f"step fell below step_min = {opts.step_min:.3g} at "
                              f"kappa^2 = {last.kappa_sq:.10g}")
            continue
        except MassUnreachableError as exc:
            branch.steps.append({"kappa_sq": target, "delta": delta, "outcome": "mass_unreachable",
                                 "error": str(exc)})
            if enlarged:
                return finish("GRID_EXHAUSTED", f"mass unreachable after domain doubling: {exc}")
            enlarged = True
            try:
                branch.points[-1] = enlarge(last)
            except (NoConvergenceError, MassUnreachableError) as exc2:
                return finish("GRID_EXHAUSTED", f"re-solve after domain doubling failed: {exc2}")
            say(f"domain doubled to r_max={branch.points[-1].grid.r_max:g}")
            continue

        branch.points.append(p)
        branch.steps.append({"kappa_sq": target, "delta": delta, "outcome": "accepted",
                             "scf_iters": p.scf_iters})
        say(f"[{len(branch.points) - 1}] kappa^2={target:.6g} sup_rho={p.diag['sup_rho']:.6g} "
            f"r_eq={p.diag['r_eq']:.4g} r_pole={p.diag['r_pole']:.4g} "
            f"margin={p.diag['o_n_margin']:.4g} iters={p.scf_iters}")
        delta = min(delta * opts.growth, opts.step_max)
