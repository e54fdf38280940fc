"""Checks of structural properties on computed equilibria.

All checks return a ValidationReport.  Thresholds are numerical proxies for
qualitative statements (compact support forced by a negative offset,
equivalence of formulations, differentiability of the fixed-point map).
"""

import math

import numpy as np

from . import gravity
from .errors import EmptySupportError, STooSmallError
from .gravity import AxisymmetricField
from .report import ValidationReport
from .rotation import (cylinder_mass, induced_momentum_law, momentum_integral,
                       momentum_integral_derivative, require_admissible_momentum)
from .solver import MOMENTUM, VELOCITY, Model, bracket_base, solve_equilibrium


def weighted_norm(field, s=4.0):
    """max over the grid of (1 + |x|^2)^(s/2) |rho(x)|; requires s > 3."""
    if not s > 3:
        raise STooSmallError(f"decay exponent s must exceed 3, got {s}")
    g = field.grid
    w = (1.0 + g.r ** 2) ** (0.5 * s)
    return float(np.max(w[:, None] * np.abs(field.values)))


def _model(point, model):
    m = model if model is not None else point.model
    if m is None:
        raise ValueError("a Model is required")
    return m


def bracket_nodes(point, model=None):
    """U + cf + offset at the shell midpoints."""
    from .solver import _centrifugal

    model = _model(point, model)
    U = gravity.potential(point.field, model.lmax).values
    return U + _centrifugal(model, point.field, point.kappa, "nodes") + point.offset


def support_bound_check(point, s=None, model=None, tol=1e-8):
    """Compact support forced by a negative offset.

    C0_meas = sup <x> U(x) / ||rho||_s over the grid.  With N = 1/o_n_margin
    the bracket must be negative at every node with |x| > C0_meas N ||rho||_s.
    Also checks the sign condition outside the support: where rho is zero
    the bracket may exceed 0 by at most h(tol * sup rho).
    """
    model = _model(point, model)
    s = model.s_exponent if s is None else s
    rep = ValidationReport()
    g = point.grid
    rho = point.field
    norm = weighted_norm(rho, s)
    U = gravity.potential(rho, model.lmax).values
    jx = np.sqrt(1.0 + g.r ** 2)[:, None]
    C0 = float(np.max(jx * U) / norm) if norm > 0 else math.inf
    margin = point.diag.get("o_n_margin")
    if margin is None:
        margin = -(point.offset + point.kappa ** 2 * model.j_sup) if point.mode == VELOCITY \
            else -point.offset
    B = bracket_nodes(point, model)
    rep.add("C0_measured", math.isfinite(C0), C0, "finite")
    if not margin > 0:
        rep.warnings.append("O_N_VIOLATION")
        rep.add("bracket_negative_outside_ball", True, None, None,
                note="O_N_VIOLATION: offset outside the admissible set, check skipped")
    else:
        radius = C0 * norm / margin
        outside = np.broadcast_to(g.r[:, None] > radius, B.shape)
        worst = float(np.max(B[outside])) if outside.any() else -math.inf
        rep.add("bracket_negative_outside_ball", worst < 0, worst, 0.0,
                note=f"ball radius {radius:.6g}, {int(outside.sum())} nodes outside")
    allowed = float(model.eos.enthalpy(tol * rho.sup()))
    empty = rho.values <= 0
    worst0 = float(np.max(B[empty])) if empty.any() else -math.inf
    rep.add("bracket_sign_outside_support", worst0 <= allowed, worst0, allowed)
    return rep


def formulation_residual(point, floor=None, model=None):
    """sup over {rho > floor} of |U + cf + offset - h(rho)|.

    Densities are shell averages, so the bracket of cell i is taken at the
    value the cell actually sees: h(avg_i h^-1([U + cf + offset]_+)).  In a
    cell where the bracket is positive throughout this equals the bracket
    at some point of the cell.
    """
    model = _model(point, model)
    rho = point.field
    if floor is None:
        floor = model.floor_rel * rho.sup()
    pos = rho.values > floor
    if not pos.any():
        raise EmptySupportError(f"density <= {floor:g} everywhere")
    base = bracket_base(model, rho, point.kappa) + point.offset
    seen = rho.grid.shell_average(model.eos.h_inverse(np.maximum(base, 0.0)))
    B_eff = np.zeros_like(seen)
    B_eff[seen > 0] = model.eos.enthalpy(seen[seen > 0])
    h_rho = model.eos.enthalpy(rho.values[pos])
    return float(np.max(np.abs(B_eff[pos] - h_rho)))


def cross_formulation_check(point, omega_law=None, model=None, tol=None, solve_opts=None,
                            density_factor=10.0, offset_rel=1e-6):
    """Re-solve a velocity-mode point with its induced momentum law.

    L(m_rho(r)) = r^4 omega(r)^2 is tabulated from the converged density and
    the momentum-mode problem is solved at the same kappa and M, starting
    from the same density.  Reports ||rho_omega - rho_L||, the offset
    identity lambda = alpha + kappa^2 sup j, and the identity with the
    momentum integral taken from the axis, lambda = alpha + kappa^2 T(0),
    T(0) = int_0^inf L(m_rho(s)) s^-3 ds.  The two identities coincide only
    when the induced law reproduces r^4 omega^2 for every r; past the
    cylinder holding the whole mass m_rho is constant, so they differ by
    kappa^2 (int_sc^inf s omega^2 ds - sc^2 omega(sc)^2 / 2).

    Returns (report, momentum_point).
    """
    model = _model(point, model)
    omega_law = omega_law or model.law
    opts = dict(solve_opts or {})
    tol = opts.get("tol", 1e-8) if tol is None else tol
    opts["tol"] = tol
    rep = ValidationReport()
    L = induced_momentum_law(point.field, omega_law)
    require_admissible_momentum(L)
    mom = Model(model.eos, model.mass, mode=MOMENTUM, law=L, lmax=model.lmax,
                s_exponent=model.s_exponent, floor_rel=model.floor_rel)
    q = solve_equilibrium(mom, point.kappa, point.field, **opts)
    sup = point.field.sup()
    drho = float(np.max(np.abs(point.field.values - q.field.values)))
    rep.add("density_match", drho <= density_factor * tol * sup, drho,
            density_factor * tol * sup)
    alpha, lam, k2 = point.offset, q.offset, point.kappa ** 2
    gap = abs(lam - (alpha + k2 * omega_law.j_sup))
    rep.add("offset_identity", gap <= offset_rel * abs(alpha), gap, offset_rel * abs(alpha),
            note="lambda = alpha + kappa^2 sup j")
    T0 = float(momentum_integral(point.field, L)(0.0))
    gap_T = abs(lam - (alpha + k2 * T0))
    rep.add("offset_identity_axis_integral", gap_T <= offset_rel * abs(alpha), gap_T,
            offset_rel * abs(alpha), note="lambda = alpha + kappa^2 int_0^inf L(m) s^-3 ds")
    s_c = _cylinder_extent(point.field)
    rep.warnings.append(
        f"cylinder extent {s_c:.6g}; kappa^2 (sup j - T(0)) = {k2 * (omega_law.j_sup - T0):.6g}")
    return rep, q


def _cylinder_extent(field, rel_gap=1e-12):
    s = field.grid.faces
    m = cylinder_mass(field, s)
    idx = np.nonzero(m[-1] - m > rel_gap * m[-1])[0]
    return float(s[idx[-1] + 1]) if idx.size else 0.0


def default_direction(grid, rng, width=None):
    """Smooth random direction: Gaussian bump in the meridional plane,
    reflected so it stays even in x3, plus random (dkappa, doffset)."""
    width = width or 0.15 * grid.r_max
    r0 = rng.uniform(0.1, 0.5) * grid.r_max
    t0 = rng.uniform(0.0, 0.5 * math.pi)
    x0, z0 = r0 * math.sin(t0), r0 * math.cos(t0)

    def bump(r, mu):
        x = r * np.sqrt(1.0 - mu ** 2)
        z = r * mu
        return (np.exp(-((x - x0) ** 2 + (z - z0) ** 2) / width ** 2)
                + np.exp(-((x - x0) ** 2 + (z + z0) ** 2) / width ** 2))

    drho = grid.field(bump)
    return drho, float(rng.normal()), float(rng.normal())


def F1(model, rho, kappa, offset):
    """rho - avg h^-1([U(rho) + cf + offset]_+) at a fixed offset."""
    base = bracket_base(model, rho, kappa) + offset
    phi = rho.grid.shell_average(model.eos.h_inverse(np.maximum(base, 0.0)))
    return rho.values - phi


def frechet_L(model, rho, kappa, offset, drho, dkappa, doffset):
    """(h^-1)'([Psi]_+) times the linearized bracket, shell averaged."""
    from .solver import _centrifugal

    g = rho.grid
    base = bracket_base(model, rho, kappa) + offset
    dbase = gravity.potential_sub(drho, model.lmax) + doffset
    if model.law is not None:
        cyl = g.sub_cyl_radius
        if model.mode == VELOCITY:
            dbase = dbase + 2.0 * kappa * dkappa * model.law.j(cyl)
        else:
            T = momentum_integral(rho, model.law)
            dT = momentum_integral_derivative(rho, drho, model.law)
            dbase = dbase - kappa ** 2 * dT(cyl) - 2.0 * kappa * dkappa * T(cyl)
    return g.shell_average(model.eos.dh_inverse(np.maximum(base, 0.0)) * dbase)


def linearization_check(point, direction=None, eps_list=(1e-3, 1e-4), model=None, rng_seed=0,
                        min_ratio=5.0):
    """Remainder ||F1(p + eps d) - F1(p) - eps (drho - L d)|| for each eps.

    The check passes when successive remainders shrink by at least
    ``min_ratio`` per factor 10 in eps (the ratio is rescaled to a decade
    when consecutive eps differ by another factor).
    """
    model = _model(point, model)
    g = point.grid
    if direction is None:
        direction = default_direction(g, np.random.default_rng(rng_seed))
    drho, dk, da = direction
    if not isinstance(drho, AxisymmetricField):
        drho = AxisymmetricField(g, drho)
    rho, k, a = point.field, point.kappa, point.offset
    base = F1(model, rho, k, a)
    lin = drho.values - frechet_L(model, rho, k, a, drho, dk, da)
    rep = ValidationReport()
    rems = []
    for eps in eps_list:
        if eps == 0:
            rems.append(0.0)
            continue
        pert = F1(model, AxisymmetricField(g, rho.values + eps * drho.values), k + eps * dk,
                  a + eps * da)
        rems.append(float(np.max(np.abs(pert - base - eps * lin))))
    for (e1, r1), (e2, r2) in zip(zip(eps_list, rems), zip(eps_list[1:], rems[1:])):
        if e1 == 0 or e2 == 0:
            continue
        decades = math.log10(e1 / e2)
        ratio = (r1 / r2) ** (1.0 / decades) if r2 > 0 else math.inf
        rep.add(f"ratio_{e1:g}_{e2:g}", ratio >= min_ratio, ratio, min_ratio)
    rep.remainders = dict(zip(eps_list, rems))
    return rep
