"""Self-consistent-field solution of the rotating-star fixed point.

At fixed kappa the density is updated by

    rho <- (1 - theta) rho + theta * avg h^-1([U(rho) + cf + offset]_+)

where ``avg`` is the volume average over each radial shell and the offset
(alpha for an angular-velocity law, lambda for an angular-momentum law) is
re-solved every iteration so the update carries exactly the target mass.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
from scipy.optimize import brentq

from . import gravity
from .errors import EmptySupportError, MassUnreachableError, NoConvergenceError
from .gravity import AxisymmetricField, NSUB
from .rotation import centrifugal_potential, momentum_integral

VELOCITY = "angular_velocity"
MOMENTUM = "angular_momentum"


@dataclass
class Model:
    """Physical problem: EOS, target mass and rotation law."""

    eos: Any
    mass: float
    mode: str = VELOCITY
    law: Any = None
    lmax: Optional[int] = None
    s_exponent: float = 4.0
    floor_rel: float = 1e-10

    def __post_init__(self):
        if self.mode not in (VELOCITY, MOMENTUM):
            raise ValueError(f"unknown rotation mode {self.mode!r}")
        if not self.mass > 0:
            raise ValueError("target mass must be positive")

    @property
    def j_sup(self):
        if self.mode != VELOCITY or self.law is None:
            return 0.0
        return self.law.j_sup


@dataclass
class SolutionPoint:
    field: AxisymmetricField
    potential: AxisymmetricField
    kappa: float
    offset: float
    mode: str
    residual_inf: float = math.nan
    mass_error: float = math.nan
    scf_iters: int = 0
    diag: dict = field(default_factory=dict)
    model: Any = None
    history: list = field(default_factory=list, repr=False)

    @property
    def grid(self):
        return self.field.grid

    @property
    def kappa_sq(self):
        return self.kappa * self.kappa


# -- the nonlinear map --------------------------------------------------------

def _centrifugal(model, rho, kappa, at):
    if kappa == 0.0 or model.law is None:
        g = rho.grid
        shape = (g.nr, g.nmu) if at == "nodes" else (g.nr, NSUB, g.nmu)
        return np.zeros(shape)
    return centrifugal_potential(rho.grid, model.mode, model.law, rho, kappa, at=at)


def bracket_base(model, rho, kappa):
    """U(rho) + cf at the sub-shell points, shape (nr, NSUB, nmu)."""
    U = gravity.potential_sub(rho, model.lmax)
    return U + _centrifugal(model, rho, kappa, "sub")


def _mapped_values(eos, grid, base, offset):
    """Shell averages of h^-1([base + offset]_+)."""
    if base.ndim == 2:
        return eos.h_inverse(np.maximum(base + offset, 0.0))
    return grid.shell_average(eos.h_inverse(np.maximum(base + offset, 0.0)))


def _mass_of_values(grid, values):
    return float(grid.shell_volume @ (values @ grid.mu_weights))


def solve_offset_for_mass(U, cf, eos, M, grid=None, rtol=1e-10):
    """Offset with total_mass(h^-1([U + cf + offset]_+)) = M.

    ``U`` and ``cf`` are either node fields/arrays of shape (nr, nmu) or
    sub-shell arrays of shape (nr, NSUB, nmu); in the latter case the
    density is the shell average.  g(offset) is nondecreasing, so the root
    is bracketed by [-max(U + cf), 0].  Raises MassUnreachableError when
    g(0) < M.
    """
    if grid is None:
        grid = U.grid
    base = np.asarray(getattr(U, "values", U), dtype=float) + np.asarray(getattr(cf, "values", cf))

    def g(off):
        return _mass_of_values(grid, _mapped_values(eos, grid, base, off))

    top = float(np.max(base))
    g0 = g(0.0) if top > 0 else 0.0
    if not g0 >= M:
        raise MassUnreachableError(
            f"mass {g0:.6g} at zero offset is below the target {M:.6g}", g0=g0, target=M)
    lo, hi = -top, 0.0
    if g0 == M:
        return 0.0
    off = brentq(lambda x: g(x) - M, lo, hi, xtol=1e-15 * top, rtol=4 * np.finfo(float).eps,
                 maxiter=200)
    # g is C^1 near the root; a couple of secant corrections tighten the mass
    for _ in range(3):
        err = g(off) - M
        if abs(err) <= rtol * M:
            break
        d = 1e-7 * top
        slope = (g(off + d) - g(off - d)) / (2 * d)
        if slope <= 0:
            break
        off -= err / slope
    return float(off)


def fixed_point_map(model, rho, kappa, offset=None):
    """Return (Phi(rho), offset) with the offset solved for mass if not given."""
    g = rho.grid
    base = bracket_base(model, rho, kappa)
    if offset is None:
        offset = solve_offset_for_mass(base, 0.0, model.eos, model.mass, grid=g)
    return AxisymmetricField(g, _mapped_values(model.eos, g, base, offset)), offset


def scf_step(model, rho, kappa, relax):
    """One damped update; returns (rho_new, offset, residual_inf)."""
    if not 0.0 < relax <= 1.0:
        raise ValueError("relax must lie in (0, 1]")
    phi, offset = fixed_point_map(model, rho, kappa)
    res = float(np.max(np.abs(rho.values - phi.values)))
    new = AxisymmetricField(rho.grid, (1.0 - relax) * rho.values + relax * phi.values)
    return new, offset, res


def residual_F(point, model=None):
    """Recompute residual_inf = ||rho - Phi(rho)|| at the stored offset and |mass - M|."""
    model = model or point.model
    rho = point.field
    phi, _ = fixed_point_map(model, rho, point.kappa, offset=point.offset)
    return {
        "residual_inf": float(np.max(np.abs(rho.values - phi.values))),
        "mass_error": abs(gravity.total_mass(rho) - model.mass),
    }


def rescale_to_mass(rho, M):
    m = gravity.total_mass(rho)
    if not m > 0:
        raise ValueError("initial density has no mass")
    return rho * (M / m)


def fill_diagnostics(point, model):
    from .diagnostics import weighted_norm

    rho = point.field
    sup = rho.sup()
    d = {"sup_rho": sup}
    try:
        d.update(gravity.support_radii(rho, model.floor_rel * sup))
    except EmptySupportError:
        d.update(r_eq=0.0, r_pole=0.0, r_max_support=0.0)
    d["weighted_norm_s"] = weighted_norm(rho, model.s_exponent)
    if point.mode == VELOCITY:
        d["o_n_margin"] = -(point.offset + point.kappa ** 2 * model.j_sup)
    else:
        d["o_n_margin"] = -point.offset
    point.diag = d
    return point


def solve_equilibrium(model, kappa, init, tol=1e-8, max_iter=500, relax=0.5, relax_min=1.0 / 64,
                      depth=5, callback=None):
    """Damped SCF at fixed kappa until ||rho - Phi(rho)|| <= tol * sup rho.

    ``init`` is a density field or a SolutionPoint (warm start); it is
    rescaled to the target mass first.  The damped update
    rho + theta (Phi(rho) - rho) is combined with Anderson mixing over the
    last ``depth`` iterates (``depth=0`` gives the plain damped iteration).
    Mixing keeps the mass because its weights sum to one; negative values
    are clipped and the mass restored.  Whenever the residual grows the
    mixing history is dropped and theta halved.  Raises NoConvergenceError
    after ``max_iter`` iterations or when theta drops below ``relax_min``.
    MassUnreachableError propagates, and is also raised when the converged
    density reaches the outermost shell: the ball then truncates the star.
    ``callback(it, rho)`` is called with every iterate.
    """
    rho = init.field if isinstance(init, SolutionPoint) else init
    rho = rescale_to_mass(rho, model.mass)
    theta, prev = float(relax), math.inf
    history = []
    xs, fs = [], []
    for it in range(1, max_iter + 1):
        if callback is not None:
            callback(it, rho)
        phi, offset = fixed_point_map(model, rho, kappa)
        f = phi.values - rho.values
        res = float(np.max(np.abs(f)))
        history.append((res, theta))
        if not math.isfinite(res):
            raise NoConvergenceError("residual is not finite", iters=it)
        if res <= tol * rho.sup():
            edge = float(np.max(rho.values[-1]))
            if edge > model.floor_rel * rho.sup():
                raise MassUnreachableError(
                    f"density {edge:.3g} in the outermost shell: support reaches r_max",
                    edge=edge)
            point = SolutionPoint(
                field=rho, potential=gravity.potential(rho, model.lmax), kappa=float(kappa),
                offset=float(offset), mode=model.mode, residual_inf=res,
                mass_error=abs(gravity.total_mass(rho) - model.mass), scf_iters=it, model=model,
                history=history)
            return fill_diagnostics(point, model)
        if res > prev:
            theta *= 0.5
            xs, fs = [], []
            if theta < relax_min:
                raise NoConvergenceError(f"relaxation fell below {relax_min:g}", iters=it,
                                         residual=res)
        prev = res
        x = rho.values
        step = x + theta * f
        if depth > 0:
            xs.append(x.ravel().copy())
            fs.append(f.ravel().copy())
            if len(xs) > depth + 1:
                xs.pop(0)
                fs.pop(0)
            if len(xs) > 1:
                dX = np.diff(np.array(xs), axis=0).T
                dF = np.diff(np.array(fs), axis=0).T
                gam = np.linalg.lstsq(dF, f.ravel(), rcond=None)[0]
                step = (step.ravel() - (dX + theta * dF) @ gam).reshape(x.shape)
        new = AxisymmetricField(rho.grid, np.maximum(step, 0.0))
        rho = rescale_to_mass(new, model.mass)
    raise NoConvergenceError(f"no convergence in {max_iter} iterations", iters=max_iter,
                             residual=prev)


def seed(eos, M, grid=None, r_max_factor=2.0, **grid_opts):
    """Radial seed for mass M: (RadialSolution, density field, alpha0).

    Without a grid one is built with r_max = r_max_factor * R(a).
    """
    from .radial import find_a_for_mass, seed_density, shoot

    a = find_a_for_mass(eos, M)
    sol = shoot(eos, a)
    if grid is None:
        grid = gravity.Grid(r_max=r_max_factor * sol.support_radius, **grid_opts)
    rho, alpha0 = seed_density(sol, grid)
    return sol, rescale_to_mass(rho, M), alpha0
