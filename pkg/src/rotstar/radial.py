"""Non-rotating radial solutions of u'' + (2/r) u' + 4 pi h^{-1}(u_+) = 0.

``shoot`` integrates from u(0) = a, u'(0) = 0 and reports either a compact
profile with support radius R(a) or a profile that stays positive.  For a
compact profile the exterior is harmonic, u = alpha0 + M/r with
alpha0 = -M/R.
"""

import math
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import GridTooSmallError, NoBracketError, NoClassificationError, NotCompactError

FOUR_PI = 4.0 * math.pi

_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)


@dataclass
class RadialSolution:
    a: float
    kind: str  # "compact" | "positive_everywhere"
    r_nodes: np.ndarray
    u_values: np.ndarray
    rho_values: np.ndarray
    support_radius: Optional[float] = None
    mass: Optional[float] = None
    alpha0: Optional[float] = None
    scale: float = 1.0
    eos: Any = None
    dense: Any = None  # scipy OdeSolution

    @property
    def compact(self):
        return self.kind == "compact"

    def u(self, r):
        """Interior profile u(r; a) from the dense ODE output (0 <= r <= R)."""
        r = np.asarray(r, dtype=float)
        return self.dense(np.maximum(r, self.r_nodes[0]))[0]

    def du(self, r):
        r = np.asarray(r, dtype=float)
        return self.dense(np.maximum(r, self.r_nodes[0]))[1]

    def density(self, r):
        """rho_0(r) = h^{-1}(u_+), zero outside the support."""
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        inside = r < self.support_radius if self.compact else np.ones_like(r, dtype=bool)
        out[inside] = self.eos.h_inverse(self.u(r[inside]))
        return out


def _rhs(eos):
    def f(r, y):
        return [y[1], -2.0 * y[1] / r - FOUR_PI * eos.h_inverse(y[0])]
    return f


def shoot(eos, a, r_max=None, rtol=1e-12, atol=None, method="DOP853"):
    """Integrate the radial ODE outward from u(0) = a.

    The 2/r singularity is avoided by starting at r1 = 1e-6 * scale from the
    series u = a - (2 pi / 3) h^{-1}(a) r**2.  ``scale`` is
    sqrt(a / (4 pi h^{-1}(a))).  A profile still positive at ``r_max`` is
    classified positive_everywhere only when r_max >= 1e3 * scale and u' < 0
    there; otherwise NoClassificationError is raised.
    """
    if not a > 0:
        raise ValueError(f"central value a must be positive, got {a}")
    scale = eos.scale_length(a)
    if r_max is None:
        r_max = 1e4 * scale
    if atol is None:
        atol = 1e-14 * a
    rho_c = eos.h_inverse(a)
    r1 = 1e-6 * scale
    y0 = [a - (2.0 * math.pi / 3.0) * rho_c * r1 ** 2, -(4.0 * math.pi / 3.0) * rho_c * r1]

    def hit_zero(r, y):
        return y[0]
    hit_zero.terminal = True
    hit_zero.direction = -1

    sol = solve_ivp(_rhs(eos), (r1, r_max), y0, method=method, rtol=rtol, atol=atol,
                    events=hit_zero, dense_output=True)
    if sol.status < 0:
        raise NoClassificationError(f"integration failed: {sol.message}")

    r_nodes = np.concatenate([[0.0], sol.t])
    u_vals = np.concatenate([[a], sol.y[0]])
    if sol.status == 1 and sol.t_events[0].size:
        R = float(sol.t_events[0][0])
        r_nodes[-1], u_vals[-1] = R, 0.0
        out = RadialSolution(a=a, kind="compact", r_nodes=r_nodes, u_values=u_vals,
                             rho_values=eos.h_inverse(u_vals), support_radius=R,
                             scale=scale, eos=eos, dense=sol.sol)
        out.mass = mass_of(out)
        out.alpha0 = -out.mass / R
        return out

    u_end, du_end = sol.y[0, -1], sol.y[1, -1]
    if u_end > 0 and du_end < 0 and r_max >= 1e3 * scale:
        return RadialSolution(a=a, kind="positive_everywhere", r_nodes=r_nodes,
                              u_values=u_vals, rho_values=eos.h_inverse(u_vals),
                              scale=scale, eos=eos, dense=sol.sol)
    raise NoClassificationError(
        f"u still positive at r_max={r_max:g} (scale {scale:g}); raise r_max",
        r_max=r_max, scale=scale)


def mass_of(sol, panels=8):
    """M(a) = int_0^R 4 pi h^{-1}(u) r^2 dr by composite Gauss-Legendre."""
    if not sol.compact:
        raise NotCompactError("mass is only defined for compactly supported profiles")
    R = sol.support_radius
    edges = np.linspace(0.0, R, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    r = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    w = (half[:, None] * _GL_W[None, :]).ravel()
    rho = sol.eos.h_inverse(sol.u(r))
    return float(FOUR_PI * np.sum(w * rho * r * r))


def mass_curve(eos, a_values, **opts):
    """Rows (a, R, M, kind) for a sweep of central values."""
    rows = []
    for a in a_values:
        s = shoot(eos, a, **opts)
        rows.append((a, s.support_radius, s.mass, s.kind))
    return rows


def find_a_for_mass(eos, M_target, bracket=None, rtol=1e-12, max_expand=40, **opts):
    """Central value a with M(a) = M_target.

    With no bracket, one is grown geometrically around a = 1.  Raises
    NoBracketError when M(a) - M_target does not change sign (for instance
    gamma = 4/3, where M is independent of a).
    """
    if not M_target > 0:
        raise ValueError("target mass must be positive")

    def resid(log_a):
        s = shoot(eos, math.exp(log_a), **opts)
        if not s.compact:
            raise NoBracketError("profile not compact inside bracket")
        return math.log(s.mass / M_target)

    if bracket is None:
        lo, hi = -math.log(4.0), math.log(4.0)
        f_lo, f_hi = resid(lo), resid(hi)
        for _ in range(max_expand):
            if f_lo * f_hi <= 0:
                break
            # expand toward the side that reduces |f|; both if flat
            if abs(f_hi - f_lo) < 1e-9 * max(1.0, abs(f_lo)):
                lo, hi = lo - math.log(4.0), hi + math.log(4.0)
                f_lo, f_hi = resid(lo), resid(hi)
            elif abs(f_hi) < abs(f_lo):
                lo, f_lo = hi, f_hi
                hi = hi + math.log(4.0)
                f_hi = resid(hi)
            else:
                hi, f_hi = lo, f_lo
                lo = lo - math.log(4.0)
                f_lo = resid(lo)
        else:
            raise NoBracketError(f"no sign change of M(a) - {M_target:g} found")
    else:
        lo, hi = math.log(bracket[0]), math.log(bracket[1])
        f_lo, f_hi = resid(lo), resid(hi)
    if f_lo == 0:
        return math.exp(lo)
    if f_hi == 0:
        return math.exp(hi)
    if f_lo * f_hi > 0:
        raise NoBracketError(
            f"M(a) - {M_target:g} has no sign change on [{math.exp(lo):g}, {math.exp(hi):g}]")
    log_a = brentq(resid, lo, hi, xtol=1e-14, rtol=rtol)
    return math.exp(log_a)


def seed_density(sol, grid, order=8):
    """Cell-averaged rho_0 on ``grid`` (constant in mu) and alpha0 = -M/R.

    Each radial shell average is a Gauss-Legendre volume integral of the
    shooting profile, split at R, so the field carries the shooting mass up
    to quadrature error.
    """
    from .gravity import AxisymmetricField

    if not sol.compact:
        raise NotCompactError("seed requires a compact radial solution")
    R = sol.support_radius
    if grid.r_max <= R:
        raise GridTooSmallError(f"grid radius {grid.r_max:g} <= support radius {R:g}")
    x, w = np.polynomial.legendre.leggauss(order)
    a_f, b_f = grid.faces[:-1], np.minimum(grid.faces[1:], R)
    avg = np.zeros(grid.nr)
    inside = a_f < R
    a_i, b_i = a_f[inside], b_f[inside]
    mid, half = 0.5 * (a_i + b_i), 0.5 * (b_i - a_i)
    r = mid[:, None] + half[:, None] * x[None, :]
    rho = sol.eos.h_inverse(sol.u(r.ravel())).reshape(r.shape)
    integ = half * ((rho * r * r) @ w)
    avg[inside] = integ / grid.shell_volume[inside] * (4.0 * math.pi)
    values = np.repeat(avg[:, None], grid.nmu, axis=1)
    return AxisymmetricField(grid, values), sol.alpha0
