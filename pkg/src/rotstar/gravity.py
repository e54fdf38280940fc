"""Newtonian potential of axisymmetric, equatorially symmetric densities.

Fields live on a spherical (r, mu = cos theta) grid: ``nr`` uniform radial
shells on [0, r_max] and the ``nmu`` positive Gauss-Legendre nodes of a
2*nmu point rule on [-1, 1].  A density value is the volume average over
its radial shell at the given mu.  For the potential each shell carries a
linear profile (central-difference slope about the shell centroid); the
radial integrals of that profile are exact, so a piecewise-constant
density such as a uniform ball with radius on a shell face is reproduced
to round-off.

The potential uses the even-l multipole expansion

    U(r, mu) = sum_l P_l(mu) 4 pi/(2l+1)
               [ r^-(l+1) int_0^r s^(l+2) rho_l ds + r^l int_r^rmax s^(1-l) rho_l ds ]

with rho_l the Legendre coefficients of rho.
"""

import math
from functools import cached_property

import numpy as np
from scipy.special import eval_legendre

from .errors import EmptySupportError, OddLmaxError

FOUR_PI = 4.0 * math.pi
# Gauss points per radial shell used when averaging nonlinear functions.
NSUB = 4


class Grid:
    def __init__(self, nr=256, nmu=32, r_max=2.0, lmax=16):
        if lmax < 0 or lmax % 2:
            raise OddLmaxError(f"lmax must be even and >= 0, got {lmax}")
        if nr < 4 or nmu < 1:
            raise ValueError("grid needs nr >= 4 and nmu >= 1")
        if not r_max > 0:
            raise ValueError("r_max must be positive")
        self.nr, self.nmu, self.r_max, self.lmax = int(nr), int(nmu), float(r_max), int(lmax)
        self.faces = np.linspace(0.0, self.r_max, self.nr + 1)
        self.r = 0.5 * (self.faces[1:] + self.faces[:-1])
        x, w = np.polynomial.legendre.leggauss(2 * self.nmu)
        keep = x > 0
        order = np.argsort(x[keep])
        self.mu = x[keep][order]
        self.mu_weights = w[keep][order]  # sums to 1 (integral over [0, 1])
        a, b = self.faces[:-1], self.faces[1:]
        self.shell_volume = FOUR_PI / 3.0 * (b ** 3 - a ** 3)
        self.centroids = 0.75 * (b ** 4 - a ** 4) / (b ** 3 - a ** 3)
        self.ls = np.arange(0, self.lmax + 1, 2)
        self.legendre = np.array([eval_legendre(l, self.mu) for l in self.ls])

    def __repr__(self):
        return f"Grid(nr={self.nr}, nmu={self.nmu}, r_max={self.r_max!r}, lmax={self.lmax})"

    def spec(self):
        return {"nr": self.nr, "nmu": self.nmu, "r_max": self.r_max, "lmax": self.lmax}

    def same_as(self, other):
        return self.spec() == other.spec()

    @cached_property
    def cyl_radius(self):
        """Distance from the rotation axis at every node, shape (nr, nmu)."""
        return self.r[:, None] * np.sqrt(1.0 - self.mu[None, :] ** 2)

    @cached_property
    def height(self):
        return self.r[:, None] * self.mu[None, :]

    @cached_property
    def slopes(self):
        return slope_matrix(self)

    @cached_property
    def kernels(self):
        """Potential matrices at the shell midpoints, shape (n_l, nr, nr)."""
        return np.array([combined_weights(l, self.r, self) for l in self.ls])

    @cached_property
    def sub_points(self):
        """Gauss points inside each shell, shape (nr, NSUB), and volume weights.

        sum_q weight[i, q] f(s[i, q]) is the volume average of f over shell i.
        """
        x, w = np.polynomial.legendre.leggauss(NSUB)
        a, b = self.faces[:-1, None], self.faces[1:, None]
        s = 0.5 * (a + b) + 0.5 * (b - a) * x[None, :]
        vw = 0.5 * (b - a) * w[None, :] * s ** 2
        return s, vw / vw.sum(axis=1, keepdims=True)

    @cached_property
    def sub_kernels(self):
        """Potential matrices at the sub-shell points, shape (n_l, nr*NSUB, nr)."""
        s, _ = self.sub_points
        return np.array([combined_weights(l, s.ravel(), self) for l in self.ls])

    @cached_property
    def sub_cyl_radius(self):
        """Distance from the axis at sub-shell points, shape (nr, NSUB, nmu)."""
        s, _ = self.sub_points
        return s[:, :, None] * np.sqrt(1.0 - self.mu[None, None, :] ** 2)

    def shell_average(self, sub_values):
        """Volume averages over each shell of values at the sub-shell points."""
        _, vw = self.sub_points
        return np.einsum("iq,iqj->ij", vw, sub_values)

    def zeros(self):
        return AxisymmetricField(self, np.zeros((self.nr, self.nmu)))

    def field(self, fn):
        """Field with values fn(r, mu) broadcast over the nodes."""
        vals = np.broadcast_to(fn(self.r[:, None], self.mu[None, :]), (self.nr, self.nmu))
        return AxisymmetricField(self, np.array(vals, dtype=float))

    def with_radius(self, r_max):
        return Grid(self.nr, self.nmu, r_max, self.lmax)


class AxisymmetricField:
    """Values on a Grid; axisymmetry and evenness in x3 hold by construction."""

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.nr, grid.nmu):
            raise ValueError(f"values shape {values.shape} != {(grid.nr, grid.nmu)}")
        self.grid = grid
        self.values = values

    @property
    def nr(self):
        return self.grid.nr

    @property
    def nmu(self):
        return self.grid.nmu

    @property
    def r_max(self):
        return self.grid.r_max

    def copy(self):
        return AxisymmetricField(self.grid, self.values.copy())

    def __mul__(self, c):
        return AxisymmetricField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __add__(self, other):
        return AxisymmetricField(self.grid, self.values + _vals(other))

    def __sub__(self, other):
        return AxisymmetricField(self.grid, self.values - _vals(other))

    def sup(self):
        return float(np.max(np.abs(self.values)))

    def regrid(self, grid):
        """Linear interpolation in r onto another grid with the same mu nodes."""
        if grid.nmu != self.grid.nmu:
            raise ValueError("regrid keeps the angular resolution")
        out = np.empty((grid.nr, grid.nmu))
        r_src = np.concatenate([[0.0], self.grid.r, [self.grid.r_max]])
        for j in range(grid.nmu):
            col = self.values[:, j]
            y = np.concatenate([[col[0]], col, [col[-1]]])
            out[:, j] = np.interp(grid.r, r_src, y, right=0.0)
        return AxisymmetricField(grid, out)


def _vals(x):
    return x.values if isinstance(x, AxisymmetricField) else x


def _powdiff(hi, lo, r, k):
    """r**(k+1) * int_lo^hi s**k ds / r**(k+1), in ratio form; k = -1 gives a log."""
    if k == -1:
        return np.log(hi / lo)
    return ((hi / r) ** (k + 1) - (lo / r) ** (k + 1)) / (k + 1)


def radial_weights(l, r, faces, centroids):
    """Radial Green's weights for the shell-linear density representation.

    On shell k the density is rho_k + sigma_k (s - c_k) with c_k the volume
    centroid.  Returns (W0, W1) such that the l-th radial factor at r[i] is
    sum_k W0[i, k] rho_k + W1[i, k] sigma_k, including 4 pi/(2l+1).
    Integrals are exact; powers are taken of ratios s/r only.
    """
    r = np.asarray(r, dtype=float)[:, None]
    a, b = faces[None, :-1], faces[None, 1:]
    c = centroids[None, :]
    W0 = np.zeros((r.shape[0], a.shape[1]))
    W1 = np.zeros_like(W0)
    zero = r[:, 0] <= 0
    if np.any(zero) and l == 0:
        W0[zero] = np.broadcast_to(0.5 * (b ** 2 - a ** 2), W0[zero].shape)
        W1[zero] = np.broadcast_to((b ** 3 - a ** 3) / 3.0 - c * 0.5 * (b ** 2 - a ** 2),
                                   W1[zero].shape)
    pos = ~zero
    rp = r[pos]
    with np.errstate(divide="ignore", invalid="ignore"):
        # interior shells, s in [a, min(b, r)]: r^-(l+1) s^(l+2)
        lo = a < rp
        t = np.minimum(b, rp)
        i0 = rp ** 2 * _powdiff(t, a, rp, l + 2)
        i1 = rp ** 3 * _powdiff(t, a, rp, l + 3) - c * i0
        # exterior shells, s in [max(a, r), b]: r^l s^(1-l)
        hi = b > rp
        u = np.maximum(a, rp)
        o0 = rp ** 2 * _powdiff(b, u, rp, 1 - l)
        o1 = rp ** 3 * _powdiff(b, u, rp, 2 - l) - c * o0
    W0[pos] = np.where(lo, i0, 0.0) + np.where(hi, o0, 0.0)
    W1[pos] = np.where(lo, i1, 0.0) + np.where(hi, o1, 0.0)
    f = FOUR_PI / (2 * l + 1)
    return f * W0, f * W1


def slope_matrix(grid):
    """Linear map from shell averages to central-difference slopes.

    The density is even through r = 0 and the last shell uses a one-sided
    difference.  No limiter: the potential stays linear in rho.
    """
    n, c = grid.nr, grid.centroids
    D = np.zeros((n, n))
    D[0, 0], D[0, 1] = -1.0 / (c[1] + c[0]), 1.0 / (c[1] + c[0])
    for k in range(1, n - 1):
        d = c[k + 1] - c[k - 1]
        D[k, k - 1], D[k, k + 1] = -1.0 / d, 1.0 / d
    d = c[-1] - c[-2]
    D[-1, -2], D[-1, -1] = -1.0 / d, 1.0 / d
    return D


def combined_weights(l, r, grid):
    W0, W1 = radial_weights(l, r, grid.faces, grid.centroids)
    return W0 + W1 @ grid.slopes


def legendre_coefficients(field, lmax=None):
    g = field.grid
    ls = g.ls if lmax is None else g.ls[g.ls <= lmax]
    P = g.legendre[: len(ls)]
    return (2 * ls[:, None] + 1) * ((field.values * g.mu_weights[None, :]) @ P.T).T


def _check_lmax(grid, lmax):
    if lmax is None:
        return grid.lmax
    if lmax % 2 or lmax < 0:
        raise OddLmaxError(f"lmax must be even and >= 0, got {lmax}")
    if lmax > grid.lmax:
        raise ValueError(f"lmax {lmax} exceeds the grid's {grid.lmax}")
    return lmax


def potential(rho, lmax=None):
    """1/|x| * rho at the shell midpoints."""
    g = rho.grid
    coef = legendre_coefficients(rho, _check_lmax(g, lmax))
    n = coef.shape[0]
    Ul = np.einsum("lik,lk->li", g.kernels[:n], coef)
    return AxisymmetricField(g, Ul.T @ g.legendre[:n])


def potential_sub(rho, lmax=None):
    """1/|x| * rho at the sub-shell points, shape (nr, NSUB, nmu)."""
    g = rho.grid
    coef = legendre_coefficients(rho, _check_lmax(g, lmax))
    n = coef.shape[0]
    Ul = np.einsum("lik,lk->li", g.sub_kernels[:n], coef)
    return (Ul.T @ g.legendre[:n]).reshape(g.nr, NSUB, g.nmu)


def potential_at(rho, r, mu, lmax=None):
    """Potential at arbitrary points (r >= 0, -1 <= mu <= 1)."""
    g = rho.grid
    lmax = _check_lmax(g, lmax)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    mu = np.broadcast_to(np.asarray(mu, dtype=float), r.shape)
    coef = legendre_coefficients(rho, lmax)
    out = np.zeros(r.shape)
    for idx, l in enumerate(g.ls[: coef.shape[0]]):
        out += (combined_weights(l, r, g) @ coef[idx]) * eval_legendre(l, mu)
    return out


def total_mass(rho):
    """4 pi int int rho r^2 dmu dr over the grid ball."""
    g = rho.grid
    return float(g.shell_volume @ (rho.values @ g.mu_weights))


def support_radii(rho, floor):
    """Largest radius with rho > floor on the equatorial and polar rays and overall.

    The rays are the Gauss nodes nearest mu = 0 and mu = 1.
    """
    if not floor > 0:
        raise ValueError("floor must be positive")
    g = rho.grid
    above = rho.values > floor
    if not above.any():
        raise EmptySupportError(f"density <= {floor:g} everywhere")

    def last(mask):
        idx = np.nonzero(mask)[0]
        return float(g.r[idx[-1]]) if idx.size else 0.0

    return {
        "r_eq": last(above[:, 0]),
        "r_pole": last(above[:, -1]),
        "r_max_support": last(above.any(axis=1)),
    }
