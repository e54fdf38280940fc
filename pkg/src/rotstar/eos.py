"""Barotropic equation of state p(rho), specific enthalpy and its inverse.

Two kinds are supported:

* ``power_law``: p = C rho**gamma, everything in closed form.
* ``sampled``: a strictly increasing (rho, p) table, interpolated
  monotonically in log-log space, continued below the first sample by a
  power law with exponent ``gamma`` and above the last sample by a power law
  with exponent ``gamma_star``.

The enthalpy is h(rho) = int_0^rho p'(s)/s ds, so h(0) = 0.
"""

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import MalformedTableError, NegativeDensityError, RotStarError
from .report import ValidationReport

FOUR_THIRDS = 4.0 / 3.0

# Gauss-Legendre rule used for the piecewise enthalpy integrals of a sampled EOS.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


@dataclass(frozen=True)
class EquationOfState:
    kind: str = "power_law"
    gamma: float = 1.5
    coeff: float = 1.0
    gamma_star: Optional[float] = None
    table: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("power_law", "sampled"):
            raise ValueError(f"unknown EOS kind {self.kind!r}")
        if not 1.0 < self.gamma < 2.0:
            raise ValueError(f"gamma must lie in (1, 2), got {self.gamma}")
        if self.coeff <= 0:
            raise ValueError(f"pressure coefficient must be positive, got {self.coeff}")
        if self.gamma_star is None:
            object.__setattr__(self, "gamma_star", float(self.gamma))
        if not 1.0 < self.gamma_star < 2.0:
            raise ValueError(f"gamma_star must lie in (1, 2), got {self.gamma_star}")
        if self.kind == "sampled":
            self._build_table()
        elif self.table is not None:
            raise ValueError("a power-law EOS takes no table")

    # -- construction -----------------------------------------------------

    @classmethod
    def power_law(cls, gamma, coeff=1.0):
        return cls("power_law", float(gamma), float(coeff))

    @classmethod
    def sampled(cls, rho, p, gamma, gamma_star=None):
        """Tabulated EOS; ``gamma``/``gamma_star`` fix the low/high density tails."""
        rho = tuple(float(x) for x in rho)
        p = tuple(float(x) for x in p)
        return cls("sampled", float(gamma), 1.0,
                   None if gamma_star is None else float(gamma_star), (rho, p))

    @classmethod
    def from_csv(cls, path, gamma, gamma_star=None):
        rho, p = [], []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rho.append(float(row[0]))
                    p.append(float(row[1]))
                except (ValueError, IndexError):
                    if rho:  # only a leading header line may be non-numeric
                        raise MalformedTableError(f"bad row {row!r} in {path}")
        return cls.sampled(rho, p, gamma, gamma_star)

    def _build_table(self):
        if self.table is None or len(self.table) != 2:
            raise MalformedTableError("sampled EOS needs a (rho, p) table")
        rho = np.asarray(self.table[0], dtype=float)
        p = np.asarray(self.table[1], dtype=float)
        if rho.ndim != 1 or rho.shape != p.shape or rho.size < 3:
            raise MalformedTableError("table needs at least 3 (rho, p) pairs")
        if np.any(rho <= 0) or np.any(p <= 0):
            raise MalformedTableError("table entries must be positive")
        if np.any(np.diff(rho) <= 0):
            raise MalformedTableError("rho samples must be strictly increasing")
        if np.any(np.diff(p) <= 0):
            raise MalformedTableError("p must be strictly increasing in rho")

        x = np.log(rho)
        logp = PchipInterpolator(x, np.log(p), extrapolate=False)
        dlogp = logp.derivative()
        d2logp = logp.derivative(2)

        # cumulative enthalpy at the knots
        g, k = self.gamma, self.gamma_star
        h_knots = np.empty_like(x)
        h_knots[0] = g * p[0] / ((g - 1.0) * rho[0])
        for i in range(len(x) - 1):
            h_knots[i + 1] = h_knots[i] + _segment_integral(logp, dlogp, x[i], x[i + 1])

        # denser monotone table used only to seed Newton in h_inverse
        xs = np.concatenate([np.linspace(x[i], x[i + 1], 9)[:-1] for i in range(len(x) - 1)]
                            + [x[-1:]])
        hs = np.array([_h_mid(xx, x, h_knots, logp, dlogp) for xx in xs])

        object.__setattr__(self, "_t", {
            "rho": rho, "p": p, "x": x, "logp": logp, "dlogp": dlogp, "d2logp": d2logp,
            "h_knots": h_knots, "seed_x": xs, "seed_h": hs,
            "head": g * p[0] / rho[0] ** g,          # p'(s) = head * s**(g-1) below rho[0]
            "tail": k * p[-1] / rho[-1] ** k,        # p'(s) = tail * s**(k-1) above rho[-1]
        })

    # -- pressure ---------------------------------------------------------

    def pressure(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.kind == "power_law":
            return self.coeff * rho ** self.gamma
        t = self._t
        out = np.empty_like(rho)
        lo, hi = rho < t["rho"][0], rho > t["rho"][-1]
        mid = ~(lo | hi)
        out[lo] = t["p"][0] * (rho[lo] / t["rho"][0]) ** self.gamma
        out[hi] = t["p"][-1] * (rho[hi] / t["rho"][-1]) ** self.gamma_star
        out[mid] = np.exp(t["logp"](np.log(rho[mid])))
        return out

    def dpressure(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.kind == "power_law":
            return self.coeff * self.gamma * rho ** (self.gamma - 1.0)
        t = self._t
        out = np.empty_like(rho)
        lo, hi = rho < t["rho"][0], rho > t["rho"][-1]
        mid = ~(lo | hi)
        out[lo] = t["head"] * rho[lo] ** (self.gamma - 1.0)
        out[hi] = t["tail"] * rho[hi] ** (self.gamma_star - 1.0)
        xm = np.log(rho[mid])
        out[mid] = np.exp(t["logp"](xm)) * t["dlogp"](xm) / rho[mid]
        return out

    def d2pressure(self, rho):
        rho = np.asarray(rho, dtype=float)
        if self.kind == "power_law":
            g = self.gamma
            return self.coeff * g * (g - 1.0) * rho ** (g - 2.0)
        t = self._t
        out = np.empty_like(rho)
        lo, hi = rho < t["rho"][0], rho > t["rho"][-1]
        mid = ~(lo | hi)
        out[lo] = t["head"] * (self.gamma - 1.0) * rho[lo] ** (self.gamma - 2.0)
        out[hi] = t["tail"] * (self.gamma_star - 1.0) * rho[hi] ** (self.gamma_star - 2.0)
        xm = np.log(rho[mid])
        d1 = t["dlogp"](xm)
        out[mid] = np.exp(t["logp"](xm)) / rho[mid] ** 2 * (d1 * d1 + t["d2logp"](xm) - d1)
        return out

    # -- enthalpy ---------------------------------------------------------

    def enthalpy(self, rho):
        """h(rho); raises NegativeDensityError for rho < 0."""
        arr = np.asarray(rho, dtype=float)
        if np.any(arr < 0):
            raise NegativeDensityError(f"density must be >= 0, got min {arr.min()}")
        if self.kind == "power_law":
            g = self.gamma
            out = self.coeff * g / (g - 1.0) * arr ** (g - 1.0)
        else:
            out = self._sampled_enthalpy(arr)
        return out if np.ndim(rho) else float(out)

    def _sampled_enthalpy(self, rho):
        t = self._t
        g, k = self.gamma, self.gamma_star
        rho = np.atleast_1d(rho)
        out = np.empty_like(rho)
        lo, hi = rho < t["rho"][0], rho > t["rho"][-1]
        mid = ~(lo | hi)
        out[lo] = t["head"] / (g - 1.0) * rho[lo] ** (g - 1.0)
        out[hi] = t["h_knots"][-1] + t["tail"] / (k - 1.0) * (
            rho[hi] ** (k - 1.0) - t["rho"][-1] ** (k - 1.0))
        if np.any(mid):
            out[mid] = _h_mid_vec(np.log(rho[mid]), t)
        return out

    def h_inverse(self, u):
        """Density h^{-1}(max(u, 0)); total on the reals."""
        arr = np.asarray(u, dtype=float)
        up = np.maximum(arr, 0.0)
        if self.kind == "power_law":
            g = self.gamma
            out = ((g - 1.0) * up / (self.coeff * g)) ** (1.0 / (g - 1.0))
        else:
            out = self._sampled_h_inverse(np.atleast_1d(up)).reshape(up.shape)
        return out if np.ndim(u) else float(out)

    def _sampled_h_inverse(self, u):
        t = self._t
        g, k = self.gamma, self.gamma_star
        h0, h1 = t["h_knots"][0], t["h_knots"][-1]
        out = np.zeros_like(u)
        lo = (u > 0) & (u <= h0)
        hi = u >= h1
        mid = (u > h0) & (u < h1)
        out[lo] = ((g - 1.0) * u[lo] / t["head"]) ** (1.0 / (g - 1.0))
        out[hi] = (t["rho"][-1] ** (k - 1.0) + (k - 1.0) * (u[hi] - h1) / t["tail"]) ** (1.0 / (k - 1.0))
        if np.any(mid):
            um = u[mid]
            sx, sh = t["seed_x"], t["seed_h"]
            j = np.clip(np.searchsorted(sh, um) - 1, 0, len(sh) - 2)
            xlo, xhi = sx[j], sx[j + 1]
            x = xlo + (um - sh[j]) / (sh[j + 1] - sh[j]) * (xhi - xlo)
            # Newton in log(rho): d h / d x = p'(rho)
            for _ in range(30):
                r = np.exp(x)
                f = _h_mid_vec(x, t) - um
                step = f / (np.exp(t["logp"](x)) * t["dlogp"](x) / r)
                xn = np.clip(x - step, xlo, xhi)
                done = np.max(np.abs(xn - x)) < 1e-15
                x = xn
                if done:
                    break
            out[mid] = np.exp(x)
        return out

    def dh_inverse(self, u):
        """Derivative of h^{-1} at max(u, 0); zero for u <= 0."""
        arr = np.asarray(u, dtype=float)
        up = np.maximum(arr, 0.0)
        if self.kind == "power_law":
            g = self.gamma
            n = 1.0 / (g - 1.0)
            c = (g - 1.0) / (self.coeff * g)
            out = n * c ** n * up ** (n - 1.0)
        else:
            rho = self.h_inverse(up)
            out = np.zeros_like(up)
            pos = rho > 0
            # (h^{-1})'(u) = 1 / h'(rho) = rho / p'(rho)
            out[pos] = rho[pos] / self.dpressure(rho[pos])
        return out if np.ndim(u) else float(out)

    def scale_length(self, a):
        """Radius over which the radial profile drops by O(a): sqrt(a / (4 pi h^{-1}(a)))."""
        return math.sqrt(a / (4.0 * math.pi * self.h_inverse(a)))


def _segment_integral(logp, dlogp, xa, xb):
    xm, xr = 0.5 * (xa + xb), 0.5 * (xb - xa)
    xs = xm + xr * _GL_X
    return xr * float(np.sum(_GL_W * np.exp(logp(xs) - xs) * dlogp(xs)))


def _h_mid(xx, x, h_knots, logp, dlogp):
    i = min(max(int(np.searchsorted(x, xx)) - 1, 0), len(x) - 2)
    return h_knots[i] + _segment_integral(logp, dlogp, x[i], xx)


def _h_mid_vec(xq, t):
    x = t["x"]
    i = np.clip(np.searchsorted(x, xq) - 1, 0, len(x) - 2)
    xa = x[i]
    xm, xr = 0.5 * (xa + xq), 0.5 * (xq - xa)
    xs = xm[:, None] + xr[:, None] * _GL_X[None, :]
    vals = np.exp(t["logp"](xs) - xs) * t["dlogp"](xs)
    return t["h_knots"][i] + xr * (vals @ _GL_W)


# Function-style aliases ------------------------------------------------------

def eval_enthalpy(eos, rho):
    return eos.enthalpy(rho)


def eval_h_inverse(eos, u):
    return eos.h_inverse(u)


def eval_dh_inverse(eos, u):
    return eos.dh_inverse(u)


def validate_eos(eos, check_condition_b=False):
    """Check the structural EOS hypotheses on sampled densities.

    The small/large density limits are estimated at three decades each and
    accepted when finite, positive and settled to 1e-2 relative.  Condition
    (b), p' < h <= 2 p', is only included on request since it is a
    sufficient condition and fails for plenty of usable laws.
    """
    rep = ValidationReport()
    if eos.kind == "sampled":
        t = eos._t
        if np.any(np.diff(t["rho"]) <= 0) or np.any(np.diff(t["p"]) <= 0):
            raise MalformedTableError("table is not strictly increasing")

    s = np.logspace(-8, 8, 161)
    if eos.kind == "sampled":
        s = np.union1d(s, eos._t["rho"])
    dp = eos.dpressure(s)
    rep.add("p_increasing", bool(np.all(dp > 0) and np.all(np.diff(eos.pressure(s)) > 0)),
            float(dp.min()), 0.0)

    rep.add("gamma_range", 1.0 < eos.gamma < 2.0, eos.gamma, "(1, 2)")
    small = np.array([1e-6, 1e-8, 1e-10])
    lim0 = small ** (2.0 - eos.gamma) * eos.d2pressure(small)
    rep.add("small_density_limit", _settled(lim0), float(lim0[-1]), "finite > 0")

    rep.add("gamma_star_range", 1.2 < eos.gamma_star < 2.0, eos.gamma_star, "(6/5, 2)")
    large = np.array([1e6, 1e8, 1e10])
    lim1 = large ** (1.0 - eos.gamma_star) * eos.dpressure(large)
    rep.add("large_density_limit", _settled(lim1), float(lim1[-1]), "finite > 0")

    if check_condition_b:
        h = eos.enthalpy(s)
        ok = bool(np.all(dp < h) and np.all(h <= 2.0 * dp * (1.0 + 1e-12)))
        rep.add("condition_b", ok, float(np.max(h / dp)), "1 < h/p' <= 2")

    if abs(eos.gamma - FOUR_THIRDS) < 1e-12:
        rep.warnings.append("GAMMA_FOUR_THIRDS")
    return rep


def _settled(vals):
    vals = np.asarray(vals, dtype=float)
    if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
        return False
    return bool(abs(vals[-1] - vals[-2]) <= 1e-2 * abs(vals[-1]))


def require_valid(eos):
    rep = validate_eos(eos)
    if not rep.overall:
        raise RotStarError(f"EOS fails {rep.failed()}")
    return rep
