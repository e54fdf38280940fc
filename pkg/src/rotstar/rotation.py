"""Prescribed rotation: angular velocity omega(r) or angular momentum L(m).

For an angular-velocity law the centrifugal term entering the density
bracket is kappa^2 j(r), j(r) = int_0^r s omega(s)^2 ds.  For a momentum
law it is -kappa^2 int_r^inf L(m_rho(s)) s^-3 ds, where m_rho(s) is the
mass inside the cylinder of radius s about the rotation axis.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator

from .errors import InadmissibleMomentumError, InadmissibleOmegaError, MalformedTableError
from .report import ValidationReport

FOUR_PI = 4.0 * math.pi


def _read_two_columns(path):
    xs, ys = [], []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                xs.append(float(row[0]))
                ys.append(float(row[1]))
            except (ValueError, IndexError):
                if xs:
                    raise MalformedTableError(f"bad row {row!r} in {path}")
    return np.array(xs), np.array(ys)


@dataclass(frozen=True)
class OmegaLaw:
    """Angular velocity profile.

    ``inverse_poly`` (A, q): omega^2 = A (1 + s^2)^-q
    ``exponential`` (omega0, s0): omega = omega0 exp(-s/s0)
    ``table``: (r, omega) samples, pchip in omega^2, power-law tail fitted to
    the last two samples.
    """

    profile: str
    params: tuple = ()
    table: Optional[tuple] = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.profile == "inverse_poly":
            A, q = self.params
            if A < 0:
                raise ValueError("inverse_poly amplitude must be >= 0")
        elif self.profile == "exponential":
            w0, s0 = self.params
            if s0 <= 0:
                raise ValueError("exponential scale must be positive")
        elif self.profile == "table":
            self._build_table()
        else:
            raise ValueError(f"unknown omega profile {self.profile!r}")

    @classmethod
    def inverse_poly(cls, A=1.0, q=2.0):
        return cls("inverse_poly", (float(A), float(q)))

    @classmethod
    def exponential(cls, omega0, s0):
        return cls("exponential", (float(omega0), float(s0)))

    @classmethod
    def from_table(cls, r, omega):
        return cls("table", (), (tuple(map(float, r)), tuple(map(float, omega))))

    @classmethod
    def from_csv(cls, path):
        r, w = _read_two_columns(path)
        return cls.from_table(r, w)

    @classmethod
    def zero(cls):
        return cls.inverse_poly(0.0, 2.0)

    def _build_table(self):
        r = np.asarray(self.table[0], dtype=float)
        w2 = np.asarray(self.table[1], dtype=float) ** 2
        if r.size < 3 or np.any(np.diff(r) <= 0) or r[0] < 0:
            raise MalformedTableError("omega table needs >= 3 strictly increasing radii >= 0")
        if r[0] > 0:
            r, w2 = np.concatenate([[0.0], r]), np.concatenate([[w2[0]], w2])
        interp = PchipInterpolator(r, w2)
        # tail omega^2 = w2[-1] (s / r[-1])^-p
        if w2[-1] > 0 and w2[-2] > 0:
            p = -math.log(w2[-1] / w2[-2]) / math.log(r[-1] / r[-2])
        else:
            p = math.inf
        # fine cumulative integral of s omega^2 on the table span
        xg, wg = np.polynomial.legendre.leggauss(8)
        fine = np.concatenate([np.linspace(r[i], r[i + 1], 17)[:-1] for i in range(r.size - 1)]
                              + [r[-1:]])
        mid, half = 0.5 * (fine[1:] + fine[:-1]), 0.5 * (fine[1:] - fine[:-1])
        s = mid[:, None] + half[:, None] * xg[None, :]
        seg = half * ((s * np.maximum(interp(s), 0.0)) @ wg)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        self._cache.update(r=r, w2=w2, interp=interp, p=p, fine=fine,
                           jcum=PchipInterpolator(fine, cum), j_end=cum[-1])

    # -- evaluation ---------------------------------------------------------

    def omega_sq(self, s):
        s = np.asarray(s, dtype=float)
        if self.profile == "inverse_poly":
            A, q = self.params
            return A * (1.0 + s * s) ** (-q)
        if self.profile == "exponential":
            w0, s0 = self.params
            return w0 * w0 * np.exp(-2.0 * s / s0)
        c = self._cache
        out = np.where(s <= c["r"][-1], np.maximum(c["interp"](np.minimum(s, c["r"][-1])), 0.0), 0.0)
        if math.isfinite(c["p"]):
            tail = c["w2"][-1] * (np.maximum(s, c["r"][-1]) / c["r"][-1]) ** (-c["p"])
            out = np.where(s > c["r"][-1], tail, out)
        return out

    @property
    def j_sup(self):
        """int_0^inf s omega^2 ds (inf when not integrable)."""
        return float(self.j(np.inf)) if self.profile != "table" else self._table_jsup()

    def _table_jsup(self):
        c = self._cache
        t = self._table_tail(c["r"][-1])
        return c["j_end"] + t

    def _table_tail(self, r):
        c = self._cache
        if not math.isfinite(c["p"]):
            return 0.0
        if c["p"] <= 2.0:
            return math.inf
        r_end, w2e, p = c["r"][-1], c["w2"][-1], c["p"]
        return w2e * r_end ** p * r ** (2.0 - p) / (p - 2.0)

    def j(self, r):
        """Centrifugal potential int_0^r s omega(s)^2 ds."""
        r = np.asarray(r, dtype=float)
        if self.profile == "inverse_poly":
            A, q = self.params
            if A == 0:
                return np.zeros_like(r)
            if q == 1.0:
                return 0.5 * A * np.log1p(r * r)
            with np.errstate(over="ignore", divide="ignore"):
                val = A / (2.0 * (q - 1.0)) * (1.0 - (1.0 + r * r) ** (1.0 - q))
            return val
        if self.profile == "exponential":
            w0, s0 = self.params
            x = 2.0 * r / s0
            with np.errstate(invalid="ignore"):
                val = w0 * w0 * s0 * s0 / 4.0 * (1.0 - np.exp(-x) * (1.0 + x))
            return np.where(np.isinf(r), w0 * w0 * s0 * s0 / 4.0, val)
        c = self._cache
        inside = np.minimum(r, c["r"][-1])
        val = c["jcum"](inside)
        beyond = r > c["r"][-1]
        if np.any(beyond):
            tail_total = self._table_tail(c["r"][-1])
            with np.errstate(divide="ignore", invalid="ignore"):
                rest = np.array([tail_total - self._table_tail(x) if math.isfinite(x) else tail_total
                                 for x in np.atleast_1d(r[beyond])])
            val = np.array(val, dtype=float)
            val[beyond] = c["j_end"] + rest
        return val

    def tail(self, r):
        """j_sup - j(r), evaluated without cancellation for the presets."""
        r = np.asarray(r, dtype=float)
        if self.profile == "inverse_poly":
            A, q = self.params
            if A == 0:
                return np.zeros_like(r)
            if q <= 1.0:
                return np.full_like(r, np.inf)
            return A / (2.0 * (q - 1.0)) * (1.0 + r * r) ** (1.0 - q)
        if self.profile == "exponential":
            w0, s0 = self.params
            x = 2.0 * r / s0
            return w0 * w0 * s0 * s0 / 4.0 * np.exp(-x) * (1.0 + x)
        c = self._cache
        out = self.j_sup - self.j(r)
        beyond = r >= c["r"][-1]
        if np.any(beyond):
            out = np.array(out, dtype=float)
            out[beyond] = [self._table_tail(x) for x in np.atleast_1d(r[beyond])]
        return out


def j_eval(law, r):
    return law.j(r)


def validate_omega(law, r_ref=1.0):
    """Admissibility: s omega^2 integrable, omega^2 not compactly supported,
    r (sup j - j(r)) -> 0.

    For inverse_poly the decay condition is decided exactly (q > 3/2);
    otherwise it is judged on r = r_ref * 10^k, k = 1..8: the sequence must
    be nonincreasing and end below 1e-2 of its first value.
    """
    rep = ValidationReport()
    j_sup = law.j_sup
    rep.add("omega_integrable", math.isfinite(j_sup), j_sup, "finite")
    probes = r_ref * 10.0 ** np.arange(1, 9)
    if law.profile == "table":
        tail_w2 = law.omega_sq(probes)
        rep.add("omega_not_compact", bool(np.all(tail_w2 > 0)), float(tail_w2.min()), "> 0")
    else:
        # presets are positive everywhere unless their amplitude vanishes
        amp = law.params[0]
        rep.add("omega_not_compact", amp != 0, amp, "!= 0")
    if law.profile == "inverse_poly":
        A, q = law.params
        ok = A > 0 and q > 1.5
        seq = probes * law.tail(probes) if q > 1 else np.full_like(probes, np.inf)
        rep.add("omega_decay", ok, float(seq[-1]), "q > 3/2")
    elif math.isfinite(j_sup):
        seq = probes * np.asarray(law.tail(probes), dtype=float)
        ok = bool(np.all(np.diff(seq) <= 1e-15 * abs(seq[0]) + 0.0)
                  and seq[-1] <= 1e-2 * max(seq[0], 1e-300))
        if np.all(seq == 0):
            ok = True
        rep.add("omega_decay", ok, float(seq[-1]), "r*tail -> 0")
    else:
        rep.add("omega_decay", False, math.inf, "r*tail -> 0")
    return rep


def require_admissible_omega(law):
    rep = validate_omega(law)
    if not rep.overall:
        raise InadmissibleOmegaError(f"omega law fails {rep.failed()}", report=rep)
    return rep


@dataclass(frozen=True)
class MomentumLaw:
    """Squared specific angular momentum as a function of cylinder mass.

    ``power`` (A, d): L(m) = A m^d, d > 1.
    ``table``: (m, L) samples with m strictly increasing from 0; monotone
    cubic inside, held at the last value beyond it.
    """

    profile: str
    params: tuple = ()
    table: Optional[tuple] = None
    holder_delta: float = 0.5
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not 0.0 < self.holder_delta < 1.0:
            raise ValueError("holder_delta must lie in (0, 1)")
        if self.profile == "power":
            A, d = self.params
            if A < 0:
                raise ValueError("momentum amplitude must be >= 0")
        elif self.profile == "table":
            m = np.asarray(self.table[0], dtype=float)
            L = np.asarray(self.table[1], dtype=float)
            if m.size < 3 or m.shape != L.shape or np.any(np.diff(m) <= 0):
                raise MalformedTableError("momentum table needs >= 3 strictly increasing m")
            interp = PchipInterpolator(m, L, extrapolate=False)
            self._cache.update(m=m, L=L, interp=interp, dinterp=interp.derivative())
        else:
            raise ValueError(f"unknown momentum profile {self.profile!r}")

    @classmethod
    def power(cls, A=1.0, d=2.0):
        return cls("power", (float(A), float(d)))

    @classmethod
    def from_table(cls, m, L, holder_delta=0.5):
        return cls("table", (), (tuple(map(float, m)), tuple(map(float, L))), holder_delta)

    @classmethod
    def from_csv(cls, path):
        m, L = _read_two_columns(path)
        return cls.from_table(m, L)

    def __call__(self, m):
        m = np.asarray(m, dtype=float)
        if self.profile == "power":
            A, d = self.params
            return A * np.maximum(m, 0.0) ** d
        c = self._cache
        mm = np.clip(m, c["m"][0], c["m"][-1])
        return c["interp"](mm)

    def derivative(self, m):
        m = np.asarray(m, dtype=float)
        if self.profile == "power":
            A, d = self.params
            return A * d * np.maximum(m, 0.0) ** (d - 1.0)
        c = self._cache
        inside = (m >= c["m"][0]) & (m <= c["m"][-1])
        return np.where(inside, c["dinterp"](np.clip(m, c["m"][0], c["m"][-1])), 0.0)


def validate_momentum(law):
    """L >= 0, L(0) = 0, L'(0) = 0.

    For tables L'(0) is the slope at 0 of the quadratic through the first
    three samples and must be below 1e-2 of the mean slope L_max/m_max.
    """
    rep = ValidationReport()
    if law.profile == "power":
        A, d = law.params
        rep.add("L_nonnegative", A >= 0, A, ">= 0")
        rep.add("L_zero_at_zero", True, 0.0, 0.0)
        rep.add("L_flat_at_zero", d > 1.0, d, "d > 1")
        return rep
    m, L = law._cache["m"], law._cache["L"]
    rep.add("L_nonnegative", bool(np.all(L >= 0)), float(L.min()), ">= 0")
    scale = max(float(np.max(np.abs(L))), 1e-300)
    ok0 = m[0] == 0.0 and abs(L[0]) <= 1e-12 * scale
    rep.add("L_zero_at_zero", ok0, float(L[0]) if m[0] == 0 else None, 0.0)
    if m[0] == 0:
        m1, m2 = m[1], m[2]
        slope0 = (L[1] * m2 / m1 - L[2] * m1 / m2) / (m2 - m1) - L[0] * (m1 + m2) / (m1 * m2)
    else:
        slope0 = math.inf
    mean_slope = scale / m[-1]
    rep.add("L_flat_at_zero", ok0 and abs(slope0) <= 1e-2 * mean_slope, slope0,
            1e-2 * mean_slope)
    return rep


def require_admissible_momentum(law):
    rep = validate_momentum(law)
    if not rep.overall:
        raise InadmissibleMomentumError(f"momentum law fails {rep.failed()}", report=rep)
    return rep


# -- cylinder mass ------------------------------------------------------------

def cylinder_mass(field, s):
    """Mass inside the cylinder of radius s about the axis.

    The density is taken constant on cells (radial shell) x (angular band),
    the bands partitioning mu in [0, 1] with widths equal to the Gauss
    weights, and the volume of each cell inside the cylinder is integrated
    exactly.  Nondecreasing in s for nonnegative fields, and equal to
    total_mass once s covers the grid.
    """
    g = field.grid
    s = np.atleast_1d(np.asarray(s, dtype=float))
    edges = np.concatenate([[0.0], np.cumsum(g.mu_weights)])
    edges[-1] = 1.0
    a3 = (g.faces[:-1] ** 3)[None, :, None]
    b3 = (g.faces[1:] ** 3)[None, :, None]
    sp = np.maximum(s, 0.0)[:, None, None]
    s2, s3 = sp ** 2, sp ** 3
    with np.errstate(divide="ignore", invalid="ignore"):
        mu_a = np.sqrt(np.clip(1.0 - s2 / (a3 ** (2.0 / 3.0)), 0.0, 1.0))
        mu_b = np.sqrt(np.clip(1.0 - s2 / (b3 ** (2.0 / 3.0)), 0.0, 1.0))
    mu_a = np.where(a3 == 0, 0.0, mu_a)
    mu_b = np.where(sp == 0, 1.0, mu_b)
    mu_a = np.where(sp == 0, 1.0, mu_a)

    def H(t):
        # antiderivative of (s^3 (1 - t^2)^-3/2 - a^3) / 3 in t
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (s3 * t / np.sqrt(1.0 - t * t) - a3 * t) / 3.0
        return np.where(t >= 1.0, 0.0, val)

    e = edges[None, None, :]
    F = (H(np.clip(e, mu_a, mu_b)) - H(mu_a)
         + (b3 - a3) / 3.0 * np.maximum(e - mu_b, 0.0))
    vol = np.diff(F, axis=2)  # (ns, nr, nmu)
    return FOUR_PI * np.einsum("knj,nj->k", vol, field.values)


def _tail_integral(s, f, tail):
    """Callable x -> int_x^s[-1] f + tail via a cubic spline of f on s."""
    anti = CubicSpline(s, f).antiderivative()
    total = anti(s[-1])

    def T(x):
        x = np.minimum(np.asarray(x, dtype=float), s[-1])
        return total - anti(x) + tail
    return T


def momentum_integral(field, law):
    """T(s) = int_s^inf L(m_rho(t)) t^-3 dt as a callable on [0, r_max].

    The integrand is sampled at the shell faces and integrated with a
    cubic spline; beyond r_max the cylinder mass is the total mass M, so
    the tail is L(M) / (2 s^2) exactly.
    """
    s = field.grid.faces
    m = cylinder_mass(field, s)
    L = law(m)
    f = np.zeros_like(s)
    f[1:] = L[1:] / s[1:] ** 3
    T = _tail_integral(s, f, float(L[-1]) / (2.0 * s[-1] ** 2))
    T.nodes, T.integrand, T.cyl_mass, T.L_top = s, f, m, float(L[-1])
    return T


def momentum_integral_derivative(field, dfield, law):
    """Directional derivative of ``momentum_integral`` along ``dfield``:
    x -> int_x^inf L'(m_rho(t)) m_drho(t) t^-3 dt, discretized the same way."""
    s = field.grid.faces
    m = cylinder_mass(field, s)
    dm = cylinder_mass(dfield, s)
    dL = law.derivative(m) * dm
    f = np.zeros_like(s)
    f[1:] = dL[1:] / s[1:] ** 3
    return _tail_integral(s, f, float(dL[-1]) / (2.0 * s[-1] ** 2))


def centrifugal_potential(grid, mode, law, field=None, kappa=0.0, at="nodes", T=None):
    """Additive rotation term of the density bracket.

    mode ``angular_velocity``: kappa^2 j(r(x)).
    mode ``angular_momentum``: -kappa^2 int_{r(x)}^inf L(m_rho(s)) s^-3 ds,
    with m_rho taken from ``field``.
    ``at`` selects the shell midpoints ("nodes", shape (nr, nmu)) or the
    sub-shell points ("sub", shape (nr, NSUB, nmu)).
    """
    cyl = grid.cyl_radius if at == "nodes" else grid.sub_cyl_radius
    if kappa == 0.0:
        return np.zeros(cyl.shape)
    k2 = kappa * kappa
    if mode == "angular_velocity":
        return k2 * law.j(cyl)
    if mode == "angular_momentum":
        if T is None:
            T = momentum_integral(field, law)
        return -k2 * T(cyl)
    raise ValueError(f"unknown rotation mode {mode!r}")


def induced_momentum_law(field, omega_law, rel_gap=1e-12):
    """Tabulate L(m_rho(s)) = s^4 omega(s)^2 at the shell faces of ``field``.

    Only faces where the cylinder mass still increases by more than
    ``rel_gap`` * M are kept, so the table is a function of m.
    """
    g = field.grid
    s = g.faces
    m = cylinder_mass(field, s)
    L = s ** 4 * omega_law.omega_sq(s)
    M = m[-1]
    keep = [0]
    for k in range(1, s.size):
        if m[k] - m[keep[-1]] > rel_gap * M:
            keep.append(k)
    keep = np.array(keep)
    return MomentumLaw.from_table(m[keep], L[keep])
