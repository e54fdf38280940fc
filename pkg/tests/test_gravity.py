import math

import numpy as np
import pytest
from scipy.integrate import dblquad
from scipy.special import ellipk

from rotstar import gravity
from rotstar.errors import EmptySupportError, OddLmaxError
from rotstar.gravity import AxisymmetricField, Grid


def uniform_sphere(grid, R, rho0=1.0):
    """Exact shell averages of rho0 * 1[r < R]."""
    a, b = grid.faces[:-1], grid.faces[1:]
    frac = np.clip((np.minimum(b, R) ** 3 - a ** 3) / (b ** 3 - a ** 3), 0.0, 1.0)
    return AxisymmetricField(grid, np.repeat((rho0 * frac)[:, None], grid.nmu, axis=1))


def test_uniform_sphere_shell_theorem():
    R, rho0 = 1.0, 2.0
    g = Grid(nr=128, nmu=8, r_max=2.0, lmax=8)
    rho = uniform_sphere(g, R, rho0)
    M = 4 * math.pi / 3 * rho0 * R ** 3
    assert gravity.total_mass(rho) == pytest.approx(M, rel=1e-12)
    U0 = gravity.potential_at(rho, 0.0, 0.0)[0]
    assert U0 == pytest.approx(2 * math.pi * rho0 * R ** 2, rel=1e-3)
    r_out = np.array([1.2, 1.5, 2.0])
    assert np.allclose(gravity.potential_at(rho, r_out, 0.3), M / r_out, rtol=1e-3)
    r_in = np.array([0.25, 0.5, 0.75])
    interior = 2 * math.pi * rho0 * (R ** 2 - r_in ** 2 / 3)
    assert np.allclose(gravity.potential_at(rho, r_in, 0.7), interior, rtol=1e-3)


def test_uniform_sphere_converges():
    errs = []
    for nr in (32, 64, 128):
        rho = uniform_sphere(Grid(nr=nr, nmu=4, r_max=2.0, lmax=2), 1.0)
        errs.append(abs(gravity.potential_at(rho, 0.0, 0.0)[0] / (2 * math.pi) - 1))
    assert errs[2] < errs[1] < errs[0]


def oblate(grid, a=1.0, c=0.6):
    def fn(r, mu):
        s2 = r ** 2 * (1 - mu ** 2)
        z2 = (r * mu) ** 2
        return np.maximum(1 - s2 / a ** 2 - z2 / c ** 2, 0.0) ** 2
    return grid.field(fn)


def ring_potential(x_s, x_z, a=1.0, c=0.6):
    """Direct quadrature of int rho(y)/|x-y| dy with the ring kernel."""
    def integrand(z, s):
        rho = max(1 - s * s / a ** 2 - z * z / c ** 2, 0.0) ** 2
        if rho == 0.0:
            return 0.0
        out = 0.0
        for zz in (z, -z):
            d2 = (x_s + s) ** 2 + (x_z - zz) ** 2
            k2 = 4 * x_s * s / d2
            out += 2 * math.pi * s * rho * 2 / math.pi * ellipk(k2) / math.sqrt(d2)
        return out
    return dblquad(integrand, 0, a, 0, lambda s: c * math.sqrt(max(1 - s * s / a ** 2, 0)),
                   epsabs=0, epsrel=1e-10)[0]


def test_far_field_against_direct_quadrature():
    g = Grid(nr=128, nmu=16, r_max=1.5, lmax=16)
    rho = oblate(g)
    for mu in (0.0, 0.5, 1.0):
        s, z = g.r_max * math.sqrt(1 - mu * mu), g.r_max * mu
        ref = ring_potential(s, z)
        U = gravity.potential_at(rho, g.r_max, mu)[0]
        assert U == pytest.approx(ref, rel=1e-3)
    ref0 = ring_potential(0.0, 0.0)
    assert gravity.potential_at(rho, 0.0, 0.0)[0] == pytest.approx(ref0, rel=1e-3)


def test_point_mass_limit():
    # support radius 1 in a ball of radius 20: the quadrupole is ~3e-4 of U
    g = Grid(nr=400, nmu=16, r_max=20.0, lmax=8)
    rho = oblate(g)
    M = gravity.total_mass(rho)
    for mu in (0.0, 0.5, 1.0):
        U = gravity.potential_at(rho, g.r_max, mu)[0]
        assert abs(U - M / g.r_max) / U <= 1e-3


def test_zero_density_zero_potential():
    g = Grid(nr=16, nmu=4, r_max=1.0, lmax=4)
    assert np.all(gravity.potential(g.zeros()).values == 0.0)


def test_mass_linearity_and_positivity():
    g = Grid(nr=64, nmu=8, r_max=1.5, lmax=8)
    rho = oblate(g)
    assert gravity.total_mass(rho * 3.0) == pytest.approx(3.0 * gravity.total_mass(rho),
                                                         rel=1e-15)
    U = gravity.potential(rho).values
    assert np.all(U > 0)
    U3 = gravity.potential(rho * 3.0).values
    assert np.allclose(U3, 3.0 * U, rtol=1e-13)


def test_odd_lmax_rejected():
    with pytest.raises(OddLmaxError):
        Grid(nr=16, nmu=4, r_max=1.0, lmax=3)


def test_support_radii():
    g = Grid(nr=64, nmu=8, r_max=2.0, lmax=4)
    rho = oblate(g, a=1.0, c=0.6)
    sr = gravity.support_radii(rho, 1e-12)
    dr = g.r_max / g.nr
    assert abs(sr["r_eq"] - 1.0) <= dr
    assert abs(sr["r_pole"] - 0.6) <= dr
    assert sr["r_eq"] >= sr["r_pole"]
    with pytest.raises(EmptySupportError):
        gravity.support_radii(g.zeros(), 1e-12)


def test_regrid_preserves_profile():
    g = Grid(nr=64, nmu=8, r_max=1.5, lmax=4)
    rho = oblate(g)
    big = rho.regrid(g.with_radius(3.0))
    assert big.grid.r_max == 3.0
    assert gravity.total_mass(big) == pytest.approx(gravity.total_mass(rho), rel=2e-2)
