import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from rotstar.errors import InadmissibleMomentumError, InadmissibleOmegaError
from rotstar.gravity import AxisymmetricField, Grid
from rotstar.rotation import (MomentumLaw, OmegaLaw, centrifugal_potential, cylinder_mass,
                              induced_momentum_law, j_eval, momentum_integral,
                              require_admissible_momentum, require_admissible_omega,
                              validate_momentum, validate_omega)

from test_gravity import uniform_sphere


def test_inverse_poly_closed_form():
    law = OmegaLaw.inverse_poly(1.0, 2.0)
    r = np.linspace(0, 20, 81)
    assert np.allclose(j_eval(law, r), r ** 2 / (2 * (1 + r ** 2)), rtol=1e-13, atol=1e-16)
    assert law.j(1.0) == pytest.approx(0.25, rel=1e-14)
    assert law.j_sup == pytest.approx(0.5, rel=1e-14)
    assert law.j(0.0) == 0.0


@pytest.mark.parametrize("q", [1.0, 1.75, 2.0, 3.0])
def test_inverse_poly_against_quadrature(q):
    law = OmegaLaw.inverse_poly(0.7, q)
    f = lambda s: s * 0.7 * (1 + s * s) ** (-q)
    for r in (0.3, 1.0, 5.0):
        assert law.j(r) == pytest.approx(quad(f, 0, r, epsrel=1e-13)[0], rel=1e-10)
    if q > 1:
        assert law.j_sup == pytest.approx(quad(f, 0, np.inf, epsrel=1e-13)[0], rel=1e-10)
        assert law.tail(3.0) == pytest.approx(law.j_sup - law.j(3.0), rel=1e-12)
        # tail = j_sup - j without cancellation far out
        seg = quad(f, 1e3, 1e5, epsrel=1e-13)[0]
        assert law.tail(1e3) - law.tail(1e5) == pytest.approx(seg, rel=1e-9)


def test_exponential_closed_form():
    w0, s0 = 1.3, 0.8
    law = OmegaLaw.exponential(w0, s0)
    r = np.array([0.1, 1.0, 4.0])
    x = 2 * r / s0
    exact = w0 ** 2 * (s0 / 2) ** 2 * (1 - np.exp(-x) * (1 + x))
    assert np.allclose(law.j(r), exact, rtol=1e-12)
    assert law.j_sup == pytest.approx(w0 ** 2 * s0 ** 2 / 4, rel=1e-12)
    assert validate_omega(law).overall


def test_table_law_matches_closed_form():
    r = np.linspace(0, 30, 601)
    law = OmegaLaw.from_table(r, np.sqrt((1 + r ** 2) ** -2.0))
    rr = np.array([0.5, 1.0, 3.0, 10.0])
    assert np.allclose(law.j(rr), rr ** 2 / (2 * (1 + rr ** 2)), rtol=1e-5)
    assert law.j_sup == pytest.approx(0.5, rel=1e-4)
    assert validate_omega(law).overall


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0, 50, allow_nan=False), min_size=2, max_size=30),
       st.floats(1.6, 4.0))
def test_j_monotone_bounded(rs, q):
    law = OmegaLaw.inverse_poly(1.0, q)
    r = np.sort(np.array(rs))
    j = law.j(r)
    assert np.all(np.diff(j) >= -1e-15)
    assert np.all(j <= law.j_sup * (1 + 1e-14))


def test_zero_rotation():
    law = OmegaLaw.zero()
    assert np.all(law.j(np.linspace(0, 5, 6)) == 0.0)


def test_validate_inverse_poly():
    assert validate_omega(OmegaLaw.inverse_poly(1.0, 2.0)).overall
    rep = validate_omega(OmegaLaw.inverse_poly(1.0, 1.25))
    assert rep.failed() == ["omega_decay"]
    with pytest.raises(InadmissibleOmegaError):
        require_admissible_omega(OmegaLaw.inverse_poly(1.0, 1.25))


def test_rigid_rotation_not_integrable():
    rep = validate_omega(OmegaLaw.inverse_poly(1.0, 0.0))
    assert not rep["omega_integrable"].passed


def test_compact_omega_rejected():
    r = np.linspace(0, 3, 31)
    w = np.where(r < 2, 1 - (r / 2) ** 2, 0.0)
    rep = validate_omega(OmegaLaw.from_table(r, w))
    assert not rep["omega_not_compact"].passed


def test_cylinder_mass_uniform_sphere():
    R, rho0 = 1.0, 1.0
    g = Grid(nr=256, nmu=32, r_max=2.0, lmax=4)
    rho = uniform_sphere(g, R, rho0)
    M = 4 * math.pi / 3 * rho0 * R ** 3
    s = np.array([0.2, 0.5, 0.8, 0.95])
    exact = 4 * math.pi / 3 * rho0 * (R ** 3 - (R ** 2 - s ** 2) ** 1.5)
    assert np.allclose(cylinder_mass(rho, s), exact, rtol=1e-3)
    assert cylinder_mass(rho, 0.0)[0] == 0.0
    big = cylinder_mass(rho, np.array([1.0, 1.5, 3.0]))
    assert np.allclose(big, M, rtol=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_cylinder_mass_monotone_bounded(seed):
    g = Grid(nr=24, nmu=6, r_max=1.0, lmax=2)
    vals = np.random.default_rng(seed).uniform(0, 1, (g.nr, g.nmu))
    rho = AxisymmetricField(g, vals)
    s = np.linspace(0, 1.2, 97)
    m = cylinder_mass(rho, s)
    total = float(g.shell_volume @ (vals @ g.mu_weights))
    assert np.all(np.diff(m) >= -1e-14 * total)
    assert m[-1] == pytest.approx(total, rel=1e-12)
    assert np.all(m <= total * (1 + 1e-12))


def _exterior_error(nr, lo):
    g = Grid(nr=nr, nmu=16, r_max=2.0, lmax=4)
    rho = uniform_sphere(g, 1.0)
    M = 4 * math.pi / 3
    kappa = 0.7
    cf = centrifugal_potential(g, "angular_momentum", MomentumLaw.power(1.0, 2.0), rho, kappa)
    cyl = g.cyl_radius
    out = cyl > lo
    return np.max(np.abs(cf[out] / (-kappa ** 2 * M ** 2 / (2 * cyl[out] ** 2)) - 1))


def test_momentum_exterior_closed_form():
    # m(s) = M for s > R, so the term is -kappa^2 M^2 / (2 s^2) there; the
    # spline of L(m(s)) s^-3 feels the kink of m at s = R only nearby
    assert _exterior_error(128, 1.0) <= 1e-4
    assert _exterior_error(128, 1.1) <= 1e-8
    errs = [_exterior_error(nr, 1.0) for nr in (64, 128, 256)]
    assert errs[2] < errs[1] < errs[0]
    g = Grid(nr=32, nmu=4, r_max=2.0, lmax=2)
    T = momentum_integral(uniform_sphere(g, 1.0), MomentumLaw.power(1.0, 2.0))
    M = 4 * math.pi / 3
    assert float(T(g.r_max)) == pytest.approx(M ** 2 / (2 * g.r_max ** 2), rel=1e-12)


def test_velocity_mode_value():
    g = Grid(nr=8, nmu=4, r_max=2.0, lmax=2)
    law = OmegaLaw.inverse_poly(1.0, 2.0)
    cf = centrifugal_potential(g, "angular_velocity", law, kappa=2.0)
    assert np.allclose(cf, 4 * law.j(g.cyl_radius))
    # kappa^2 j(1) = 4 * 0.25
    assert 4 * law.j(1.0) == pytest.approx(1.0)
    assert np.all(centrifugal_potential(g, "angular_velocity", law, kappa=0.0) == 0.0)


def test_momentum_validation():
    assert validate_momentum(MomentumLaw.power(2.0, 2.0)).overall
    assert not validate_momentum(MomentumLaw.power(1.0, 1.0)).overall
    m = np.linspace(0, 1, 11)
    assert validate_momentum(MomentumLaw.from_table(m, m ** 2)).overall
    with pytest.raises(InadmissibleMomentumError):
        require_admissible_momentum(MomentumLaw.from_table(m, m + 0.1))  # L(0) != 0
    with pytest.raises(InadmissibleMomentumError):
        require_admissible_momentum(MomentumLaw.from_table(m, m))  # L'(0) != 0


def test_induced_law_reproduces_centrifugal_term():
    # With L(m(s)) = s^4 omega^2 the two rotation terms differ by a constant
    # wherever the cylinder mass is still increasing.
    g = Grid(nr=256, nmu=32, r_max=2.0, lmax=4)
    rho = uniform_sphere(g, 1.0)
    law = OmegaLaw.inverse_poly(1.0, 2.0)
    L = induced_momentum_law(rho, law)
    assert validate_momentum(L).overall
    T = momentum_integral(rho, L)
    s = np.array([0.1, 0.3, 0.6, 0.9])
    lhs = -T(s) + T(s[0])
    rhs = law.j(s) - law.j(s[0])
    assert np.allclose(lhs, rhs, atol=1e-8)
