import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rotstar.eos import (EquationOfState, eval_dh_inverse, eval_enthalpy, eval_h_inverse,
                         validate_eos)
from rotstar.errors import MalformedTableError, NegativeDensityError


@pytest.fixture
def poly():
    return EquationOfState.power_law(1.5, 1.0)


def test_enthalpy_closed_form(poly):
    # h = C gamma/(gamma-1) rho^(gamma-1): 3 at rho=1, gamma=3/2
    assert eval_enthalpy(poly, 1.0) == pytest.approx(3.0, rel=1e-14)
    assert eval_enthalpy(poly, 4.0) == pytest.approx(6.0, rel=1e-14)
    eos = EquationOfState.power_law(1.2, 1.0)
    # 6 * 32^(1/5) = 12
    assert eval_enthalpy(eos, 32.0) == pytest.approx(12.0, rel=1e-13)


def test_h_inverse_closed_form(poly):
    assert eval_h_inverse(poly, 3.0) == pytest.approx(1.0, rel=1e-14)
    eos = EquationOfState.power_law(4.0 / 3.0)
    assert eval_h_inverse(eos, 4.0) == pytest.approx(1.0, rel=1e-13)
    assert eval_h_inverse(poly, -5.0) == 0.0
    assert eval_h_inverse(poly, 0.0) == 0.0


def test_dh_inverse_closed_form(poly):
    # h^-1(u) = (u/3)^2 -> derivative 2u/9
    assert eval_dh_inverse(poly, 3.0) == pytest.approx(2.0 / 3.0, rel=1e-14)
    assert eval_dh_inverse(poly, -1.0) == 0.0


def test_negative_density_rejected(poly):
    with pytest.raises(NegativeDensityError):
        poly.enthalpy(np.array([1.0, -1e-3]))


@pytest.mark.parametrize("gamma", [1.2, 1.5, 1.8])
def test_round_trip_log_grid(gamma):
    eos = EquationOfState.power_law(gamma, 0.7)
    rho = np.logspace(-8, 4, 241)
    back = eos.h_inverse(eos.enthalpy(rho))
    assert np.all(np.abs(back - rho) <= 1e-10 * (1.0 + rho))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10.0, 1e3, allow_nan=False), min_size=2, max_size=40))
def test_h_inverse_monotone(values):
    eos = EquationOfState.power_law(1.5)
    u = np.sort(np.array(values))
    assert np.all(np.diff(eos.h_inverse(u)) >= 0)


@pytest.mark.parametrize("u", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("gamma", [1.3, 1.5, 1.9])
def test_derivative_matches_central_difference(gamma, u):
    eos = EquationOfState.power_law(gamma)
    h = 1e-5 * u
    fd = (eos.h_inverse(u + h) - eos.h_inverse(u - h)) / (2 * h)
    assert abs(eos.dh_inverse(u) - fd) <= 1e-6 * abs(fd)


def _power_table(gamma, lo=-4, hi=4, n=33):
    rho = np.logspace(lo, hi, n)
    return rho, rho ** gamma


def test_sampled_reproduces_power_law():
    # monotone cubic interpolation in log-log is exact on a straight line,
    # so the tabulated EOS must agree with the closed form
    rho, p = _power_table(1.5)
    tab = EquationOfState.sampled(rho, p, 1.5)
    ref = EquationOfState.power_law(1.5)
    r = np.logspace(-6, 6, 61)
    assert np.allclose(tab.pressure(r), ref.pressure(r), rtol=1e-10)
    assert np.allclose(tab.enthalpy(r), ref.enthalpy(r), rtol=1e-10)
    u = np.logspace(-3, 3, 61)
    assert np.allclose(tab.h_inverse(u), ref.h_inverse(u), rtol=1e-9)
    assert np.allclose(tab.dh_inverse(u), ref.dh_inverse(u), rtol=1e-8)


def test_sampled_from_csv(tmp_path):
    rho, p = _power_table(1.5, n=9)
    path = tmp_path / "eos.csv"
    path.write_text("rho,p\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(rho, p)))
    tab = EquationOfState.from_csv(path, 1.5)
    assert tab.enthalpy(1.0) == pytest.approx(3.0, rel=1e-10)


def test_sampled_round_trip():
    rho, p = _power_table(1.6)
    p = p * (1.0 + 0.1 * np.tanh(np.log(rho)))  # not a pure power law
    tab = EquationOfState.sampled(rho, p, 1.6)
    r = np.logspace(-6, 4, 101)
    assert np.all(np.abs(tab.h_inverse(tab.enthalpy(r)) - r) <= 1e-10 * (1.0 + r))


def test_malformed_table():
    rho = [0.1, 1.0, 2.0, 3.0]
    with pytest.raises(MalformedTableError):
        EquationOfState.sampled(rho, [1.0, 2.0, 1.5, 3.0], 1.5)
    with pytest.raises(MalformedTableError):
        EquationOfState.sampled([0.1, 2.0, 1.0, 3.0], [1.0, 2.0, 3.0, 4.0], 1.5)


def test_gamma_out_of_range():
    with pytest.raises(ValueError):
        EquationOfState.power_law(2.5)


def test_validate_power_law_passes():
    rep = validate_eos(EquationOfState.power_law(1.5))
    assert rep.overall, rep.failed
    assert "GAMMA_FOUR_THIRDS" not in rep.warnings


def test_validate_four_thirds_warns():
    rep = validate_eos(EquationOfState.power_law(4.0 / 3.0))
    assert rep.overall
    assert "GAMMA_FOUR_THIRDS" in rep.warnings


def test_validate_condition_b():
    # h/p' = rho^(g-1) g/(g-1) / (g rho^(g-1)) = 1/(g-1): in (1, 2] iff g >= 3/2
    assert validate_eos(EquationOfState.power_law(1.6), check_condition_b=True)["condition_b"].passed
    assert not validate_eos(EquationOfState.power_law(1.3),
                            check_condition_b=True)["condition_b"].passed
