import numpy as np
import pytest
from hypothesis import given, strategies as st

from nsflab.thermo import (CallableP, DomainError, EssentialWindow, StructuralError, ThermoModel,
                           TabulatedP, eos_eval, eos_partials, fd_partials, gibbs_residual,
                           linearization_coeffs, linearize, make_P, relative_entropy,
                           sandwich_constants, structural_audit)


def test_default_eos_closed_form(model):
    p, e, s = eos_eval(model, 1.0, 1.0)
    assert p == pytest.approx(2.0, abs=1e-14)
    assert e == pytest.approx(3.0, abs=1e-14)
    assert s == pytest.approx(0.0, abs=1e-14)
    p, _, _ = eos_eval(model, 2.0, 1.0)
    assert p == pytest.approx(2.0 + 2.0 ** (5 / 3), rel=1e-14)
    assert p == pytest.approx(5.1748, abs=1e-4)


@given(st.floats(0.3, 3.0), st.floats(0.0, 2.0))
def test_entropy_gauge(theta_bar, a):
    m = ThermoModel(a=a, theta_bar=theta_bar)
    _, _, s = eos_eval(m, 1.0, theta_bar)
    assert abs(s) <= 1e-12


def test_domain_errors(model):
    with pytest.raises(DomainError):
        eos_eval(model, 0.0, 1.0)
    with pytest.raises(DomainError):
        eos_partials(model, 1.0, -1.0)
    with pytest.raises(ValueError):
        ThermoModel(a=-1.0)


def test_default_partials(model):
    p_r, p_t, s_r, s_t = eos_partials(model, 1.0, 1.0)
    np.testing.assert_allclose([p_r, p_t, s_r, s_t], [8 / 3, 1.0, -1.0, 1.5], atol=1e-14)
    _, p_t, _, _ = eos_partials(ThermoModel(a=1.0), 1.0, 1.0)
    assert p_t == pytest.approx(1 + 4 / 3, abs=1e-14)


def test_compressibility_positive(model, rng):
    rho, theta = rng.uniform(0.1, 10, 100), rng.uniform(0.1, 10, 100)
    assert np.all(eos_partials(model, rho, theta)[0] > 0)


@given(st.floats(0.1, 10), st.floats(0.1, 10), st.floats(0.0, 1.0))
def test_partials_match_finite_differences(rho, theta, a):
    m = ThermoModel(a=a)
    exact = np.array(eos_partials(m, rho, theta))
    fd = np.array(fd_partials(m, rho, theta))
    assert np.all(np.abs(exact - fd) <= 1e-6 * np.maximum(1.0, np.abs(exact)))


def test_default_linearization_coeffs(coeffs):
    assert coeffs.A == pytest.approx(10 / 3, abs=1e-12)
    assert coeffs.B == pytest.approx(2 / 3, abs=1e-12)
    assert coeffs.alpha == pytest.approx(3 / 8, abs=1e-12)
    assert coeffs.c_p == pytest.approx(15 / 8, abs=1e-12)


@given(st.floats(0.0, 2.0), st.floats(0.5, 2.0))
def test_relnum_identities(a, theta_bar):
    c = linearization_coeffs(ThermoModel(a=a, theta_bar=theta_bar))
    r1, r2 = c.relnum_residuals()
    assert abs(r1) <= 1e-12 * max(1, abs(c.d_rho_p)) and abs(r2) <= 1e-12 * max(1, abs(c.d_theta_p))
    assert c.A > 0
    assert c.A == pytest.approx(c.d_rho_p + c.d_theta_p**2 / c.d_theta_s, rel=1e-14)


def test_gibbs_residual_points(model, rng):
    assert gibbs_residual(model, 1.0, 1.0) <= 1e-8
    assert gibbs_residual(model, 2.0, 0.5) <= 1e-8
    rho, theta = rng.uniform(0.1, 10, 1000), rng.uniform(0.1, 10, 1000)
    assert gibbs_residual(model, rho, theta) <= 1e-8
    assert gibbs_residual(ThermoModel(a=0.7), rho, theta) <= 1e-8


class _ScaledEnergy(ThermoModel):
    def eos(self, rho, theta):
        p, e, s = super().eos(rho, theta)
        return p, 1.01 * e, s


def test_gibbs_detects_corrupted_energy():
    assert gibbs_residual(_ScaledEnergy(), 1.0, 1.0) > 1e-3


def test_relative_entropy_values(model):
    assert relative_entropy(model, 1.0, 1.0, 1.0) == pytest.approx(0.0, abs=1e-14)
    # second-order Taylor: (1/2) d_rho p / rho * d^2
    assert relative_entropy(model, 1.01, 1.0, 1.0) == pytest.approx(0.5 * 8 / 3 * 1e-4, rel=0.05)


def test_relative_entropy_sandwich(model, rng):
    c1, c2 = sandwich_constants(model)
    assert 0 < c1 <= c2 < np.inf
    w = EssentialWindow()
    rho, theta = w.sample(1000, rng)
    E = relative_entropy(model, rho, theta, 1.0)
    d2 = (rho - 1) ** 2 + (theta - 1) ** 2
    # grid-fitted constants with a small margin for off-grid samples
    assert np.all(E >= 0.9 * c1 * d2) and np.all(E <= 1.1 * c2 * d2)


@given(st.floats(1 / 3 + 1e-3, 2.0), st.floats(0.5, 2.0), st.floats(0.5, 1.5))
def test_relative_entropy_nonnegative(rho, theta, rho_tilde):
    assert relative_entropy(ThermoModel(), rho, theta, rho_tilde) >= -1e-14


def test_essential_window():
    w = EssentialWindow(rho_star=0.5, theta_bar=1.0)
    assert 0 < w.rho_lo < 1 < w.rho_hi
    assert (w.rho_lo, w.theta_lo, w.theta_hi) == (pytest.approx(1 / 3), 0.5, 2.0)
    with pytest.raises(ValueError):
        EssentialWindow(rho_star=0.0)


def test_audit_default_passes(model):
    rep = structural_audit(model)
    assert rep.passed and rep.failures() == []
    Z = np.logspace(-3, 6, 50)
    P = model.P
    np.testing.assert_allclose((5 / 3 * P(Z) - Z * P.deriv(Z)) / Z, 2 / 3, rtol=1e-10)
    assert rep.check("tail limit").value == pytest.approx(1.0, rel=1e-3)


def test_audit_flags_nonmonotone_P():
    m = ThermoModel(P=CallableP(lambda z: z - z**2, lambda z: 1 - 2 * z))
    rep = structural_audit(m, Z_grid=np.linspace(0.05, 2.0, 40))
    chk = rep.check("P'>0")
    assert not chk.passed
    # P' = 1 - 2Z is negative past Z = 1/2; the grid point 0.6 is among the witnesses
    assert all(w > 0.5 for w in chk.witnesses)
    assert any(abs(w - 0.6) < 1e-12 for w in chk.witnesses)
    with pytest.raises(StructuralError):
        linearization_coeffs(m)


def test_audit_transport_bounds(model):
    rep = structural_audit(model)
    assert rep.check("viscosity bounds").passed
    np.testing.assert_allclose(model.mu(np.array([0.0, 1.0, 3.0])), [1.0, 2.0, 4.0])
    assert not structural_audit(ThermoModel(mu_bar=0.0)).check("viscosity bounds").passed
    with pytest.raises(ValueError):
        structural_audit(model, Z_grid=[1.0, 0.5])


def test_tabulated_P_matches_default(rng):
    Z = np.logspace(-3, 3, 200)
    tab = ThermoModel(P=make_P({"Z": Z.tolist(), "P": (Z + Z ** (5 / 3)).tolist()}))
    assert isinstance(tab.P, TabulatedP)
    assert structural_audit(tab).eos_passed
    rho, theta = rng.uniform(0.5, 2, 5), rng.uniform(0.5, 2, 5)
    np.testing.assert_allclose(tab.eos(rho, theta)[0], ThermoModel().eos(rho, theta)[0], rtol=1e-4)
    with pytest.raises(ValueError):
        make_P("nonsense")


def test_linearize_linear_G_exact(model):
    r = 1 + 0.01 * np.linspace(-1, 1, 11)
    res = linearize(model, lambda rho, th: 3.0 * rho, r, np.ones_like(r), 0.1, 1)
    assert res.difference_l2 <= 1e-8
    with pytest.raises(ValueError):
        linearize(model, lambda rho, th: rho, r, r, 0.0, 1)


@pytest.mark.parametrize("m", [1.0, 1.5, 2.0])
def test_linearize_slope_for_pressure(model, m):
    from nsflab.rates import fit_rate
    G = lambda rho, th: model.eos(rho, th)[0]
    eps = np.array([0.2, 0.1, 0.05, 0.025])
    diffs = []
    for e in eps:
        res = linearize(model, G, 1 + e**m * 0.1, 1.0, e, m)
        assert res.n_outside_window == 0
        diffs.append(res.difference_l2)
    assert fit_rate(eps, diffs, discard=False).slope == pytest.approx(m, abs=0.05)
