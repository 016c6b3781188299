import numpy as np
import pytest
from hypothesis import given, strategies as st

from nsflab.equilibrium import EpsilonScaling
from nsflab.limits import (CFLError, OBState, QGState, boussinesq_gradient_residual,
                           decaying_integral, lawson_rk4, ob_divergence, ob_step,
                           ob_theta_parity_error, qg_advance, qg_energy, qg_step, recover_R,
                           taylor_green, upsilon_step)
from nsflab.primitive import slab_potentials
from nsflab.spectral import SpectralGrid, enforce_parity, leray_project

A0 = 10.0 / 3.0


@pytest.fixture(scope="module")
def gh():
    return SpectralGrid(64)


def _rand_q(g, seed, band=6):
    rng = np.random.default_rng(seed)
    q = g.band_limit(rng.standard_normal(g.shape), band)
    q = q - q.mean()
    return q / np.max(np.abs(q))


def test_lawson_linear_exact():
    L = np.array([-3.0, -0.1, 0.0])
    u = lawson_rk4(np.ones(3), L, lambda x: 0 * x, 0.7)
    np.testing.assert_allclose(u, np.exp(0.7 * L), rtol=1e-15)


@given(st.floats(-700.0, 1.0), st.floats(1e-3, 1.0))
def test_decaying_integral_exact_for_cubics(rate, dt):
    # d(s) = exp(rate s) v(s), v cubic
    c = np.array([0.3, -1.2, 0.7, 2.0])
    v = lambda s: c[0] + c[1] * s + c[2] * s**2 + c[3] * s**3
    dv = lambda s: c[1] + 2 * c[2] * s + 3 * c[3] * s**2
    got = decaying_integral(v(0), dv(0), np.exp(rate * dt) * v(dt), np.exp(rate * dt) * dv(dt), rate, dt)
    from scipy.integrate import quad
    ref = quad(lambda s: np.exp(rate * s) * v(s), 0, dt, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
    assert got == pytest.approx(ref, rel=1e-9, abs=1e-12)


def test_qg_single_mode_decay(gh):
    x1, _ = gh.coords()
    s = QGState(gh, np.cos(x1), A0, 1.0)
    for _ in range(100):
        s = qg_step(s, 0.01)
    assert np.max(np.abs(s.q)) == pytest.approx(np.exp(-1 / 1.3), abs=1e-6)
    assert np.exp(-1 / 1.3) == pytest.approx(0.46337, abs=1e-5)


def test_qg_zero_and_inviscid_mode(gh):
    s = qg_step(QGState(gh, np.zeros(gh.shape), A0, 1.0), 0.1)
    assert np.all(s.q == 0)
    x1, x2 = gh.coords()
    q0 = np.cos(x1 + x2)
    s = QGState(gh, q0, A0, 0.0)
    for _ in range(20):
        s = qg_step(s, 0.05)
    assert np.max(np.abs(s.q - q0)) <= 1e-10


def test_qg_energy_law(gh):
    s = QGState(gh, _rand_q(gh, 1), A0, 1.0)
    E0 = qg_energy(s)
    n = 200
    for _ in range(n):
        s = qg_step(s, 0.5 / n)
    assert abs(qg_energy(s) - E0 + s.dissipation) <= 1e-8 * E0
    assert s.dissipation > 0


def test_qg_cfl(gh):
    s = QGState(gh, 50 * _rand_q(gh, 2), A0, 1.0)
    with pytest.raises(CFLError):
        qg_step(s, 1.0)


def test_upsilon_mean_and_transport():
    g3 = SpectralGrid(16, 8)
    gh = g3.horizontal()
    rng = np.random.default_rng(5)
    Y = enforce_parity(g3, g3.band_limit(rng.standard_normal(g3.shape), 4), "even")
    q = 0.3 * _rand_q(gh, 3, 4)
    for kappa in (1.0, 0.0):
        s = QGState(gh, q, A0, 1.0, c_p=15 / 8, alpha=3 / 8, kappa=kappa, Upsilon=Y, grid3=g3)
        for _ in range(50):
            s = upsilon_step(s, 0.02)
        assert abs(s.Upsilon.mean() - Y.mean()) <= 1e-10
        if kappa == 0:
            assert abs(g3.norm(s.Upsilon) / g3.norm(Y) - 1) <= 1e-8


def test_upsilon_single_mode_decay():
    g3 = SpectralGrid(16, 8)
    x1, x2, x3 = g3.coords()
    Y = np.cos(x1) * np.cos(x2)
    s = QGState(g3.horizontal(), np.zeros((16, 16)), A0, 1.0, c_p=15 / 8, alpha=3 / 8, kappa=2.0,
                Upsilon=Y, grid3=g3)
    for _ in range(10):
        s = upsilon_step(s, 0.1)
    np.testing.assert_allclose(s.Upsilon, Y * np.exp(-2.0 * 2 / (15 / 8)), atol=1e-8)
    with pytest.raises(ValueError):
        upsilon_step(QGState(g3.horizontal(), np.zeros((16, 16)), A0, 1.0), 0.1)


def test_qg_advance_couples_fields():
    g3 = SpectralGrid(16, 8)
    gh = g3.horizontal()
    s = QGState(gh, 0.3 * _rand_q(gh, 8, 4), A0, 1.0, 15 / 8, 3 / 8, 1.0,
                Upsilon=np.zeros(g3.shape), grid3=g3)
    s = qg_advance(s, 0.05)
    assert np.max(np.abs(s.Upsilon)) > 0 and s.t == pytest.approx(0.05)


def test_taylor_green_decay(coeffs):
    gh, g3 = SpectralGrid(32), SpectralGrid(32, 8)
    U = taylor_green(gh)
    st = OBState(gh, g3, U, np.zeros(g3.shape), coeffs, 1.0, 1.0)
    sc = EpsilonScaling(0.1, 2.0)
    for _ in range(50):
        st = ob_step(st, 0.01, sc)
        assert ob_divergence(st) <= 1e-12
    assert gh.norm(st.U) / gh.norm(U) == pytest.approx(np.exp(-1.0), abs=1e-6)


def test_ob_theta_diffusion(coeffs):
    gh, g3 = SpectralGrid(16), SpectralGrid(16, 8)
    x1, x2, x3 = g3.coords()
    Th = np.cos(x1) * np.cos(np.pi * x3)
    st = OBState(gh, g3, np.zeros((2, 16, 16)), Th, coeffs, 1.0, 1.0)
    for _ in range(10):
        st = ob_step(st, 0.05, EpsilonScaling(0.1, 2.0))
    rate = (1 + np.pi**2) / coeffs.c_p
    np.testing.assert_allclose(st.Theta, Th * np.exp(-rate * 0.5), atol=1e-10)


def test_ob_random_invariants(coeffs):
    gh, g3 = SpectralGrid(32), SpectralGrid(32, 8)
    rng = np.random.default_rng(6)
    F3, G = slab_potentials(g3, True)
    U = leray_project(gh, np.stack([gh.band_limit(rng.standard_normal(gh.shape), 4) for _ in range(2)]))
    U /= np.max(np.abs(U))
    Th = enforce_parity(g3, g3.band_limit(rng.standard_normal(g3.shape), 4), "even")
    st = OBState(gh, g3, U, Th, coeffs, 1.0, 1.0, F3[..., 0], G)
    for _ in range(20):
        st = ob_step(st, 0.01, EpsilonScaling(0.1, 2.0, True))
        assert ob_divergence(st) <= 1e-12
        assert ob_theta_parity_error(st) <= 1e-12


def test_recover_R_examples(coeffs):
    g3 = SpectralGrid(16, 8)
    _, G = slab_potentials(g3)
    sc = EpsilonScaling(0.1, 1.5)
    R = recover_R(np.zeros(g3.shape), coeffs, sc, G)
    x3 = g3.coords()[2]
    np.testing.assert_allclose(R, (0.5 - np.abs(x3)) * 3 / 8, atol=1e-14)
    assert R[0, 0, 4] == pytest.approx(0.1875)        # sample x3 = 0
    Th = (G - G.mean()) / coeffs.d_theta_p
    assert np.max(np.abs(recover_R(Th, coeffs, sc, G))) <= 1e-14
    F3, _ = slab_potentials(g3, True)
    sc2 = EpsilonScaling(0.1, 2.0, True)
    Th = enforce_parity(g3, np.random.default_rng(0).standard_normal(g3.shape), "even")
    R = recover_R(Th, coeffs, sc2, G, F3[..., 0])
    assert boussinesq_gradient_residual(g3, R, Th, coeffs, sc2, G, F3[..., 0]) <= 1e-12
    with pytest.raises(ValueError):
        recover_R(Th, coeffs, sc, G, gauge="other")
