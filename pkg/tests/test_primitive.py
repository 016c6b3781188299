import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, strategies as st

from nsflab.equilibrium import EpsilonScaling
from nsflab.limits import CFLError
from nsflab.primitive import (PrimitiveSystem, SolverAbort, entropy_production, integrate,
                              primitive_diagnostics, primitive_rhs, primitive_step, recover_theta,
                              slab_potentials, stable_dt, total_energy)
from nsflab.spectral import SpectralGrid, VELOCITY_PARITY, enforce_parity
from nsflab.thermo import ThermoModel


def _smooth(g, rng, parity, band=2):
    f = enforce_parity(g, g.band_limit(rng.standard_normal(g.shape), band), parity)
    return f / np.max(np.abs(f))


def _perturbed(sysm, seed=0, amp=0.3):
    g = sysm.grid
    rng = np.random.default_rng(seed)
    r1 = _smooth(g, rng, "even")
    T0 = _smooth(g, rng, "even")
    u0 = amp * np.stack([_smooth(g, rng, p) for p in VELOCITY_PARITY])
    return sysm.perturbed(amp * (r1 - r1.mean()), u0, amp * (T0 - T0.mean()))


@pytest.fixture(scope="module")
def grid():
    return SpectralGrid(8, 8)


def test_slab_potentials(grid):
    F, G = slab_potentials(grid, True)
    assert np.all(F >= 0) and G.min() >= -1 and G.max() <= 0
    assert np.all(slab_potentials(grid, False)[0] == 0)
    x1, x2, x3 = grid.coords()
    np.testing.assert_allclose(G, -np.abs(x3))


@pytest.mark.parametrize("eps", [1.0, 0.5, 0.2])
@pytest.mark.parametrize("cent", [False, True])
def test_static_state_rhs_vanishes(grid, model, eps, cent):
    sysm = PrimitiveSystem(grid, model, EpsilonScaling(eps, 1.0, cent))
    drho, dm, drs, sigma, theta = primitive_rhs(sysm.static_state())
    assert max(np.max(np.abs(drho)), np.max(np.abs(dm)), np.max(np.abs(drs))) <= 1e-10
    assert np.max(np.abs(sigma)) <= 1e-20
    d = primitive_diagnostics(sysm.static_state())
    assert abs(d.relative_entropy) <= 1e-12 and 0.0 <= d.sigma_min <= 1e-20


def test_uniform_state_momentum_rhs(model):
    g = SpectralGrid(8, 8)
    sc = EpsilonScaling(0.5, 1.0, False)
    F, G = np.zeros(g.shape), np.zeros(g.shape)
    sysm = PrimitiveSystem(g, model, sc, F, G)
    u = np.zeros((3,) + g.shape)
    u[0] = 0.4
    st0 = sysm.from_primitive(np.ones(g.shape), u, np.ones(g.shape))
    drho, dm, drs, _, _ = primitive_rhs(st0)
    assert np.max(np.abs(drho)) <= 1e-14 and np.max(np.abs(drs)) <= 1e-14
    # only Coriolis survives: -(1/eps) e3 x m = (0, -m1/eps, 0)
    np.testing.assert_allclose(dm[1], -0.4 / 0.5, atol=1e-13)
    np.testing.assert_allclose(dm[[0, 2]], 0.0, atol=1e-13)


@given(st.integers(0, 10**6), st.sampled_from([1.0, 0.5, 0.2]), st.sampled_from([1.0, 2.0]))
def test_entropy_production_nonnegative(seed, eps, m):
    g = SpectralGrid(8, 4)
    sysm = PrimitiveSystem(g, ThermoModel(eta_bar=0.5), EpsilonScaling(eps, m))
    st0 = _perturbed(sysm, seed, amp=0.3)
    assert np.min(entropy_production(st0)) >= 0.0


def test_recover_theta_roundtrip(model, rng):
    rho = rng.uniform(0.7, 1.5, 50)
    theta = rng.uniform(0.6, 1.8, 50)
    _, _, s = model.eos(rho, theta)
    np.testing.assert_allclose(recover_theta(model, rho, rho * s), theta, rtol=1e-12)
    with pytest.raises(SolverAbort):
        recover_theta(model, -rho, rho * s)
    _, _, s_hot = model.eos(rho, 5.0 * np.ones_like(rho))
    with pytest.raises(SolverAbort) as exc:
        recover_theta(model, rho, rho * s_hot)
    assert "theta" in exc.value.witness


def test_static_fixed_point_over_time(grid, model):
    sysm = PrimitiveSystem(grid, model, EpsilonScaling(0.5, 1.0, True))
    s0 = sysm.static_state()
    s1 = integrate(s0, 0.2, 0.9 * stable_dt(s0))
    assert np.max(np.abs(s1.rho - s0.rho)) <= 1e-8 and np.max(np.abs(s1.m)) <= 1e-8


def test_mass_parity_sigma(grid, model):
    sysm = PrimitiveSystem(grid, model, EpsilonScaling(0.5, 1.0, True))
    s = _perturbed(sysm)
    ref = primitive_diagnostics(s)
    dt = 0.8 * stable_dt(s)
    for _ in range(20):
        s = primitive_step(s, dt)
        d = primitive_diagnostics(s, ref)
        assert abs(d.mass - ref.mass) <= 1e-12 * ref.mass
        assert d.sigma_min >= 0 and d.parity_error <= 1e-12
    assert s.sigma_int > 0


def test_cfl_guard(grid, model):
    sysm = PrimitiveSystem(grid, model, EpsilonScaling(0.2, 1.0))
    s = sysm.static_state()
    with pytest.raises(CFLError):
        primitive_step(s, 10 * stable_dt(s))


def _order(sysm, t_end, dts):
    s0 = _perturbed(sysm)
    outs = [integrate(s0, t_end, dt) for dt in dts]
    e1 = np.max(np.abs(outs[0].m - outs[1].m))
    e2 = np.max(np.abs(outs[1].m - outs[2].m))
    return np.log2(e1 / e2), s0, outs


def test_rk4_self_convergence(grid, model):
    sysm = PrimitiveSystem(grid, model, EpsilonScaling(0.5, 1.0, True))
    dt = 0.9 * stable_dt(_perturbed(sysm))
    order, _, _ = _order(sysm, 0.1, [dt, dt / 2, dt / 4])
    assert order >= 3.8


def test_inviscid_energy_fourth_order(grid):
    inv = ThermoModel(mu_bar=0.0, eta_bar=0.0, kappa_bar=0.0)
    sysm = PrimitiveSystem(grid, inv, EpsilonScaling(0.5, 1.0, True))
    s0 = _perturbed(sysm)
    E0 = total_energy(s0)
    dt = 0.9 * stable_dt(s0)
    drifts = [abs(total_energy(integrate(s0, 0.1, h)) / E0 - 1) for h in (dt, dt / 2, dt / 4)]
    orders = np.log2(np.array(drifts[:-1]) / np.array(drifts[1:]))
    assert np.all(orders >= 3.5)


def test_balance_residual_small(grid, model):
    sysm = PrimitiveSystem(grid, model, EpsilonScaling(0.5, 1.0, True))
    s0 = _perturbed(sysm)
    ref = primitive_diagnostics(s0)
    s1 = integrate(s0, 0.1, 1e-3)
    d = primitive_diagnostics(s1, ref)
    lyap0 = ref.kinetic + ref.relative_entropy / sysm.em**2
    assert abs(d.balance_residual) <= 1e-6 * lyap0


def test_system_needs_3d(model):
    with pytest.raises(ValueError):
        PrimitiveSystem(SpectralGrid(8), model, EpsilonScaling(0.5))
