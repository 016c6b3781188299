"""Smooth-solution solver for the rescaled compressible system on the reflected slab.

Prognostic unknowns are (rho, m = rho u, rs = rho s); theta is recovered by
Newton inversion of s(rho, .).  The pressure and potential forces are written
as (rho / eps^2m)(grad Phi + s grad theta) with

    Phi = g(rho, theta) - eps^(2(m-1)) F - eps^m G,   g = e + p/rho - theta s,

which equals (1/eps^2m) grad p - rho (grad F / eps^2 + grad G / eps^m).  With
spectral derivatives (skew-adjoint on the grid) and skew-symmetric advection,
mass and the total scaled energy are conserved exactly by the semi-discrete
system, and static states (Phi constant, theta = theta_bar) are exact fixed
points even though G = -|x3| has a kink at x3 = 0.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .equilibrium import invert_Pi, static_rhs
from .limits import CFLError
from .spectral import SpectralGrid, VELOCITY_PARITY, parity_error
from .thermo import relative_entropy


class SolverAbort(RuntimeError):
    """State left the admissible window; ``witness`` locates the offending point."""

    def __init__(self, msg, witness=None):
        super().__init__(msg)
        self.witness = witness or {}


def slab_potentials(grid, centrifugal_on=False):
    """(F, G) sampled on a 3D grid.

    G = -|x3| is the even reflection of -x3 on (0, 1).  F is the periodic
    surrogate sum_i 2 Lh^2 (1 - cos(x_i / Lh)) of |x^h|^2 (equal to leading
    order near the origin); it is zero when the centrifugal force is off.
    """
    x1, x2, x3 = grid.coords()
    G = -np.abs(x3)
    if centrifugal_on:
        L = grid.Lh
        F = 2 * L**2 * ((1 - np.cos(x1 / L)) + (1 - np.cos(x2 / L)))
    else:
        F = np.zeros(grid.shape)
    return F, G


@dataclass
class PrimitiveSystem:
    """Static data of a run: grid, model, scaling, potentials and rho_tilde."""
    grid: SpectralGrid
    model: object
    scaling: object
    F: np.ndarray = None
    G: np.ndarray = None
    rho_tilde: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.grid.ndim != 3:
            raise ValueError("primitive solver needs a 3D grid")
        if self.F is None or self.G is None:
            F, G = slab_potentials(self.grid, self.scaling.centrifugal_on)
            self.F = F if self.F is None else self.F
            self.G = G if self.G is None else self.G
        self.rho_tilde = invert_Pi(self.model, static_rhs(self.scaling, self.F, self.G))

    @property
    def em(self):
        return self.scaling.eps**self.scaling.m

    @property
    def potential(self):
        """eps^(2(m-1)) F + eps^m G (the F part only when enabled)."""
        return static_rhs(self.scaling, self.F, self.G)

    def static_state(self):
        tb = self.model.theta_bar
        rho = self.rho_tilde.copy()
        _, _, s = self.model.eos(rho, tb)
        return PrimitiveState(self, rho, np.zeros((3,) + self.grid.shape), rho * s,
                              theta=np.full(self.grid.shape, tb))

    def from_primitive(self, rho, u, theta):
        rho = np.asarray(rho, dtype=float)
        theta = np.asarray(theta, dtype=float)
        _, _, s = self.model.eos(rho, theta)
        return PrimitiveState(self, rho, rho * np.asarray(u, dtype=float), rho * s,
                              theta=theta.copy())

    def perturbed(self, r1, u0, Theta0):
        """rho = rho_tilde + eps^m r1, theta = theta_bar + eps^m Theta0, u = u0."""
        em = self.em
        return self.from_primitive(self.rho_tilde + em * r1, u0,
                                   self.model.theta_bar + em * Theta0)


@dataclass
class PrimitiveState:
    system: PrimitiveSystem
    rho: np.ndarray
    m: np.ndarray
    rs: np.ndarray
    t: float = 0.0
    sigma_int: float = 0.0     # int_0^t int sigma dx dt
    theta: np.ndarray = None   # warm start for the temperature inversion

    @property
    def u(self):
        return self.m / self.rho

    def copy(self):
        return replace(self, rho=self.rho.copy(), m=self.m.copy(), rs=self.rs.copy(),
                       theta=None if self.theta is None else self.theta.copy())


def recover_theta(model, rho, rs, theta0=None, tol=1e-12, max_iter=50, window=(0.5, 2.0)):
    """theta with s(rho, theta) = rs / rho by Newton in log theta.

    Raises SolverAbort if rho <= 0 or theta leaves [window[0], window[1]] * theta_bar.
    """
    tb = model.theta_bar
    if np.any(~(rho > 0)):
        i = int(np.argmin(rho))
        raise SolverAbort("density lost positivity", {"index": i, "rho": float(rho.flat[i])})
    target = rs / rho
    lt = np.log(np.full(rho.shape, tb) if theta0 is None else theta0)
    lo, hi = np.log(window[0] * tb), np.log(window[1] * tb)
    for _ in range(max_iter):
        th = np.exp(lt)
        _, _, s = model.eos(rho, th)
        _, _, _, s_t = model.partials(rho, th)
        step = (s - target) / (th * s_t)
        lt = np.clip(lt - step, lo - 1.0, hi + 1.0)
        if np.max(np.abs(step)) < tol:
            break
    else:
        raise SolverAbort("temperature inversion did not converge")
    th = np.exp(lt)
    bad = (lt < lo) | (lt > hi)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise SolverAbort("temperature left the essential window",
                          {"index": i, "rho": float(rho.flat[i]), "theta": float(th.flat[i])})
    return th


def _fields(state):
    """Pointwise and derivative fields shared by the rhs and the diagnostics."""
    sysm = state.system
    g, model = sysm.grid, sysm.model
    rho, m, rs = state.rho, state.m, state.rs
    theta = recover_theta(model, rho, rs, state.theta)
    u = m / rho
    du = np.swapaxes(g.grad(u), 0, 1)              # du[i, j] = d_j u_i
    divu = np.trace(du)
    mu, eta, kap = model.mu(theta), model.eta(theta), model.kappa(theta)
    eye = np.eye(3).reshape(3, 3, *([1] * g.ndim))
    D0 = 0.5 * (du + du.transpose(1, 0, *range(2, du.ndim))) - divu / 3.0 * eye
    S = 2 * mu * D0 + eta * divu * eye
    gth = g.grad(theta)
    return dict(theta=theta, u=u, du=du, divu=divu, mu=mu, eta=eta, kappa=kap,
                D0=D0, S=S, gth=gth)


def _div_rows(g, T):
    """Row-wise divergence sum_j d_j T[i, j] with one batched transform pair."""
    Th = g.fft(T)
    return g.ifft(sum(1j * g.kd[j] * Th[:, j] for j in range(T.shape[1])))


def entropy_production(state, fl=None):
    """sigma = (eps^2m S:grad u + kappa |grad theta|^2 / theta) / theta, pointwise >= 0."""
    fl = fl or _fields(state)
    e2m = state.system.em**2
    visc = 2 * fl["mu"] * np.sum(fl["D0"] ** 2, axis=(0, 1)) + fl["eta"] * fl["divu"] ** 2
    heat = fl["kappa"] * np.sum(fl["gth"] ** 2, axis=0) / fl["theta"]
    return (e2m * visc + heat) / fl["theta"]


def primitive_rhs(state, fl=None):
    """Time derivatives (d rho, d m, d rs) and the fields used to build them."""
    sysm = state.system
    g, model, sc = sysm.grid, sysm.model, sysm.scaling
    fl = fl or _fields(state)
    rho, m, rs = state.rho, state.m, state.rs
    theta, u, du = fl["theta"], fl["u"], fl["du"]
    e2m = sysm.em**2

    p, e, s = model.eos(rho, theta)
    Phi = e + p / rho - theta * s - sysm.potential
    gPhi = g.grad(Phi)
    gth = fl["gth"]

    divm = g.div(m)
    # stress minus the conservative half of the skew-symmetric advection,
    # differentiated in one batched divergence: T[i, j] = S_ij - m_j u_i / 2
    T = fl["S"] - 0.5 * u[:, None] * m[None, :]
    divT = _div_rows(g, T)
    adv_rest = 0.5 * (np.einsum("j...,ij...->i...", m, du) + u * divm)
    cor = np.stack([-m[1], m[0], np.zeros_like(m[0])])

    dm = divT - adv_rest - cor / sc.eps - (rho * gPhi + rs * gth) / e2m
    drho = -divm
    sigma = entropy_production(state, fl)
    drs = g.div(fl["kappa"] * gth / theta - rs * u) + sigma
    return drho, dm, drs, sigma, theta


def stable_dt(state, safety=2.5):
    """RK4 step bound from acoustic, advective, inertial and diffusive rates."""
    sysm = state.system
    g, model = sysm.grid, sysm.model
    theta = state.theta if state.theta is not None else recover_theta(model, state.rho, state.rs)
    kmax = np.sqrt(sum(np.max(np.abs(k)) ** 2 for k in g.kd))
    p_r, p_t, s_r, s_t = model.partials(state.rho, theta)
    cs = np.sqrt(np.max(p_r + p_t**2 / (state.rho**2 * s_t)))
    umax = float(np.max(np.sqrt(np.sum(state.u**2, axis=0))))
    nu = float(np.max((4.0 / 3.0 * model.mu(theta) + model.eta(theta)) / state.rho))
    _, e_t = model.energy_partials(state.rho, theta)
    chi = float(np.max(model.kappa(theta) / (state.rho * e_t)))
    rate = cs * kmax / sysm.em + umax * kmax + 1.0 / sysm.scaling.eps + max(nu, chi) * kmax**2
    return safety / rate


def primitive_step(state, dt, check=True):
    """Classical RK4 step of (rho, m, rs) together with int sigma."""
    if check:
        lim = stable_dt(state)
        if dt > lim:
            raise CFLError(f"dt={dt:.3g} exceeds the stability bound {lim:.3g}")
    g = state.system.grid
    dV = g.dV

    def F(st):
        drho, dm, drs, sigma, theta = primitive_rhs(st)
        return drho, dm, drs, float(np.sum(sigma) * dV), theta

    def shift(st, k, h):
        return replace(st, rho=st.rho + h * k[0], m=st.m + h * k[1], rs=st.rs + h * k[2],
                       theta=k[4])

    k1 = F(state)
    k2 = F(shift(state, k1, 0.5 * dt))
    k3 = F(shift(state, k2, 0.5 * dt))
    k4 = F(shift(state, k3, dt))
    w = dt / 6.0
    comb = lambda i: k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]
    return replace(state, rho=state.rho + w * comb(0), m=state.m + w * comb(1),
                   rs=state.rs + w * comb(2), t=state.t + dt,
                   sigma_int=state.sigma_int + w * comb(3), theta=k4[4])


def integrate(state, t_end, dt, callback=None, every=None):
    """Step to t_end with a fixed dt (the last step is shortened to land on t_end)."""
    n = int(np.ceil((t_end - state.t) / dt - 1e-9))
    n = max(n, 0)
    h = (t_end - state.t) / n if n else 0.0
    for i in range(n):
        state = primitive_step(state, h)
        if callback is not None and (every is None or (i + 1) % every == 0 or i == n - 1):
            callback(state)
    return state


# ----------------------------------------------------------------------
# diagnostics

@dataclass
class PrimitiveRecord:
    t: float
    mass: float
    energy: float
    kinetic: float
    relative_entropy: float
    sigma_int: float
    sigma_min: float
    balance_residual: float
    parity_error: float

    def to_dict(self):
        return dict(self.__dict__)


def total_energy(state, theta=None):
    """int (eps^2m rho |u|^2 / 2 + rho e - rho (eps^m G + eps^(2(m-1)) F))."""
    sysm = state.system
    g, model = sysm.grid, sysm.model
    theta = recover_theta(model, state.rho, state.rs, state.theta) if theta is None else theta
    _, e, _ = model.eos(state.rho, theta)
    kin = 0.5 * np.sum(state.m**2, axis=0) / state.rho
    return float(np.sum(sysm.em**2 * kin + state.rho * e - state.rho * sysm.potential) * g.dV)


def primitive_diagnostics(state, reference=None):
    """Conservation and dissipation record.

    ``reference`` is the record at t = 0 of the same run; the balance residual is
    [K + eps^-2m int E](t) - [K + eps^-2m int E](0) + (theta_bar / eps^2m) int int sigma.
    """
    sysm = state.system
    g, model = sysm.grid, sysm.model
    fl = _fields(state)
    theta = fl["theta"]
    kin = float(0.5 * np.sum(np.sum(state.m**2, axis=0) / state.rho) * g.dV)
    rel = float(np.sum(relative_entropy(model, state.rho, theta, sysm.rho_tilde)) * g.dV)
    sigma = entropy_production(state, fl)
    e2m = sysm.em**2
    lyap = kin + rel / e2m
    if reference is None:
        bal = 0.0
    else:
        lyap0 = reference.kinetic + reference.relative_entropy / e2m
        bal = lyap - lyap0 + model.theta_bar / e2m * (state.sigma_int - reference.sigma_int)
    par = max(parity_error(g, state.rho, "even"), parity_error(g, theta, "even"),
              parity_error(g, state.u, VELOCITY_PARITY))
    return PrimitiveRecord(state.t, float(np.sum(state.rho) * g.dV), total_energy(state, theta),
                           kin, rel, state.sigma_int, float(sigma.min()), float(bal), par)
