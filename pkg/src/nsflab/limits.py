"""Limit systems: quasi-geostrophic (m = 1) and Oberbeck-Boussinesq (m > 1).

All solvers use the Lawson integrating-factor RK4 scheme: the linear
dissipative part is integrated exactly per Fourier mode and the advective
part is explicit and 2/3-dealiased.
"""
from dataclasses import dataclass, replace

import numpy as np

from .spectral import SpectralGrid, leray_project, parity_error


class CFLError(RuntimeError):
    pass


def lawson_rk4(uh, L, N, dt, stages=False):
    """One Lawson RK4 step for u' = L u + N(u) with diagonal L (spectral).

    With ``stages`` also returns the stage values (t, t+h/2, t+h/2, t+h).
    """
    E2 = np.exp(0.5 * dt * L)
    E = E2 * E2
    a = N(uh)
    u1 = E2 * (uh + 0.5 * dt * a)
    b = N(u1)
    u2 = E2 * uh + 0.5 * dt * b
    c = N(u2)
    u3 = E * uh + dt * E2 * c
    d = N(u3)
    out = E * uh + dt / 6.0 * (E * a + 2.0 * E2 * (b + c) + d)
    if stages:
        return out, (uh, u1, u2, u3)
    return out


def _exp_moments(z, jmax=3):
    """M_j = int_0^1 tau^j exp(z tau) d tau for j = 0..jmax (elementwise)."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 0.5
    safe = np.where(small, 1.0, z)
    ez = np.exp(np.where(small, 0.0, z))
    M = [(ez - 1) / safe]
    for j in range(1, jmax + 1):
        M.append((ez - j * M[-1]) / safe)
    # power series where the recursion cancels
    zz = np.where(small, z, 0.0)
    S = [np.zeros_like(zz) for _ in range(jmax + 1)]
    term = np.ones_like(zz)
    for n in range(20):
        for j in range(jmax + 1):
            S[j] = S[j] + term / (n + j + 1)
        term = term * zz / (n + 1)
    return [np.where(small, Sj, Mj) for Sj, Mj in zip(S, M)]


def decaying_integral(d0, r0, d1, r1, rate, dt):
    """int_0^dt d(s) ds where d(s) = exp(rate s) v(s) with v smooth.

    d0, d1 are the end values and r0, r1 the end values of
    exp(rate s) dv/ds, i.e. d' - rate d.  v is replaced by its cubic
    Hermite interpolant, so the rule is exact for cubic v and stable for
    stiff (rate * dt << -1) modes.  rate * dt is clipped at -700, where
    exp(-rate dt) reaches the float64 range; such modes have underflowed in
    the integrating factor anyway.
    """
    z = np.maximum(np.asarray(rate, dtype=float) * dt, -700.0)
    M0, M1, M2, M3 = _exp_moments(z)
    w00 = 2 * M3 - 3 * M2 + M0
    w10 = M3 - 2 * M2 + M1
    w01 = -2 * M3 + 3 * M2
    w11 = M3 - M2
    back = np.exp(-z)
    return dt * (w00 * d0 + w10 * dt * r0 + back * (w01 * d1 + w11 * dt * r1))


def _check_cfl(dt, umax, dx, limit=1.0):
    if dt * umax / dx > limit:
        raise CFLError(f"dt={dt:.3g} exceeds the advective bound {limit * dx / umax:.3g}")


# ----------------------------------------------------------------------
# quasi-geostrophic system

@dataclass
class QGState:
    """q on the horizontal torus; optional Upsilon on the 3D slab grid."""
    grid: SpectralGrid
    q: np.ndarray
    A: float
    mu: float
    c_p: float = 1.0
    alpha: float = 0.0
    kappa: float = 0.0
    Upsilon: np.ndarray = None
    grid3: SpectralGrid = None
    t: float = 0.0
    dissipation: float = 0.0     # accumulated mu int ||Delta_h q||^2 dt

    @classmethod
    def from_coeffs(cls, grid, q, coeffs, model, Upsilon=None, grid3=None):
        tb = coeffs.theta_bar
        return cls(grid, q, coeffs.A, float(model.mu(tb)), coeffs.c_p, coeffs.alpha,
                   float(model.kappa(tb)), Upsilon, grid3)

    def velocity(self):
        return self.grid.perp_grad_h(self.q)


def qg_gauge(q):
    return q - q.mean()


def qg_energy(state):
    g = state.grid
    gq = g.grad(state.q)
    return 0.5 * (g.inner(state.q, state.q) / state.A + g.inner(gq, gq))


def qg_enstrophy_rate(state):
    """mu ||Delta_h q||^2, the instantaneous energy dissipation."""
    g = state.grid
    lq = g.laplace_h(state.q)
    return state.mu * g.inner(lq, lq)


def _qg_ops(state):
    g = state.grid
    weight = 1.0 / state.A + g.k2h
    L = -state.mu * g.k2h**2 / weight
    mask = g.dealias_mask

    def N(qh):
        qh = mask * qh
        ux, uy = g.ifft(-1j * g.kd[1] * qh), g.ifft(1j * g.kd[0] * qh)
        lh = -g.k2h * qh
        lx, ly = g.ifft(1j * g.kd[0] * lh), g.ifft(1j * g.kd[1] * lh)
        return mask * g.fft(ux * lx + uy * ly) / weight

    return L, N


def _mode_dissipation(g, mu, qh, nh):
    """Per-mode mu |k|^4 |q_k|^2 (summing to mu ||Delta_h q||^2 n / dV) and
    the part of its time derivative due to the nonlinear term nh."""
    w = mu * g.parseval_w * g.k2h**2
    return w * np.abs(qh) ** 2, 2 * w * np.real(np.conj(qh) * nh)


def qg_stable_dt(state, cfl=0.5):
    umax = float(np.max(np.abs(state.velocity()))) if np.any(state.q) else 0.0
    dx = min(state.grid.dx)
    return np.inf if umax == 0 else cfl * dx / umax


def qg_step(state, dt):
    """Advance q by dt (Upsilon untouched); accumulates the dissipation integral."""
    g = state.grid
    umax = float(np.max(np.abs(state.velocity())))
    if umax > 0:
        _check_cfl(dt, umax, min(g.dx))
    L, N = _qg_ops(state)
    qh0 = g.fft(state.q)
    qh = lawson_rk4(qh0, L, N, dt)
    # dissipation integral: per mode, the exact linear decay is factored out
    d0, r0 = _mode_dissipation(g, state.mu, qh0, N(qh0))
    d1, r1 = _mode_dissipation(g, state.mu, qh, N(qh))
    w = decaying_integral(d0, r0, d1, r1, 2 * L, dt)
    w = float(np.sum(w)) * g.dV / np.prod(g.shape)
    return replace(state, q=g.ifft(qh), t=state.t + dt, dissipation=state.dissipation + w)


def _upsilon_ops(state, q_of):
    g3, gh = state.grid3, state.grid
    L = -(state.kappa / state.c_p) * g3.k2
    mask = g3.dealias_mask
    src_coef = state.kappa * state.alpha / state.c_p

    def N(s, yh):
        q = q_of(s)
        qhh = gh.fft(q)
        ux = gh.ifft(-1j * gh.kd[1] * qhh)[..., None]
        uy = gh.ifft(1j * gh.kd[0] * qhh)[..., None]
        yh = mask * yh
        yx, yy = g3.ifft(1j * g3.kd[0] * yh), g3.ifft(1j * g3.kd[1] * yh)
        adv = mask * g3.fft(ux * yx + uy * yy)
        src = np.broadcast_to(gh.laplace_h(q)[..., None], g3.shape)
        return -adv + src_coef * g3.fft(src)

    return L, N


def upsilon_step(state, dt, q_next=None):
    """Advance Upsilon by dt with q frozen, or linearly interpolated to q_next."""
    if state.Upsilon is None or state.grid3 is None:
        raise ValueError("state carries no Upsilon field")
    g3 = state.grid3
    q0 = state.q
    q1 = q0 if q_next is None else q_next
    umax = max(float(np.max(np.abs(state.grid.perp_grad_h(q))) ) for q in (q0, q1))
    if umax > 0:
        _check_cfl(dt, umax, min(g3.dx[:2]))
    L, Nt = _upsilon_ops(state, lambda s: (1 - s) * q0 + s * q1)
    # stage abscissae of Lawson RK4 are 0, 1/2, 1/2, 1
    stages = iter((0.0, 0.5, 0.5, 1.0))
    N = lambda yh: Nt(next(stages), yh)
    yh = lawson_rk4(g3.fft(state.Upsilon), L, N, dt)
    return replace(state, Upsilon=g3.ifft(yh))


def qg_advance(state, dt):
    """q step followed by the Upsilon step driven by the interpolated q."""
    new = qg_step(state, dt)
    if state.Upsilon is not None:
        up = upsilon_step(state, dt, q_next=new.q)
        new = replace(new, Upsilon=up.Upsilon)
    return new


# ----------------------------------------------------------------------
# Oberbeck-Boussinesq system

@dataclass
class OBState:
    """U^h on the horizontal torus, Theta on the 3D slab grid.

    F is a horizontal array (the centrifugal potential or its periodic
    surrogate), G a 3D array; R is diagnosed by ``recover_R``.
    """
    grid: SpectralGrid
    grid3: SpectralGrid
    U: np.ndarray
    Theta: np.ndarray
    coeffs: object
    mu: float
    kappa: float
    F: np.ndarray = None
    G: np.ndarray = None
    t: float = 0.0

    @classmethod
    def from_model(cls, grid, grid3, U, Theta, coeffs, model, F=None, G=None):
        tb = coeffs.theta_bar
        return cls(grid, grid3, U, Theta, coeffs, float(model.mu(tb)), float(model.kappa(tb)), F, G)

    def R(self, scaling):
        return recover_R(self.Theta, self.coeffs, scaling, self.G, self.F)


def recover_R(Theta, coeffs, scaling, G, F=None, gauge="zero-mean"):
    """Density deviation from the Boussinesq relation, zero-mean gauge."""
    if gauge != "zero-mean":
        raise ValueError("only the zero-mean gauge is implemented")
    if coeffs.d_rho_p == 0:
        raise ZeroDivisionError("d_rho p vanishes")
    Theta = np.asarray(Theta, dtype=float)
    Gf = np.zeros(Theta.shape) if G is None else np.broadcast_to(G, Theta.shape)
    rhs = Gf - coeffs.d_theta_p * Theta
    if F is not None and scaling.delta2:
        Ff = np.asarray(F)
        if Ff.ndim == Theta.ndim - 1:
            Ff = Ff[..., None]
        rhs = rhs + scaling.delta2 * np.broadcast_to(Ff, Theta.shape)
    R = rhs / coeffs.d_rho_p
    return R - R.mean()


def boussinesq_gradient_residual(grid3, R, Theta, coeffs, scaling, G, F=None):
    """max |grad(p_r R + p_t Theta - G - delta2 F)| by finite differences of samples.

    Sample differences are used so that the check applies to kinked potentials.
    """
    b = coeffs.d_rho_p * R + coeffs.d_theta_p * Theta - np.broadcast_to(G, R.shape)
    if F is not None and scaling.delta2:
        Ff = np.asarray(F)
        b = b - scaling.delta2 * np.broadcast_to(Ff[..., None] if Ff.ndim == R.ndim - 1 else Ff, R.shape)
    return max(float(np.max(np.abs(np.diff(b, axis=a)))) for a in range(b.ndim))


def _ob_ops(state, scaling):
    gh, g3 = state.grid, state.grid3
    c = state.coeffs
    mh = gh.dealias_mask
    m3 = g3.dealias_mask
    LU = -state.mu * gh.k2h
    LT = -(state.kappa / c.c_p) * g3.k2
    d2 = scaling.delta2
    F = state.F
    gradF = gh.grad(F) if F is not None else None
    src_coef = c.theta_bar * c.alpha / c.c_p

    def split(z):
        return z[0], z[1]

    def NU(Uh, Th):
        U = [gh.ifft(mh * u) for u in Uh]
        out = []
        for a in range(2):
            acc = sum(1j * gh.kd[b] * gh.fft(U[a] * U[b]) for b in range(2))
            out.append(-(mh * acc))
        if d2 and F is not None:
            Theta = g3.ifft(Th)
            R = recover_R(Theta, c, scaling, state.G, F)
            Rm = R.mean(axis=-1)
            for a in range(2):
                out[a] = out[a] + d2 * gh.fft(Rm * gradF[a])
        return _project_hat(gh, np.stack(out))

    def NT(Uh, Th):
        U = [gh.ifft(mh * u)[..., None] for u in Uh]
        T = g3.ifft(m3 * Th)
        acc = sum(1j * g3.kd[b] * g3.fft(T * U[b]) for b in range(2))
        out = -(m3 * acc)
        if d2 and F is not None:
            w = (U[0][..., 0] * gradF[0] + U[1][..., 0] * gradF[1])
            out = out + src_coef * d2 * g3.fft(np.broadcast_to(w[..., None], g3.shape))
        return out

    return LU, LT, NU, NT


def _project_hat(gh, vh):
    k1, k2 = gh.kd[0], gh.kd[1]
    kk = k1**2 + k2**2
    kv = (k1 * vh[0] + k2 * vh[1]) / np.where(kk > 0, kk, 1.0)
    return np.stack([vh[0] - k1 * kv, vh[1] - k2 * kv])


def ob_stable_dt(state, cfl=0.5):
    umax = float(np.max(np.abs(state.U)))
    return np.inf if umax == 0 else cfl * min(state.grid.dx) / umax


def ob_step(state, dt, scaling):
    """Advance (U^h, Theta) by dt with Lawson RK4 on the coupled system."""
    gh, g3 = state.grid, state.grid3
    umax = float(np.max(np.abs(state.U)))
    if umax > 0:
        _check_cfl(dt, umax, min(gh.dx))
    LU, LT, NU, NT = _ob_ops(state, scaling)
    nU = gh.spec_shape
    size_u = 2 * int(np.prod(nU))

    def pack(Uh, Th):
        return np.concatenate([Uh.ravel(), Th.ravel()])

    def unpack(z):
        return z[:size_u].reshape((2,) + nU), z[size_u:].reshape(g3.spec_shape)

    L = pack(np.broadcast_to(LU, (2,) + nU), np.broadcast_to(LT, g3.spec_shape))

    def N(z):
        Uh, Th = unpack(z)
        return pack(NU(Uh, Th), NT(Uh, Th))

    Uh0 = _project_hat(gh, np.stack([gh.fft(u) for u in state.U]))
    z = lawson_rk4(pack(Uh0, g3.fft(state.Theta)), L, N, dt)
    Uh, Th = unpack(z)
    U = np.stack([gh.ifft(u) for u in Uh])
    return replace(state, U=U, Theta=g3.ifft(Th), t=state.t + dt)


def ob_divergence(state):
    return float(np.max(np.abs(state.grid.div(state.U))))


def ob_theta_parity_error(state):
    return parity_error(state.grid3, state.Theta, "even")


def taylor_green(grid, amp=1.0):
    x1, x2 = grid.coords()
    return amp * np.stack([np.sin(x1) * np.cos(x2), -np.cos(x1) * np.sin(x2)])


def project_velocity(grid, U):
    return leray_project(grid, U)
