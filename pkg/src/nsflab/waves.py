"""Acoustic-Poincare wave system with exact per-mode propagation.

    eps^m dt Lam + A div W = eps^m f
    eps^m dt W + grad Lam + eps^(m-1) e3 x W = eps^m G

In the symmetrized unknowns y = (Lam/sqrt(A), W) the generator of each
Fourier mode is M(k) = -i H(k) with H Hermitian, so exp(tM) is unitary and
is built from a batched Hermitian eigendecomposition.
"""
from dataclasses import dataclass, replace

import numpy as np

from .spectral import SpectralGrid, parity_error

WAVE_PARITY = ("even", "even", "even", "odd")   # Lam, W1, W2, W3


class ConfigurationError(ValueError):
    pass


@dataclass
class WaveState:
    grid: SpectralGrid
    Lam: np.ndarray
    W: np.ndarray
    scaling: object
    A: float
    t: float = 0.0

    def copy(self):
        return replace(self, Lam=self.Lam.copy(), W=self.W.copy())


def symbol(k, scaling, A):
    """Hermitian H(k) with generator -iH in the symmetrized variables."""
    k = np.asarray(k, dtype=float)
    c = np.sqrt(A) / scaling.eps**scaling.m
    w = 1.0 / scaling.eps
    H = np.zeros(k.shape[:-1] + (4, 4), dtype=complex)
    for a in range(3):
        H[..., 0, a + 1] = c * k[..., a]
        H[..., a + 1, 0] = c * k[..., a]
    H[..., 1, 2] = 1j * w
    H[..., 2, 1] = -1j * w
    return H


def generator(k, scaling, A):
    """The 4x4 generator in the original (Lam, W) variables."""
    k = np.asarray(k, dtype=float)
    em = scaling.eps**scaling.m
    L = np.zeros(k.shape[:-1] + (4, 4), dtype=complex)
    for a in range(3):
        L[..., 0, a + 1] = -1j * A * k[..., a] / em
        L[..., a + 1, 0] = -1j * k[..., a] / em
    L[..., 1, 2] = 1.0 / scaling.eps
    L[..., 2, 1] = -1.0 / scaling.eps
    return L


def dispersion(k, scaling, A):
    """Real frequencies omega (time dependence exp(-i omega t)), ascending."""
    return np.linalg.eigvalsh(symbol(k, scaling, A))


class WavePropagator:
    """Cached per-mode eigendecomposition for one (grid, scaling, A)."""

    def __init__(self, grid, scaling, A):
        if grid.ndim != 3:
            raise ValueError("wave system needs a 3D grid")
        self.grid, self.scaling, self.A = grid, scaling, float(A)
        kd = np.broadcast_arrays(*grid.kd)
        kvec = np.stack(kd, axis=-1)
        self.omega, self.V = np.linalg.eigh(symbol(kvec, scaling, A))
        self.Vh = np.conj(np.swapaxes(self.V, -1, -2))

    def to_modes(self, Lam, W):
        g = self.grid
        y = [g.fft(Lam) / np.sqrt(self.A)] + [g.fft(c) for c in W]
        return np.stack(y, axis=-1)

    def from_modes(self, yh):
        g = self.grid
        Lam = g.ifft(yh[..., 0]) * np.sqrt(self.A)
        W = np.stack([g.ifft(yh[..., a]) for a in (1, 2, 3)])
        return Lam, W

    def _apply(self, yh, diag):
        z = np.einsum("...ij,...j->...i", self.Vh, yh)
        return np.einsum("...ij,...j->...i", self.V, diag * z)

    def evolve_modes(self, yh, t):
        return self._apply(yh, np.exp(-1j * self.omega * t))

    def duhamel_constant(self, nh, t):
        """int_0^t exp((t-s)M) ds applied to constant forcing modes nh."""
        w = self.omega
        wt = w * t
        small = np.abs(wt) < 1e-8
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(small, t * (1 - 0.5j * wt), (1 - np.exp(-1j * wt)) / np.where(small, 1.0, 1j * w))
        return self._apply(nh, phi)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(4)


def wave_propagate(state, t, forcing=None, propagator=None, n_sub=8):
    """Advance a wave state by t.

    forcing: None, a constant pair (f, G) or a callable s -> (f, G) where s is
    absolute time; constant forcing is integrated exactly, time-dependent
    forcing by composite 4-point Gauss-Legendre quadrature of the Duhamel
    integral (order 8).
    """
    prop = propagator or WavePropagator(state.grid, state.scaling, state.A)
    yh = prop.to_modes(state.Lam, state.W)
    out = prop.evolve_modes(yh, t)
    if forcing is not None:
        if callable(forcing):
            h = t / n_sub
            acc = 0
            for i in range(n_sub):
                a = i * h
                for x, w in zip(_GL_X, _GL_W):
                    s = a + 0.5 * h * (x + 1)
                    f, G = forcing(state.t + s)
                    nh = prop.to_modes(f, G)
                    acc = acc + 0.5 * h * w * prop.evolve_modes(nh, t - s)
            out = out + acc
        else:
            f, G = forcing
            out = out + prop.duhamel_constant(prop.to_modes(f, G), t)
    Lam, W = prop.from_modes(out)
    return replace(state, Lam=Lam, W=W, t=state.t + t)


def wave_energy(state):
    g = state.grid
    return 0.5 * (np.sum(state.Lam**2) / state.A + np.sum(state.W**2)) * g.dV


def forcing_work(state, f, G):
    """dE/dt contribution of forcing: int(Lam f / A + W . G)."""
    g = state.grid
    return (np.sum(state.Lam * f) / state.A + np.sum(state.W * G)) * g.dV


def gamma_of(state):
    """gamma = curl_h <W^h> - (eps^(m-1)/A) <Lam> on the horizontal grid."""
    g = state.grid
    gh = g.horizontal()
    Wm = state.W[:2].mean(axis=-1)
    Lm = state.Lam.mean(axis=-1)
    sc = state.scaling
    return gh.curl_h(Wm) - sc.eps ** (sc.m - 1) / state.A * Lm


def gamma_forcing_rate(grid, scaling, A, f, G):
    """Right-hand side of the gamma identity for forcing (f, G)."""
    gh = grid.horizontal()
    return gh.curl_h(G[:2].mean(axis=-1)) - scaling.eps ** (scaling.m - 1) / A * f.mean(axis=-1)


def wave_parity_error(state):
    g = state.grid
    return max(parity_error(g, state.Lam, "even"), parity_error(g, state.W, WAVE_PARITY[1:]))


# ----------------------------------------------------------------------
# finite propagation speed

def bump(r, r0, power=12):
    """Compactly supported C^(power-1) bump cos(pi s/2)^power, s = r/r0.

    Its Fourier tail is below 2e-12 beyond |k| = 64/r0, so on a 256^2 box
    it is resolved to round-off, unlike exp(-1/(1-s^2)) whose tail decays
    only like exp(-sqrt(k)).
    """
    s = np.asarray(r, dtype=float) / r0
    return np.where(s < 1.0, np.cos(0.5 * np.pi * np.minimum(s, 1.0)) ** power, 0.0)


@dataclass
class ConeResult:
    radius: float
    bound: float
    speed: float
    dx: float
    r0: float
    t: float


def propagation_support_radius(r0, scaling, A, t, grid=None, threshold=1e-8):
    """Measured radius outside which |(Lam/sqrt(A), W)| <= threshold * initial amplitude.

    The data is a horizontal bump in Lam centred in the box, independent of x3,
    so the front is a circle in the horizontal plane.
    """
    grid = grid or SpectralGrid(256, 2, Lh=1.0)
    speed = np.sqrt(A) / scaling.eps**scaling.m
    half = 0.5 * min(grid.lengths[:2])
    if r0 + speed * t + 4 * grid.dx[0] >= half:
        raise ConfigurationError("cone leaves the box; shorten t or enlarge the box")
    x1, x2, _ = grid.coords()
    c = 0.5 * grid.lengths[0]
    r = np.sqrt((x1 - c) ** 2 + (x2 - c) ** 2)
    Lam0 = bump(r, r0)
    state = WaveState(grid, Lam0, np.zeros((3,) + grid.shape), scaling, A)
    if t != 0:
        state = wave_propagate(state, t)
    mag = np.sqrt(state.Lam**2 / A + np.sum(state.W**2, axis=0))
    amp = np.max(np.abs(Lam0)) / np.sqrt(A)
    hot = mag > threshold * amp
    radius = float(r[hot].max()) if hot.any() else 0.0
    return ConeResult(radius, r0 + speed * t + 3 * grid.dx[0], float(speed), grid.dx[0], r0, t)
