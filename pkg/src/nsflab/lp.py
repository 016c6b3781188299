"""Littlewood-Paley blocks, Besov/Sobolev norms, Bernstein checks and S_M smoothing.

Works with complex or real samples on a periodic box (full complex FFT).
"""
import itertools
from dataclasses import dataclass

import numpy as np

R_IN, R_OUT = 1.1, 1.9


def chi(r):
    """Radial cutoff: 1 for r <= 1.1, 0 for r >= 1.9, smootherstep in between."""
    r = np.asarray(r, dtype=float)
    t = np.clip((R_OUT - r) / (R_OUT - R_IN), 0.0, 1.0)
    return t**3 * (t * (6 * t - 15) + 10)


def phi(r):
    return chi(r) - chi(2.0 * np.asarray(r, dtype=float))


class DyadicSystem:
    """Dyadic partition on a periodic box of given shape and side lengths."""

    def __init__(self, shape, lengths=None):
        self.shape = tuple(int(n) for n in shape)
        self.d = len(self.shape)
        self.lengths = tuple(lengths) if lengths is not None else (2 * np.pi,) * self.d
        ks = [2 * np.pi / L * np.fft.fftfreq(n, 1.0 / n) for n, L in zip(self.shape, self.lengths)]
        self.k = np.meshgrid(*ks, indexing="ij")
        self.kabs = np.sqrt(sum(k**2 for k in self.k))
        self.kmax = float(self.kabs.max())
        self.J_max = max(0, int(np.ceil(np.log2(self.kmax / R_IN))))
        self.dV = float(np.prod([L / n for L, n in zip(self.lengths, self.shape)]))

    @classmethod
    def from_grid(cls, grid):
        return cls(grid.shape, grid.lengths)

    @property
    def blocks(self):
        return range(-1, self.J_max + 1)

    def multiplier(self, j):
        if j < -1 or j > self.J_max:
            raise ValueError(f"block index {j} outside [-1, {self.J_max}]")
        if j == -1:
            # chi(2 xi) closes the telescoping sum of phi(xi) = chi(xi) - chi(2 xi)
            return chi(2.0 * self.kabs)
        return phi(self.kabs / 2.0**j)

    def low_pass(self, j):
        """Symbol of S_j = chi(2^-j D)."""
        return chi(self.kabs / 2.0**j)

    def apply(self, f, symbol):
        f = np.asarray(f)
        out = np.fft.ifftn(symbol * np.fft.fftn(f))
        return out.real if np.isrealobj(f) else out

    def partition_error(self):
        total = sum(self.multiplier(j) for j in self.blocks)
        return float(np.max(np.abs(total - 1.0)))

    def lp_norm(self, f, p):
        f = np.abs(np.asarray(f))
        if np.isinf(p):
            return float(f.max())
        return float((np.sum(f**p) * self.dV) ** (1.0 / p))


def dyadic_block(sys, f, j):
    return sys.apply(f, sys.multiplier(j))


def besov_norm(sys, f, s, p, r):
    vals = np.array([2.0 ** (j * s) * sys.lp_norm(dyadic_block(sys, f, j), p) for j in sys.blocks])
    if np.isinf(r):
        return float(vals.max())
    return float(np.sum(vals**r) ** (1.0 / r))


def sobolev_norm(sys, f, s):
    """(sum (1+|k|^2)^s |f_k|^2)^(1/2), normalized to equal the L2 norm at s=0."""
    fh = np.fft.fftn(np.asarray(f))
    n = np.prod(sys.shape)
    return float(np.sqrt(np.sum((1 + sys.kabs**2) ** s * np.abs(fh) ** 2) * sys.dV / n))


def gradient_tensor_norm(sys, f, k):
    """Pointwise Frobenius norm of the k-th derivative tensor of f."""
    fh = np.fft.fftn(np.asarray(f))
    acc = np.zeros(sys.shape)
    for idx in itertools.product(range(sys.d), repeat=k):
        sym = np.ones(sys.shape, dtype=complex)
        for a in idx:
            sym = sym * (1j * sys.k[a])
        acc += np.abs(np.fft.ifftn(sym * fh)) ** 2
    return np.sqrt(acc)


def bernstein_ratio(sys, f, j, k, p, q):
    num = sys.lp_norm(gradient_tensor_norm(sys, f, k), q)
    den = 2.0 ** (j * (k + sys.d * (1.0 / p - 1.0 / q))) * sys.lp_norm(f, p)
    return num / den


def random_annulus_field(sys, j, rng, inner=0.75, outer=8.0 / 3.0, ball=False):
    """Real random field with Fourier support in 2^j*{inner <= |xi| <= outer} (or a ball)."""
    lo = 0.0 if ball else inner * 2.0**j
    hi = outer * 2.0**j
    support = (sys.kabs >= lo) & (sys.kabs <= hi)
    if not support.any():
        raise ValueError("empty spectrum for requested annulus")
    coef = (rng.standard_normal(sys.shape) + 1j * rng.standard_normal(sys.shape)) * support
    return np.fft.ifftn(coef).real


@dataclass
class BernsteinStats:
    j: int
    k: int
    p: float
    q: float
    ratio_min: float
    ratio_max: float
    trials: int


def bernstein_check(sys, j, k, p, q, trials=20, rng=None, ball=False):
    rng = np.random.default_rng(0) if rng is None else rng
    ratios = []
    for _ in range(trials):
        f = random_annulus_field(sys, j, rng, ball=ball)
        if np.max(np.abs(f)) == 0:
            continue
        ratios.append(bernstein_ratio(sys, f, j, k, p, q))
    if not ratios:
        raise ValueError("empty spectrum for requested annulus")
    return BernsteinStats(j, k, p, q, float(min(ratios)), float(max(ratios)), len(ratios))


def mollify(sys, f, M):
    """Smoothing at scale 2^-M by the spectral low-pass S_M."""
    if M < 0:
        raise ValueError("M must be >= 0")
    return sys.apply(f, sys.low_pass(M))


def kernel_l1_norm(sys, j):
    """L1 norm of the convolution kernel of S_j on the box."""
    K = np.fft.ifftn(sys.low_pass(j)).real / sys.dV
    return float(np.sum(np.abs(K)) * sys.dV)


def mollifier_constant(sys, f, Ms):
    """Fitted C in ||f - S_M f|| <= C 2^-M ||grad f|| over the listed M."""
    g = sys.lp_norm(gradient_tensor_norm(sys, f, 1), 2)
    return max(sys.lp_norm(f - mollify(sys, f, M), 2) * 2.0**M / g for M in Ms)
