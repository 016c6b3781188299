"""Seeded ill-prepared initial data around the static state."""
from dataclasses import dataclass, field

import numpy as np

from .spectral import VELOCITY_PARITY, enforce_parity

DEFAULT_AMPLITUDES = {"rho": 1.0, "theta": 1.0, "u": 1.0}


@dataclass
class InitialData:
    """rho0^(1), Theta0 (zero mean, even in x3) and u0 (slip parity), plus norms."""
    grid: object
    r1: np.ndarray
    Theta0: np.ndarray
    u0: np.ndarray
    seed: int
    band: int
    amplitudes: dict
    norms: dict = field(default_factory=dict)

    def R0(self, rho_tilde, scaling):
        """R0 = rho0^(1) + (rho_tilde - 1) / eps^m."""
        return self.r1 + (rho_tilde - 1.0) / scaling.eps**scaling.m


def _random_band(grid, rng, band, parity):
    f = grid.band_limit(rng.standard_normal(grid.shape), band)
    return enforce_parity(grid, f, parity)


def _normalize(f, amp):
    peak = np.max(np.abs(f))
    return f * (amp / peak) if peak > 0 else f


def gen_ill_prepared(grid, scaling=None, seed=0, band=3, amplitudes=None):
    """Band-limited random perturbations with sup norms equal to the amplitudes.

    The velocity is not balanced: it has vertical structure and a nonzero
    divergence.  ``scaling`` is accepted for symmetry with the solver setup;
    the perturbations themselves are eps-independent so that a sweep uses
    matched data.
    """
    amps = dict(DEFAULT_AMPLITUDES)
    amps.update(amplitudes or {})
    lim = min(grid.shape) // 2
    if band < 1 or band >= lim:
        raise ValueError(f"band {band} outside [1, {lim - 1}] for grid {grid.shape}")
    rng = np.random.default_rng(seed)
    r1 = _random_band(grid, rng, band, "even")
    r1 = _normalize(r1 - r1.mean(), amps["rho"])
    T0 = _random_band(grid, rng, band, "even")
    T0 = _normalize(T0 - T0.mean(), amps["theta"])
    u0 = np.stack([_random_band(grid, rng, band, p) for p in VELOCITY_PARITY])
    u0 = _normalize(u0, amps["u"])
    # re-center after normalization so the means vanish to round-off
    r1 = r1 - r1.mean()
    T0 = T0 - T0.mean()
    norms = {}
    for name, f in (("r1", r1), ("Theta0", T0), ("u0", u0)):
        norms[name] = {"L2": grid.norm(f), "Linf": float(np.max(np.abs(f)))}
    return InitialData(grid, r1, T0, u0, int(seed), int(band), amps, norms)
