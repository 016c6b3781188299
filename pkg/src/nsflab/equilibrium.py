"""Static states: Pi(rho) = eps^{2(m-1)} F + eps^m G solved pointwise."""
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .rates import fit_rate
from .thermo import DomainError


@dataclass(frozen=True)
class EpsilonScaling:
    eps: float
    m: float = 1.0
    centrifugal_on: bool = False

    def __post_init__(self):
        if not (0 < self.eps <= 1):
            raise ValueError("eps must lie in (0, 1]")
        if self.m < 1:
            raise ValueError("m must be >= 1")

    @property
    def Ma(self):
        return self.eps**self.m

    @property
    def Fr(self):
        return self.eps ** (self.m / 2)

    @property
    def Ro(self):
        return self.eps

    @property
    def delta2(self):
        return 1.0 if self.m == 2 else 0.0

    @property
    def coef_F(self):
        """Weight of F in the static right-hand side (0 when F is disabled)."""
        return self.eps ** (2 * (self.m - 1)) if self.centrifugal_on else 0.0

    @property
    def coef_G(self):
        return self.eps**self.m

    def to_dict(self):
        return {"eps": self.eps, "m": self.m, "centrifugal_on": self.centrifugal_on}


@dataclass(frozen=True)
class ForcePotentials:
    """F = |x^h|^2 (optional) and G = -x3 on the slab 0 < x3 < 1."""
    centrifugal_on: bool = True
    radius: float = 1.0

    def F(self, x1, x2):
        if not self.centrifugal_on:
            return np.zeros(np.broadcast(x1, x2).shape)
        return np.asarray(x1) ** 2 + np.asarray(x2) ** 2

    def G(self, x3):
        return -np.asarray(x3, dtype=float)


def profile_Pi(model, rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(~(rho > 0)):
        raise DomainError("density must be positive")
    tb = model.theta_bar
    if model.is_default:
        # d_rho p = theta_bar + (5/3) rho^{2/3}, independent of the radiation term
        return tb * np.log(rho) + 2.5 * (rho ** (2.0 / 3.0) - 1.0)
    return profile_Pi_quad(model, rho)


def profile_Pi_quad(model, rho):
    """Adaptive quadrature of d_rho p(z, theta_bar)/z from 1 to rho."""
    tb = model.theta_bar
    rho = np.asarray(rho, dtype=float)
    out = np.empty(rho.shape)
    f = lambda t: model.partials(np.exp(t), tb)[0]   # integrand in log z
    for idx, r in np.ndenumerate(rho):
        out[idx] = integrate.quad(f, 0.0, np.log(r), epsabs=1e-13, epsrel=1e-13, limit=200)[0]
    return out if out.shape else float(out)


def dPi(model, rho):
    return model.partials(rho, model.theta_bar)[0] / rho


def invert_Pi(model, rhs, tol=1e-13, max_iter=200):
    """Solve Pi(rho) = rhs pointwise by safeguarded Newton with a bisection fallback."""
    rhs = np.asarray(rhs, dtype=float)
    shape = rhs.shape
    b = rhs.ravel().copy()
    dp1 = model.partials(1.0, model.theta_bar)[0]
    x = np.maximum(1.0 + b / dp1, 1e-3)
    lo = np.full_like(b, 1e-6)
    hi = np.maximum(2.0, 2.0 * x)
    for _ in range(60):
        bad = profile_Pi(model, lo) > b
        if not bad.any():
            break
        lo[bad] *= 1e-3
    else:
        raise RuntimeError("bracket failure at the lower end")
    for _ in range(60):
        bad = profile_Pi(model, hi) < b
        if not bad.any():
            break
        hi[bad] *= 2.0
    else:
        raise RuntimeError("bracket failure at the upper end")
    x = np.clip(x, lo, hi)
    for _ in range(max_iter):
        f = profile_Pi(model, x) - b
        done = np.abs(f) <= tol * np.maximum(1.0, np.abs(b))
        if done.all():
            break
        pos = f > 0
        hi = np.where(pos, x, hi)
        lo = np.where(pos, lo, x)
        xn = x - f / dPi(model, x)
        outside = ~((xn > lo) & (xn < hi))
        xn = np.where(outside, 0.5 * (lo + hi), xn)
        x = np.where(done, x, xn)
    else:
        raise RuntimeError("static solve did not converge")
    return x.reshape(shape) if shape else float(x[0])


def static_rhs(scaling, F, G):
    return scaling.coef_F * np.asarray(F) + scaling.coef_G * np.asarray(G)


def solve_static(model, scaling, x, potentials=None):
    """Density rho~ at points x = (x1, x2, x3) on the slab."""
    potentials = potentials or ForcePotentials(centrifugal_on=scaling.centrifugal_on)
    x1, x2, x3 = (np.asarray(c, dtype=float) for c in x)
    F = potentials.F(x1, x2)
    if not scaling.centrifugal_on:
        F = np.zeros_like(F)
    return invert_Pi(model, static_rhs(scaling, F, potentials.G(x3)))


@dataclass
class StaticProfile:
    rho: np.ndarray
    scaling: EpsilonScaling
    rho_min: float = field(init=False)
    rho_max: float = field(init=False)

    def __post_init__(self):
        self.rho_min = float(np.min(self.rho))
        self.rho_max = float(np.max(self.rho))

    @property
    def r_tilde(self):
        return (self.rho - 1.0) / self.scaling.eps**self.scaling.m


def build_profile(model, scaling, F, G):
    """Static profile on arbitrary sample arrays of the potentials."""
    return StaticProfile(invert_Pi(model, static_rhs(scaling, F, G)), scaling)


def expected_slope(m, centrifugal_on):
    if not centrifugal_on:
        return float(m)
    if m >= 2:
        return float(m)
    if m > 1:
        return 2.0 * (m - 1)
    return 1.0


@dataclass
class RateStudy:
    m: float
    centrifugal_on: bool
    eps: list
    errors: list
    rho_min: float
    fit: object
    expected: float

    def to_dict(self):
        return {"m": self.m, "centrifugal_on": self.centrifugal_on, "eps": list(self.eps),
                "sup_error": list(self.errors), "rho_min": self.rho_min,
                "slope": self.fit.slope if self.fit else None,
                "fit": self.fit.to_dict() if self.fit else None, "expected": self.expected}


def cylinder_samples(radius, n_r=41, n_z=21):
    r = np.linspace(0.0, radius, n_r)
    x3 = np.linspace(0.0, 1.0, n_z)
    R, X3 = np.meshgrid(r, x3, indexing="ij")
    return R, np.zeros_like(R), X3


def static_rate_study(model, regimes, eps_grid, radius=1.0, n_r=41, n_z=21):
    """Sup-norm distance of the static profile to its limit on a cylinder, per eps."""
    eps_grid = sorted(float(e) for e in eps_grid)
    if len(eps_grid) < 4:
        raise ValueError("static_rate_study needs at least 4 eps values")
    x1, x2, x3 = cylinder_samples(radius, n_r, n_z)
    out = []
    for m, cent in regimes:
        pot = ForcePotentials(centrifugal_on=cent, radius=radius)
        F, G = pot.F(x1, x2), pot.G(x3)
        ref = invert_Pi(model, F) if (cent and m == 1) else np.ones_like(F)
        errs, rmin = [], np.inf
        for e in eps_grid:
            sc = EpsilonScaling(e, m, cent)
            rho = invert_Pi(model, static_rhs(sc, F, G))
            errs.append(float(np.max(np.abs(rho - ref))))
            rmin = min(rmin, float(rho.min()))
        out.append(RateStudy(m, cent, eps_grid, errs, rmin, fit_rate(eps_grid, errs),
                             expected_slope(m, cent)))
    return out


def positivity_study(model, regimes, eps_grid, radius=2.0, floor=0.5):
    """Minimum static density per eps and the largest eps below which it stays >= floor."""
    x1, x2, x3 = cylinder_samples(radius)
    rows, eps0 = [], {}
    for m, cent in regimes:
        pot = ForcePotentials(centrifugal_on=cent, radius=radius)
        F, G = pot.F(x1, x2), pot.G(x3)
        good, ok_so_far = None, True
        for e in sorted(eps_grid):
            rho = invert_Pi(model, static_rhs(EpsilonScaling(e, m, cent), F, G))
            i = int(np.argmin(rho))
            rows.append({"m": m, "centrifugal_on": cent, "eps": e, "rho_min": float(rho.flat[i]),
                         "witness_x": [float(x1.flat[i]), float(x2.flat[i]), float(x3.flat[i])]})
            ok_so_far = ok_so_far and rho.min() >= floor
            if ok_so_far:
                good = e
        eps0[(m, cent)] = good
    return rows, eps0
