"""Equation of state, transport laws and thermodynamic diagnostics.

The molecular pressure is written through a structural function P of the
variable Z = rho * theta**(-3/2),

    p = theta**(5/2) P(Z) + (a/3) theta**4,
    e = (3/2) theta**(5/2) P(Z) / rho + a theta**4 / rho,
    s = S(Z) + (4a/3) theta**3 / rho,

with S'(Z) = -(3/2) (5/3 P(Z) - Z P'(Z)) / Z**2.  The entropy is gauged so
that s(1, theta_bar) = 0.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator


class DomainError(ValueError):
    """Raised for non-positive density or temperature."""


class StructuralError(ValueError):
    """Raised when a model fails the structural audit."""


FD_STEP = 1e-6


def _check_domain(rho, theta):
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(~(rho > 0)) or np.any(~(theta > 0)):
        raise DomainError("density and temperature must be positive")
    return rho, theta


# --------------------------------------------------------------------------
# structural functions P

class DefaultP:
    """P(Z) = Z + Z**(5/3); gives p = rho*theta + rho**(5/3) when a = 0."""

    name = "default"

    def __call__(self, Z):
        Z = np.asarray(Z, dtype=float)
        return Z + Z ** (5.0 / 3.0)

    def deriv(self, Z):
        Z = np.asarray(Z, dtype=float)
        return 1.0 + (5.0 / 3.0) * Z ** (2.0 / 3.0)

    def entropy_raw(self, Z):
        # antiderivative of S'(Z) = -1/Z
        return -np.log(Z)

    def to_config(self):
        return "default"


class CallableP:
    """User supplied P with derivative; the entropy is found by quadrature."""

    name = "callable"

    def __init__(self, P, dP):
        self._P = P
        self._dP = dP

    def __call__(self, Z):
        return np.asarray(self._P(np.asarray(Z, dtype=float)), dtype=float)

    def deriv(self, Z):
        return np.asarray(self._dP(np.asarray(Z, dtype=float)), dtype=float)

    def _s_prime(self, z):
        return -1.5 * (5.0 / 3.0 * self(z) - z * self.deriv(z)) / z**2

    def entropy_raw(self, Z):
        Z = np.asarray(Z, dtype=float)
        out = np.empty(Z.shape)
        for idx, z in np.ndenumerate(Z):
            # integrate from Z=1 in the variable log Z
            val, _ = integrate.quad(lambda t: self._s_prime(np.exp(t)) * np.exp(t),
                                    0.0, np.log(z), epsabs=1e-13, epsrel=1e-13, limit=200)
            out[idx] = val
        return out if out.shape else float(out)

    def to_config(self):
        return {"kind": "callable"}


class TabulatedP(CallableP):
    """Monotone cubic interpolation of a (Z, P) table.

    Beyond the last node the tail P_last * (Z/Z_last)**(5/3) is used, which
    keeps P(Z)/Z**(5/3) constant at large Z.
    """

    name = "table"

    def __init__(self, Z, P):
        Z = np.asarray(Z, dtype=float)
        P = np.asarray(P, dtype=float)
        if Z.ndim != 1 or Z.shape != P.shape or len(Z) < 3:
            raise ValueError("table needs matching 1D Z and P arrays with >= 3 nodes")
        if Z[0] > 0:
            Z = np.concatenate([[0.0], Z])
            P = np.concatenate([[0.0], P])
        if np.any(np.diff(Z) <= 0):
            raise ValueError("table Z must be strictly increasing")
        self.Z_tab, self.P_tab = Z, P
        self._spl = PchipInterpolator(Z, P, extrapolate=False)
        self._dspl = self._spl.derivative()
        self._zmax = Z[-1]
        super().__init__(self._eval, self._deval)

    def _eval(self, Z):
        Z = np.asarray(Z, dtype=float)
        tail = self.P_tab[-1] * (Z / self._zmax) ** (5.0 / 3.0)
        inside = self._spl(np.minimum(Z, self._zmax))
        return np.where(Z > self._zmax, tail, inside)

    def _deval(self, Z):
        Z = np.asarray(Z, dtype=float)
        tail = (5.0 / 3.0) * self.P_tab[-1] * Z ** (2.0 / 3.0) / self._zmax ** (5.0 / 3.0)
        inside = self._dspl(np.minimum(Z, self._zmax))
        return np.where(Z > self._zmax, tail, inside)

    def to_config(self):
        return {"Z": self.Z_tab.tolist(), "P": self.P_tab.tolist()}


def make_P(spec):
    """Build a structural function from a config value ("default" or table)."""
    if spec is None or spec == "default":
        return DefaultP()
    if isinstance(spec, dict) and "Z" in spec and "P" in spec:
        return TabulatedP(spec["Z"], spec["P"])
    raise ValueError(f"unknown structural function {spec!r}")


# --------------------------------------------------------------------------
# model

@dataclass(frozen=True)
class ThermoModel:
    P: object = field(default_factory=DefaultP)
    a: float = 0.0
    theta_bar: float = 1.0
    mu_bar: float = 1.0
    eta_bar: float = 0.0
    kappa_bar: float = 1.0

    def __post_init__(self):
        if self.a < 0:
            raise ValueError("radiation constant must be >= 0")
        if not self.theta_bar > 0:
            raise ValueError("theta_bar must be > 0")
        for name in ("mu_bar", "eta_bar", "kappa_bar"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def is_default(self):
        return isinstance(self.P, DefaultP)

    # transport laws
    def mu(self, theta):
        return self.mu_bar * (1.0 + np.asarray(theta, dtype=float))

    def eta(self, theta):
        return self.eta_bar * (1.0 + np.asarray(theta, dtype=float))

    def kappa(self, theta):
        return self.kappa_bar * (1.0 + np.asarray(theta, dtype=float) ** 3)

    # entropy gauge constant, cached lazily
    def _s_offset(self):
        try:
            return self.__dict__["_s_off"]
        except KeyError:
            zbar = self.theta_bar ** -1.5
            off = float(self.P.entropy_raw(zbar)) + (4.0 * self.a / 3.0) * self.theta_bar**3
            object.__setattr__(self, "_s_off", off)
            return off

    def eos(self, rho, theta):
        """Return (p, e, s); no domain check."""
        Z = rho * theta**-1.5
        PZ = self.P(Z)
        t4 = self.a * theta**4
        p = theta**2.5 * PZ + t4 / 3.0
        e = 1.5 * theta**2.5 * PZ / rho + t4 / rho
        s = self.P.entropy_raw(Z) - self._s_offset() + (4.0 * self.a / 3.0) * theta**3 / rho
        return p, e, s

    def partials(self, rho, theta):
        """Closed-form d_rho p, d_theta p, d_rho s, d_theta s."""
        Z = rho * theta**-1.5
        PZ = self.P(Z)
        dP = self.P.deriv(Z)
        a = self.a
        dSdZ = -1.5 * (5.0 / 3.0 * PZ - Z * dP) / Z**2
        p_r = theta * dP
        p_t = 2.5 * theta**1.5 * PZ - 1.5 * rho * dP + (4.0 * a / 3.0) * theta**3
        s_r = dSdZ * theta**-1.5 - (4.0 * a / 3.0) * theta**3 / rho**2
        s_t = -1.5 * dSdZ * rho * theta**-2.5 + 4.0 * a * theta**2 / rho
        return p_r, p_t, s_r, s_t

    def energy_partials(self, rho, theta):
        """d_rho e, d_theta e."""
        Z = rho * theta**-1.5
        PZ = self.P(Z)
        dP = self.P.deriv(Z)
        a = self.a
        e_r = 1.5 * (theta * dP / rho - theta**2.5 * PZ / rho**2) - a * theta**4 / rho**2
        e_t = 3.75 * theta**1.5 * PZ / rho - 2.25 * dP + 4.0 * a * theta**3 / rho
        return e_r, e_t

    def gibbs_free(self, rho, theta):
        """Chemical potential g = e + p/rho - theta*s (d_rho g = d_rho p / rho)."""
        p, e, s = self.eos(rho, theta)
        return e + p / rho - theta * s

    def to_config(self):
        return {"eos": {"P": self.P.to_config(), "a": self.a, "theta_bar": self.theta_bar},
                "transport": {"mu_bar": self.mu_bar, "eta_bar": self.eta_bar,
                              "kappa_bar": self.kappa_bar}}


def eos_eval(model, rho, theta):
    rho, theta = _check_domain(rho, theta)
    return model.eos(rho, theta)


def eos_partials(model, rho, theta):
    rho, theta = _check_domain(rho, theta)
    return model.partials(rho, theta)


def fd_partials(model, rho, theta, h=FD_STEP):
    """Central finite-difference partials of p and s (cross-check of closed forms)."""
    rho, theta = _check_domain(rho, theta)
    dr, dt = h * rho, h * theta
    pp, _, sp = model.eos(rho + dr, theta)
    pm, _, sm = model.eos(rho - dr, theta)
    p_r, s_r = (pp - pm) / (2 * dr), (sp - sm) / (2 * dr)
    pp, _, sp = model.eos(rho, theta + dt)
    pm, _, sm = model.eos(rho, theta - dt)
    p_t, s_t = (pp - pm) / (2 * dt), (sp - sm) / (2 * dt)
    return p_r, p_t, s_r, s_t


@dataclass(frozen=True)
class LinearizationCoeffs:
    d_rho_p: float
    d_theta_p: float
    d_rho_s: float
    d_theta_s: float
    A: float
    B: float
    alpha: float
    c_p: float
    d_theta_e: float
    theta_bar: float

    def relnum_residuals(self):
        """Residuals of A + B d_rho_s = d_rho_p and B d_theta_s = d_theta_p."""
        return (self.A + self.B * self.d_rho_s - self.d_rho_p,
                self.B * self.d_theta_s - self.d_theta_p)


def linearization_coeffs(model, audit=True):
    if audit:
        rep = structural_audit(model)
        if not rep.eos_passed:
            raise StructuralError("model failed structural audit: " + ", ".join(rep.failures()))
    tb = model.theta_bar
    p_r, p_t, s_r, s_t = (float(v) for v in model.partials(1.0, tb))
    _, e_t = model.energy_partials(1.0, tb)
    A = p_r + p_t**2 / s_t
    B = p_t / s_t
    alpha = p_t / p_r
    c_p = float(e_t) + alpha * tb * p_t
    return LinearizationCoeffs(p_r, p_t, s_r, s_t, A, B, alpha, c_p, float(e_t), tb)


def gibbs_residual(model, rho, theta, h=FD_STEP):
    """Relative residual of theta Ds = De + p D(1/rho) along rho and theta.

    Derivatives are central differences of the model's own (p, e, s) so any
    inconsistency of the closures shows up.  Returns the maximum over points
    and both directions.
    """
    rho, theta = _check_domain(rho, theta)
    p, e, s = model.eos(rho, theta)
    dr, dt = h * rho, h * theta
    _, ep, sp = model.eos(rho + dr, theta)
    _, em, sm = model.eos(rho - dr, theta)
    ds, de = (sp - sm) / (2 * dr), (ep - em) / (2 * dr)
    dv = -1.0 / rho**2
    res_r = np.abs(theta * ds - de - p * dv) / (np.abs(theta * ds) + np.abs(de) + np.abs(p * dv))
    _, ep, sp = model.eos(rho, theta + dt)
    _, em, sm = model.eos(rho, theta - dt)
    ds, de = (sp - sm) / (2 * dt), (ep - em) / (2 * dt)
    res_t = np.abs(theta * ds - de) / (np.abs(theta * ds) + np.abs(de))
    return float(max(np.max(res_r), np.max(res_t)))


# --------------------------------------------------------------------------
# relative entropy

def ballistic_free_energy(model, rho, theta, theta_bar=None):
    tb = model.theta_bar if theta_bar is None else theta_bar
    _, e, s = model.eos(rho, theta)
    return rho * (e - tb * s)


def relative_entropy(model, rho, theta, rho_tilde, theta_bar=None):
    """E(rho, theta | rho_tilde, theta_bar) built from H = rho (e - theta_bar s)."""
    tb = model.theta_bar if theta_bar is None else theta_bar
    rho, theta = _check_domain(rho, theta)
    rho_tilde, _ = _check_domain(rho_tilde, tb)
    H = ballistic_free_energy(model, rho, theta, tb)
    _, e0, s0 = model.eos(rho_tilde, tb)
    H0 = rho_tilde * (e0 - tb * s0)
    e_r, _ = model.energy_partials(rho_tilde, tb)
    _, _, s_r, _ = model.partials(rho_tilde, tb)
    dH0 = e0 + rho_tilde * e_r - tb * (s0 + rho_tilde * s_r)
    return H - (rho - rho_tilde) * dH0 - H0


@dataclass(frozen=True)
class EssentialWindow:
    rho_star: float = 0.5
    theta_bar: float = 1.0

    def __post_init__(self):
        if not (0 < self.rho_star < 1.5):
            raise ValueError("rho_star must lie in (0, 1.5)")
        if not self.theta_bar > 0:
            raise ValueError("theta_bar must be > 0")

    @property
    def rho_lo(self):
        return 2.0 * self.rho_star / 3.0

    @property
    def rho_hi(self):
        return 2.0

    @property
    def theta_lo(self):
        return 0.5 * self.theta_bar

    @property
    def theta_hi(self):
        return 2.0 * self.theta_bar

    def contains(self, rho, theta):
        rho = np.asarray(rho)
        theta = np.asarray(theta)
        return ((rho >= self.rho_lo) & (rho <= self.rho_hi)
                & (theta >= self.theta_lo) & (theta <= self.theta_hi))

    def sample(self, n, rng):
        rho = rng.uniform(self.rho_lo, self.rho_hi, n)
        theta = rng.uniform(self.theta_lo, self.theta_hi, n)
        return rho, theta


def rho_star_from_minimum(profile_min, floor=0.5):
    """rho* from a computed lower bound on static densities, floored at 0.5."""
    return float(max(profile_min, floor))


def sandwich_constants(model, rho_tilde=1.0, window=None, n_grid=60, exclude=1e-3):
    """Fit c1, c2 with c1 d^2 <= E <= c2 d^2 on a window grid (d = Euclidean distance)."""
    window = window or EssentialWindow(theta_bar=model.theta_bar)
    r = np.linspace(window.rho_lo, window.rho_hi, n_grid)
    t = np.linspace(window.theta_lo, window.theta_hi, n_grid)
    R, T = np.meshgrid(r, t, indexing="ij")
    d2 = (R - rho_tilde) ** 2 + (T - model.theta_bar) ** 2
    keep = d2 > exclude**2
    E = relative_entropy(model, R[keep], T[keep], rho_tilde)
    ratio = E / d2[keep]
    return float(ratio.min()), float(ratio.max())


# --------------------------------------------------------------------------
# linearization

@dataclass
class LinearizationResult:
    quotient: np.ndarray
    prediction: np.ndarray
    difference_l2: float
    n_outside_window: int


def linearize(model, G_fn, rho_eps, theta_eps, eps, m, window=None, h=FD_STEP):
    """Compare (G(rho, theta) - G(1, theta_bar))/eps^m with its linear prediction."""
    if not (0 < eps <= 1):
        raise ValueError("eps must lie in (0, 1]")
    rho_eps = np.asarray(rho_eps, dtype=float)
    theta_eps = np.asarray(theta_eps, dtype=float)
    window = window or EssentialWindow(theta_bar=model.theta_bar)
    n_out = int(np.count_nonzero(~window.contains(rho_eps, theta_eps)))
    tb = model.theta_bar
    scale = eps**m
    G0 = G_fn(1.0, tb)
    quotient = (G_fn(rho_eps, theta_eps) - G0) / scale
    dGr = (G_fn(1.0 + h, tb) - G_fn(1.0 - h, tb)) / (2 * h)
    dGt = (G_fn(1.0, tb * (1 + h)) - G_fn(1.0, tb * (1 - h))) / (2 * h * tb)
    R = (rho_eps - 1.0) / scale
    Theta = (theta_eps - tb) / scale
    prediction = dGr * R + dGt * Theta
    diff = np.atleast_1d(quotient - prediction)
    return LinearizationResult(quotient, prediction, float(np.sqrt(np.mean(diff**2))), n_out)


# --------------------------------------------------------------------------
# structural audit

@dataclass
class AuditCheck:
    name: str
    passed: bool
    value: float = float("nan")
    witnesses: list = field(default_factory=list)
    note: str = ""

    def to_dict(self):
        return {"name": self.name, "passed": bool(self.passed), "value": _jsonable(self.value),
                "witnesses": [float(w) for w in self.witnesses], "note": self.note}


def _jsonable(x):
    x = float(x)
    return x if np.isfinite(x) else None


@dataclass
class AuditReport:
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def eos_passed(self):
        """Checks on P only; transport laws may be switched off for inviscid runs."""
        return all(c.passed for c in self.checks if c.name in EOS_CHECKS)

    def failures(self):
        return [c.name for c in self.checks if not c.passed]

    def check(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return {"passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


EOS_CHECKS = ("P(0)=0", "P'>0", "ratio bound", "tail limit")
DEFAULT_Z_GRID = np.logspace(-4, 8, 241)


def structural_audit(model, Z_grid=None, tail_tol=1e-2, max_witnesses=10):
    Z = DEFAULT_Z_GRID if Z_grid is None else np.asarray(Z_grid, dtype=float)
    if np.any(Z <= 0) or np.any(np.diff(Z) <= 0):
        raise ValueError("Z_grid must be positive and increasing")
    P = model.P
    PZ = P(Z)
    dP = P.deriv(Z)
    checks = []

    p0 = float(P(np.array(0.0)))
    checks.append(AuditCheck("P(0)=0", abs(p0) <= 1e-14, p0))

    bad = Z[~(dP > 0)]
    checks.append(AuditCheck("P'>0", bad.size == 0, float(dP.min()), bad[:max_witnesses].tolist()))

    ratio = (5.0 / 3.0 * PZ - Z * dP) / Z
    bad = Z[~((ratio > 0) & np.isfinite(ratio))]
    checks.append(AuditCheck("ratio bound", bad.size == 0, float(np.max(ratio)),
                             bad[:max_witnesses].tolist(),
                             note=f"observed range [{np.min(ratio):.6g}, {np.max(ratio):.6g}]"))

    tail = PZ / Z ** (5.0 / 3.0)
    # compare the tail ratio across the last decade of the grid
    top = Z >= Z[-1] / 10.0
    t_top = tail[top]
    rel = abs(t_top[-1] - t_top[0]) / abs(t_top[-1]) if t_top[-1] != 0 else np.inf
    ok = bool(np.all(t_top > 0) and rel <= tail_tol)
    checks.append(AuditCheck("tail limit", ok, float(tail[-1]),
                             [] if ok else [float(Z[-1])],
                             note=f"relative change over last decade {rel:.3g}"))

    mu_ok = model.mu_bar > 0 and model.eta_bar >= 0
    checks.append(AuditCheck("viscosity bounds", mu_ok, model.mu_bar,
                             note="mu = mu_bar (1 + theta), eta = eta_bar (1 + theta)"))
    checks.append(AuditCheck("conductivity bounds", model.kappa_bar > 0, model.kappa_bar,
                             note="kappa = kappa_bar (1 + theta^3)"))
    return AuditReport(checks)
