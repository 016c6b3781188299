"""Epsilon sweeps of the primitive solver with limit-constraint diagnostics.

Convergence toward Taylor-Proudman, geostrophic and Boussinesq balances is
weak in time: ill-prepared data carry acoustic-Poincare waves of frequency
O(eps^-m) (or O(eps^-1)) that do not decay as eps -> 0.  Besides the
instantaneous values sampled every ``sample_dt``, each run therefore
accumulates Hann-windowed time averages over [0, t_end], and the flags are
computed from those averages.
"""
import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .data import gen_ill_prepared
from .equilibrium import EpsilonScaling
from .limits import QGState, qg_step
from .primitive import PrimitiveSystem, primitive_diagnostics, primitive_step, stable_dt
from .rates import fit_rate
from .spectral import VELOCITY_PARITY, SpectralGrid, enforce_parity
from .thermo import ThermoModel, linearization_coeffs
from .waves import WavePropagator, WaveState, gamma_of, wave_propagate


@dataclass
class SweepConfig:
    regimes: list = field(default_factory=lambda: [{"m": 1.0, "centrifugal_on": False}])
    eps: list = field(default_factory=lambda: [0.4, 0.2, 0.1, 0.05])
    nh: int = 32
    nv: int = 8
    t_end: float = 0.5
    sample_dt: float = 0.05
    seed: int = 0
    band: int = 3
    amplitudes: dict = field(default_factory=lambda: {"rho": 1.0, "theta": 1.0, "u": 1.0})
    cfl: float = 0.8
    qg_compare: bool = True
    q0_mode: str = "pv"            # "pv" inversion or "verbatim" formula
    waves: bool = True

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def hash(self, model=None):
        payload = {"sweep": self.to_dict(), "model": model.to_config() if model else None}
        blob = json.dumps(payload, sort_keys=True, default=float).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class SweepReport:
    records: list                 # one row per (regime, eps, t)
    summary: list                 # one entry per (regime, eps) with windowed metrics
    fits: dict                    # metric name -> fit dict per regime
    flags: dict
    waves: list
    config: dict
    config_hash: str
    meta: dict = field(default_factory=dict)


# ----------------------------------------------------------------------
# constraint diagnostics

def tp_metric(grid, u):
    """||d3 u^h|| / ||u^h||."""
    uh = u[:2]
    d3 = np.stack([grid.grad(c)[2] for c in uh])
    n = grid.norm(uh)
    return grid.norm(d3) / n if n > 0 else 0.0


def geostrophic_residual(grid, u, pi):
    """||e3 x u^h + grad_h pi||, pi the scaled pressure deviation."""
    g = grid.grad(pi)
    r = np.stack([-u[1] + g[0], u[0] + g[1]])
    return grid.norm(r)


def boussinesq_residual(grid, b):
    """H^-1 proxy of grad b, b = p_r R + p_t Theta - G - delta2 F."""
    gb = grid.grad(b)
    return float(np.sqrt(sum(grid.h_minus1_norm(c) ** 2 for c in gb)))


class _Window:
    """Hann-weighted running time average of a dict of fields."""

    def __init__(self, t_end):
        self.T = t_end
        self.acc, self.wsum = {}, 0.0
        self.prev = None

    def weight(self, t):
        return np.sin(np.pi * t / self.T) ** 2

    def add(self, t, fields, dt):
        # trapezoid rule in time with the Hann weight
        w = self.weight(t)
        if self.prev is not None:
            tp, fp, wp = self.prev
            for k in fields:
                self.acc[k] = self.acc.get(k, 0.0) + 0.5 * dt * (wp * fp[k] + w * fields[k])
            self.wsum += 0.5 * dt * (wp + w)
        self.prev = (t, fields, w)

    def mean(self):
        return {k: v / self.wsum for k, v in self.acc.items()}


def _balance_fields(sysm, state, coeffs):
    model, sc = sysm.model, sysm.scaling
    theta = state.theta
    em = sysm.em
    p, _, _ = model.eos(state.rho, theta)
    p_static, _, _ = model.eos(sysm.rho_tilde, model.theta_bar)
    R = (state.rho - 1.0) / em
    Th = (theta - model.theta_bar) / em
    b = coeffs.d_rho_p * R + coeffs.d_theta_p * Th - sysm.G - sc.delta2 * sysm.F
    return {"u": state.u, "pi": (p - p_static) / em, "b": b}


def _metrics(grid, f, m):
    out = {"tp": tp_metric(grid, f["u"]), "bous": boussinesq_residual(grid, f["b"])}
    out["geo"] = geostrophic_residual(grid, f["u"], f["pi"]) if m == 1 else float("nan")
    return out


# ----------------------------------------------------------------------
# QG comparison

def qg_initial(grid, data, sysm, coeffs, mode="pv"):
    """q0 on the horizontal grid from the ill-prepared data (zero-mean gauge).

    "pv": invert (1/A - Delta_h) q0 = <Lam0>/A - curl_h<u0^h>, i.e. conserve
    gamma, with Lam0 = p_r <R0> + p_t <Theta0>.  "verbatim":
    q0 = curl_h<u0^h> - (p_r <R0> + p_t <Theta0>).
    """
    gh = grid.horizontal()
    R0 = data.R0(sysm.rho_tilde, sysm.scaling)
    lam = coeffs.d_rho_p * R0.mean(axis=-1) + coeffs.d_theta_p * data.Theta0.mean(axis=-1)
    lam = lam - lam.mean()
    curl = gh.curl_h(data.u0[:2].mean(axis=-1))
    if mode == "verbatim":
        q = curl - lam
    elif mode == "pv":
        rhs = lam / coeffs.A - curl
        q = gh.ifft(gh.fft(rhs) / (1.0 / coeffs.A + gh.k2h))
    else:
        raise ValueError(f"unknown q0 mode {mode!r}")
    return q - q.mean()


# ----------------------------------------------------------------------
# linear wave study of gamma compactness

def wave_modulus_study(grid, data, coeffs, eps_list, m, t_end, n_samples=11, seed=0):
    """Time moduli ||gamma(t+d) - gamma(t)|| and ||W(t+d) - W(t)|| per eps.

    Uses the exact propagator with constant forcing and d = 0.1 min(eps)^m.
    """
    A = coeffs.A
    d = 0.1 * min(eps_list) ** m
    rng = np.random.default_rng(seed + 1)
    Gf = np.stack([grid.band_limit(rng.standard_normal(grid.shape), data.band) for _ in range(3)])
    Gf = enforce_parity(grid, Gf, VELOCITY_PARITY)
    Gf = Gf / np.max(np.abs(Gf))
    f = np.zeros(grid.shape)
    Lam0 = coeffs.d_rho_p * data.r1 + coeffs.d_theta_p * data.Theta0
    rows = []
    ts = np.linspace(0.0, t_end, n_samples)
    for eps in eps_list:
        sc = EpsilonScaling(eps, m)
        prop = WavePropagator(grid, sc, A)
        st = WaveState(grid, Lam0, data.u0.copy(), sc, A)
        mg, mw = 0.0, 0.0
        prev_t = 0.0
        for t in ts:
            st = wave_propagate(st, t - prev_t, forcing=(f, Gf), propagator=prop)
            prev_t = t
            nxt = wave_propagate(st, d, forcing=(f, Gf), propagator=prop)
            gh = grid.horizontal()
            mg = max(mg, gh.norm(gamma_of(nxt) - gamma_of(st)))
            mw = max(mw, grid.norm(nxt.W - st.W))
        rows.append({"m": m, "eps": eps, "delta": d, "gamma_modulus": mg, "W_modulus": mw})
    return rows


# ----------------------------------------------------------------------

def _strictly_decreasing_in_eps(eps, vals):
    """True when the metric strictly decreases as eps decreases."""
    order = np.argsort(eps)[::-1]
    v = np.asarray(vals)[order]
    return bool(np.all(np.isfinite(v)) and np.all(np.diff(v) < 0))


def _strictly_increasing_as_eps_decreases(eps, vals):
    order = np.argsort(eps)[::-1]
    v = np.asarray(vals)[order]
    return bool(np.all(np.diff(v) > 0))


class SweepAbort(RuntimeError):
    def __init__(self, msg, eps, m):
        super().__init__(f"eps={eps}, m={m}: {msg}")
        self.eps, self.m = eps, m


def run_single(model, regime, eps, cfg, coeffs, log=None):
    """One primitive run; returns (sample rows, windowed metrics, qg rows)."""
    m, cent = float(regime["m"]), bool(regime.get("centrifugal_on", False))
    grid = SpectralGrid(cfg.nh, cfg.nv)
    sc = EpsilonScaling(eps, m, cent)
    sysm = PrimitiveSystem(grid, model, sc)
    data = gen_ill_prepared(grid, sc, cfg.seed, cfg.band, cfg.amplitudes)
    state = sysm.perturbed(data.r1, data.u0, data.Theta0)
    ref = primitive_diagnostics(state)
    dt_max = cfg.cfl * stable_dt(state)
    n_sub = int(np.ceil(cfg.sample_dt / dt_max - 1e-12))
    dt = cfg.sample_dt / n_sub
    n_out = int(round(cfg.t_end / cfg.sample_dt))
    win = _Window(cfg.t_end)
    win.add(0.0, _balance_fields(sysm, state, coeffs), dt)

    qg = None
    if m == 1 and cfg.qg_compare:
        q0 = qg_initial(grid, data, sysm, coeffs, cfg.q0_mode)
        tb = model.theta_bar
        qg = QGState(grid.horizontal(), q0, coeffs.A, float(model.mu(tb)))
    rows = []

    def sample(st, qs):
        d = primitive_diagnostics(st, ref)
        f = _balance_fields(sysm, st, coeffs)
        met = _metrics(grid, f, m)
        row = {"m": m, "centrifugal_on": cent, "eps": eps, "t": round(st.t, 12),
               "tp_metric": met["tp"], "geo_residual": met["geo"], "bous_residual": met["bous"],
               "mass_drift": (d.mass - ref.mass) / ref.mass,
               "energy_drift": (d.energy - ref.energy) / abs(ref.energy),
               "balance_residual": d.balance_residual, "sigma_min": d.sigma_min,
               "qg_diff": float("nan")}
        if qs is not None:
            gh = qs.grid
            U = gh.perp_grad_h(qs.q)
            row["qg_diff"] = gh.norm(st.u[:2].mean(axis=-1) - U)
        rows.append(row)

    sample(state, qg)
    try:
        for k in range(n_out):
            for _ in range(n_sub):
                state = primitive_step(state, dt)
                win.add(state.t, _balance_fields(sysm, state, coeffs), dt)
                if qg is not None:
                    qg = qg_step(qg, dt) if np.any(qg.q) else qg
            sample(state, qg)
    except Exception as exc:    # tag solver aborts with the offending eps
        raise SweepAbort(str(exc), eps, m) from exc
    avg = _metrics(grid, win.mean(), m)
    if log:
        log(f"m={m} F={'on' if cent else 'off'} eps={eps}: steps={n_out * n_sub} "
            f"tp={avg['tp']:.3e} geo={avg['geo']:.3e} bous={avg['bous']:.3e}")
    summ = {"m": m, "centrifugal_on": cent, "eps": eps, "dt": dt,
            "tp_avg": avg["tp"], "geo_avg": avg["geo"], "bous_avg": avg["bous"],
            "tp_final": rows[-1]["tp_metric"], "geo_final": rows[-1]["geo_residual"],
            "bous_final": rows[-1]["bous_residual"],
            "max_mass_drift": max(abs(r["mass_drift"]) for r in rows),
            "max_energy_drift": max(abs(r["energy_drift"]) for r in rows),
            "max_balance_residual": max(abs(r["balance_residual"]) for r in rows)}
    return rows, summ, data


def run_sweep(cfg, model=None, log=None):
    model = model or ThermoModel()
    coeffs = linearization_coeffs(model)
    t0 = time.time()
    records, summary, waves = [], [], []
    fits, flags = {}, {}
    for regime in cfg.regimes:
        m = float(regime["m"])
        cent = bool(regime.get("centrifugal_on", False))
        tag = f"m={m:g},F={'on' if cent else 'off'}"
        rs = []
        data = None
        for eps in cfg.eps:
            rows, summ, data = run_single(model, regime, eps, cfg, coeffs, log)
            records.extend(rows)
            summary.append(summ)
            rs.append(summ)
        eps = [s["eps"] for s in rs]
        fit = {}
        if len(eps) >= 3:
            for key in ("tp_avg", "geo_avg", "bous_avg"):
                v = np.array([s[key] for s in rs])
                if np.all(np.isfinite(v)) and np.all(v > 0):
                    fit[key] = fit_rate(eps, v, discard=False).to_dict()
        fits[tag] = fit
        if len(eps) >= 2:
            fl = {}
            if m == 1:
                fl["taylor_proudman_decreasing"] = _strictly_decreasing_in_eps(eps, [s["tp_avg"] for s in rs])
                fl["geostrophic_decreasing"] = _strictly_decreasing_in_eps(eps, [s["geo_avg"] for s in rs])
            if m > 1:
                fl["boussinesq_decreasing"] = _strictly_decreasing_in_eps(eps, [s["bous_avg"] for s in rs])
            if cfg.waves and data is not None and not cent:
                grid = SpectralGrid(cfg.nh, cfg.nv)
                wr = wave_modulus_study(grid, data, coeffs, eps, m, cfg.t_end, seed=cfg.seed)
                waves.extend(wr)
                g_mod = [w["gamma_modulus"] for w in wr]
                w_mod = [w["W_modulus"] for w in wr]
                fl["gamma_modulus_bounded"] = bool(max(g_mod) <= 2.0 * g_mod[int(np.argmax(eps))])
                fl["W_modulus_grows"] = _strictly_increasing_as_eps_decreases(eps, w_mod)
            flags[tag] = fl
    cfgd = cfg.to_dict()
    meta = {"elapsed_s": time.time() - t0, "model": model.to_config(),
            "coeffs": {k: getattr(coeffs, k) for k in coeffs.__dataclass_fields__}}
    return SweepReport(records, summary, fits, flags, waves, cfgd, cfg.hash(model), meta)


def all_flags_true(report):
    vals = [v for fl in report.flags.values() for v in fl.values()]
    return bool(vals) and all(vals)
