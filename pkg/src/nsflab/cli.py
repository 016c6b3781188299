"""Command line entry point: nsflab <subcommand> [options].

Exit codes: 0 success, 2 invariant violation, 3 configuration error.
"""
import argparse
import csv
import json
import logging
import os
import sys

import numpy as np
import scipy.fft as sfft

from .config import ConfigError, load_config
from .limits import CFLError
from .primitive import SolverAbort
from .sweep import SweepAbort

log = logging.getLogger("nsflab")

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG = 0, 2, 3


class InvariantViolation(RuntimeError):
    pass


def _write_json(path, obj):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    from .report import _clean
    with open(path, "w") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)


def _write_rows(path, rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    cols = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def _parse_grid(text):
    try:
        parts = [int(p) for p in text.lower().replace(",", "x").split("x")]
    except ValueError:
        raise ConfigError(f"bad grid spec {text!r}; use NHxNV") from None
    if len(parts) == 1:
        return parts[0], None
    if len(parts) == 2:
        return parts[0], parts[1]
    raise ConfigError(f"bad grid spec {text!r}; use NHxNV")


def _require(ok, msg):
    if not ok:
        raise InvariantViolation(msg)


# ----------------------------------------------------------------------
# subcommands

def cmd_audit_eos(args, cfg):
    from .thermo import gibbs_residual, linearization_coeffs, structural_audit, EssentialWindow
    model = cfg.model()
    rep = structural_audit(model)
    out = {"audit": rep.to_dict()}
    if rep.eos_passed:
        c = linearization_coeffs(model)
        rng = np.random.default_rng(args.seed)
        rho, theta = EssentialWindow(theta_bar=model.theta_bar).sample(1000, rng)
        out["coeffs"] = {k: getattr(c, k) for k in c.__dataclass_fields__}
        out["relnum_residuals"] = list(c.relnum_residuals())
        out["gibbs_residual"] = float(gibbs_residual(model, rho, theta))
    _write_json(os.path.join(args.out, "audit_eos.json"), out)
    print(json.dumps({"passed": rep.passed, "failures": rep.failures()}, default=str))
    _require(rep.eos_passed, "structural audit failed: " + ", ".join(rep.failures()))


def cmd_statics(args, cfg):
    from .equilibrium import positivity_study, static_rate_study
    model = cfg.model()
    if args.m is not None:
        regimes = [{"m": m, "centrifugal_on": args.centrifugal} for m in args.m]
    else:
        regimes = cfg.get("scaling", "regimes") or [
            {"m": 2, "centrifugal_on": True}, {"m": 1.5, "centrifugal_on": True},
            {"m": 1, "centrifugal_on": True}, {"m": 1, "centrifugal_on": False},
            {"m": 2, "centrifugal_on": False}]
    regimes = [(float(r["m"]), bool(r.get("centrifugal_on", False))) for r in regimes]
    eps = args.eps_grid or cfg.get("scaling", "eps", [0.2, 0.1, 0.05, 0.025])
    eps = eps if isinstance(eps, list) else [eps]
    studies = static_rate_study(model, regimes, eps, radius=args.radius)
    rows, eps0 = positivity_study(model, regimes, eps, radius=max(args.radius, 2.0))
    out = {"rates": [s.to_dict() for s in studies], "positivity": rows,
           "eps0": {f"m={m:g},F={'on' if c else 'off'}": v for (m, c), v in eps0.items()},
           "rho_star": min(r["rho_min"] for r in rows)}
    _write_json(os.path.join(args.out, "statics.json"), out)
    _write_rows(os.path.join(args.out, "statics.csv"),
                [{"m": s.m, "centrifugal_on": s.centrifugal_on, "eps": e, "sup_error": err}
                 for s in studies for e, err in zip(s.eps, s.errors)])
    for s in studies:
        print(f"m={s.m:g} F={'on' if s.centrifugal_on else 'off'} slope={s.fit.slope:.4f} "
              f"expected={s.expected:g} rho_min={s.rho_min:.4f}")
    bad = [s for s in studies if abs(s.fit.slope - s.expected) > 0.1]
    _require(not bad, "static rate outside tolerance")


def cmd_lp(args, cfg):
    from .lp import DyadicSystem, besov_norm, bernstein_check, sobolev_norm
    n = cfg.get("grid", "nh", 64)
    sys_ = DyadicSystem((n, n))
    rng = np.random.default_rng(args.seed)
    out = {"partition_error": sys_.partition_error(), "bernstein": [], "sobolev_ratio": {}}
    for j in range(0, min(4, sys_.J_max - 1)):
        for p, q in ((2.0, 2.0), (2.0, np.inf)):
            st = bernstein_check(sys_, j, 1, p, q, trials=10, rng=rng)
            out["bernstein"].append(st.__dict__)
    besov_rows = []
    for s in (0, 1, 2):
        ratios = []
        for i in range(20):
            f = sys_.apply(rng.standard_normal(sys_.shape), sys_.kabs <= sys_.kmax / 2)
            b, h = besov_norm(sys_, f, s, 2, 2), sobolev_norm(sys_, f, s)
            ratios.append(b / h)
            besov_rows.append({"s": s, "trial": i, "besov": b, "sobolev": h, "ratio": b / h})
        out["sobolev_ratio"][str(s)] = [min(ratios), max(ratios)]
    _write_json(os.path.join(args.out, "lp.json"), out)
    _write_rows(os.path.join(args.out, "lp_bernstein.csv"), out["bernstein"])
    _write_rows(os.path.join(args.out, "lp_besov.csv"), besov_rows)
    print(json.dumps({"partition_error": out["partition_error"],
                      "sobolev_ratio": out["sobolev_ratio"]}))
    _require(out["partition_error"] <= 1e-12, "partition of unity violated")
    _require(all(0.25 <= r <= 4 for v in out["sobolev_ratio"].values() for r in v),
             "Besov/Sobolev ratio outside [1/4, 4]")


def cmd_waves(args, cfg):
    from .equilibrium import EpsilonScaling
    from .spectral import SpectralGrid, VELOCITY_PARITY, enforce_parity
    from .waves import (WavePropagator, WaveState, dispersion, gamma_of, propagation_support_radius,
                        wave_energy, wave_propagate)
    eps = args.eps if args.eps is not None else cfg.get("scaling", "eps", 0.5)
    m = args.m if args.m is not None else cfg.get("scaling", "m", 1.0)
    A = args.A if args.A is not None else cfg.get("run", "A", 10.0 / 3.0)
    t_end = args.t if args.t is not None else cfg.get("run", "t_end", 1.0)
    sc = EpsilonScaling(float(eps), float(m))
    if args.test == "dispersion":
        rows = []
        for k3 in range(0, 9):
            for k1 in range(0, 9):
                w = dispersion(np.array([float(k1), 0.0, np.pi * k3]), sc, A)
                rows.append({"k1": k1, "k3": np.pi * k3, **{f"omega{i}": float(v) for i, v in enumerate(w)}})
        _write_rows(os.path.join(args.out, "waves_dispersion.csv"), rows)
        print(f"wrote {len(rows)} dispersion rows")
        return
    if args.test == "cone":
        res = propagation_support_radius(0.5, sc, A, t_end)
        print(json.dumps(res.__dict__))
        _write_json(os.path.join(args.out, "waves_cone.json"), res.__dict__)
        _require(res.radius <= res.bound, "front outside the cone")
        return
    nh, nv = cfg.get("grid", "nh", 64), cfg.get("grid", "nv", 16)
    grid = SpectralGrid(nh, nv)
    rng = np.random.default_rng(args.seed)
    Lam = enforce_parity(grid, grid.band_limit(rng.standard_normal(grid.shape), 6), "even")
    W = np.stack([grid.band_limit(rng.standard_normal(grid.shape), 6) for _ in range(3)])
    W = enforce_parity(grid, W, VELOCITY_PARITY)
    st = WaveState(grid, Lam, W, sc, A)
    prop = WavePropagator(grid, sc, A)
    E0, g0 = wave_energy(st), gamma_of(st)
    gh = grid.horizontal()
    rows, worst = [], 0.0
    n = 20
    for i in range(n + 1):
        t = t_end * i / n
        s = wave_propagate(st, t, propagator=prop)
        e_drift = abs(wave_energy(s) / E0 - 1)
        g_drift = gh.norm(gamma_of(s) - g0) / gh.norm(g0)
        worst = max(worst, e_drift if args.test == "energy" else g_drift)
        rows.append({"t": t, "energy": wave_energy(s), "gamma_drift": g_drift})
    _write_rows(os.path.join(args.out, "waves.csv"), rows)
    print(f"max {args.test} drift {worst:.3e}")
    _require(worst <= 1e-12, f"{args.test} drift {worst:.3e} exceeds 1e-12")


def cmd_qg(args, cfg):
    from .limits import QGState, qg_advance, qg_energy, qg_stable_dt
    from .spectral import SpectralGrid, Field, write_snapshot
    from .thermo import linearization_coeffs
    model = cfg.model()
    c = linearization_coeffs(model)
    nh, nv = cfg.get("grid", "nh", 128), cfg.get("grid", "nv", 8)
    gh, g3 = SpectralGrid(nh), SpectralGrid(nh, nv)
    preset = cfg.get("run", "preset", "single-mode")
    rng = np.random.default_rng(args.seed)
    x1, x2 = gh.coords()
    if preset == "single-mode":
        q = np.cos(x1)
    elif preset == "random-band":
        q = gh.band_limit(rng.standard_normal(gh.shape), cfg.get("run", "band", 8))
        q = (q - q.mean()) / np.max(np.abs(q))
    else:
        raise ConfigError(f"unknown qg preset {preset!r}")
    Y = g3.band_limit(rng.standard_normal(g3.shape), 4)
    st = QGState.from_coeffs(gh, q, c, model, Upsilon=Y, grid3=g3)
    if cfg.get("run", "mu") is not None:
        st.mu = float(cfg.get("run", "mu"))
    t_end = cfg.get("run", "t_end", 1.0)
    dt = cfg.get("run", "dt", min(0.002, 0.5 * qg_stable_dt(st)))
    n = int(np.ceil(t_end / dt - 1e-9))
    dt = t_end / n
    E0 = qg_energy(st)
    rows = [{"t": 0.0, "energy": E0, "dissipation": 0.0, "mean_upsilon": float(Y.mean())}]
    for i in range(n):
        st = qg_advance(st, dt)
        if (i + 1) % max(1, n // 20) == 0 or i == n - 1:
            rows.append({"t": st.t, "energy": qg_energy(st), "dissipation": st.dissipation,
                         "mean_upsilon": float(st.Upsilon.mean())})
    _write_rows(os.path.join(args.out, "qg.csv"), rows)
    if cfg.get("output", "snapshots", False):
        write_snapshot(os.path.join(args.out, "qg_q.snap"), Field(gh, st.q, None, st.t, "q"))
    resid = (rows[-1]["energy"] - E0 + rows[-1]["dissipation"]) / max(E0, 1e-300)
    print(f"energy law residual {resid:.3e}")
    _require(abs(resid) <= 1e-8, "QG energy law violated")


def cmd_ob(args, cfg):
    from .equilibrium import EpsilonScaling
    from .limits import OBState, ob_divergence, ob_stable_dt, ob_step, ob_theta_parity_error, taylor_green
    from .primitive import slab_potentials
    from .spectral import SpectralGrid, enforce_parity, leray_project
    from .thermo import linearization_coeffs
    model = cfg.model()
    c = linearization_coeffs(model)
    nh, nv = cfg.get("grid", "nh", 64), cfg.get("grid", "nv", 8)
    gh, g3 = SpectralGrid(nh), SpectralGrid(nh, nv)
    m = cfg.get("scaling", "m", 2.0)
    sc = EpsilonScaling(cfg.get("scaling", "eps", 0.1), float(m), cfg.get("scaling", "centrifugal_on", True))
    F3, G = slab_potentials(g3, True)
    preset = cfg.get("run", "preset", "taylor-green")
    rng = np.random.default_rng(args.seed)
    Th = np.zeros(g3.shape)
    if preset == "taylor-green":
        U = taylor_green(gh)
    elif preset in ("random-band", "single-mode"):
        b = cfg.get("run", "band", 4)
        U = leray_project(gh, np.stack([gh.band_limit(rng.standard_normal(gh.shape), b) for _ in range(2)]))
        U /= np.max(np.abs(U))
        if preset == "random-band":
            Th = enforce_parity(g3, g3.band_limit(rng.standard_normal(g3.shape), b), "even")
        else:
            X1, X2, X3 = g3.coords()
            U[:] = 0
            Th = np.cos(X1) * np.cos(np.pi * X3)
    else:
        raise ConfigError(f"unknown ob preset {preset!r}")
    st = OBState.from_model(gh, g3, U, Th, c, model, F3[..., 0], G)
    if cfg.get("run", "mu") is not None:
        st.mu = float(cfg.get("run", "mu"))
    t_end = cfg.get("run", "t_end", 0.5)
    dt = cfg.get("run", "dt", min(0.005, ob_stable_dt(st)))
    n = int(np.ceil(t_end / dt - 1e-9))
    dt = t_end / n
    rows, worst_div, worst_par = [], 0.0, 0.0
    U0 = gh.norm(st.U)
    for i in range(n):
        st = ob_step(st, dt, sc)
        worst_div = max(worst_div, ob_divergence(st))
        worst_par = max(worst_par, ob_theta_parity_error(st))
        rows.append({"t": st.t, "U_ratio": gh.norm(st.U) / U0 if U0 else 0.0,
                     "theta_norm": g3.norm(st.Theta), "div": ob_divergence(st)})
    _write_rows(os.path.join(args.out, "ob.csv"), rows)
    print(f"max div {worst_div:.2e} max parity error {worst_par:.2e}")
    _require(worst_div <= 1e-12 and worst_par <= 1e-12, "OB invariant violated")


def cmd_primitive(args, cfg):
    from .data import gen_ill_prepared
    from .equilibrium import EpsilonScaling
    from .primitive import PrimitiveSystem, primitive_diagnostics, primitive_step, stable_dt
    from .spectral import Field, SpectralGrid, write_snapshot
    model = cfg.model()
    if args.nu_off:
        from dataclasses import replace
        model = replace(model, mu_bar=0.0, eta_bar=0.0, kappa_bar=0.0)
    if args.grid:
        nh, nv = _parse_grid(args.grid)
    else:
        nh, nv = cfg.get("grid", "nh", 16), cfg.get("grid", "nv", 8)
    if nv is None:
        raise ConfigError("primitive runs need a 3D grid (NHxNV)")
    eps = args.eps if args.eps is not None else cfg.get("scaling", "eps", 0.5)
    m = args.m if args.m is not None else cfg.get("scaling", "m", 1.0)
    t_end = args.t_end if args.t_end is not None else cfg.get("run", "t_end", 0.2)
    sc = EpsilonScaling(float(eps), float(m), cfg.get("scaling", "centrifugal_on", False))
    grid = SpectralGrid(nh, nv)
    sysm = PrimitiveSystem(grid, model, sc)
    data = gen_ill_prepared(grid, sc, args.seed, cfg.get("run", "band", 3), cfg.get("run", "amplitudes"))
    st = sysm.perturbed(data.r1, data.u0, data.Theta0)
    ref = primitive_diagnostics(st)
    dt = cfg.get("run", "dt", cfg.get("run", "cfl", 0.8) * stable_dt(st))
    n = max(1, int(np.ceil(t_end / dt - 1e-9)))
    dt = t_end / n
    rows = [ref.to_dict()]
    for i in range(n):
        st = primitive_step(st, dt)
        rows.append(primitive_diagnostics(st, ref).to_dict())
    _write_rows(os.path.join(args.out, "primitive.csv"), rows)
    if cfg.get("output", "snapshots", False):
        write_snapshot(os.path.join(args.out, "primitive_rho.snap"), Field(grid, st.rho, "even", st.t, "rho"))
    last = rows[-1]
    mass = abs(last["mass"] - ref.mass) / ref.mass
    print(f"steps={n} mass drift {mass:.2e} energy drift "
          f"{abs(last['energy'] - ref.energy) / abs(ref.energy):.2e} "
          f"sigma_min {min(r['sigma_min'] for r in rows):.2e}")
    _require(mass <= 1e-12 and min(r["sigma_min"] for r in rows) >= 0, "primitive invariant violated")


def cmd_sweep(args, cfg):
    from .report import emit_report
    from .sweep import SweepConfig, all_flags_true, run_sweep
    model = cfg.model()
    regimes = cfg.get("scaling", "regimes") or [
        {"m": 1, "centrifugal_on": False}, {"m": 2, "centrifugal_on": True},
        {"m": 2, "centrifugal_on": False}]
    eps = cfg.get("scaling", "eps", [0.4, 0.2, 0.1, 0.05])
    eps = eps if isinstance(eps, list) else [eps]
    run = cfg.run
    sw = SweepConfig(regimes=regimes, eps=eps, nh=cfg.get("grid", "nh", 32), nv=cfg.get("grid", "nv", 8),
                     t_end=run.get("t_end", 0.5), sample_dt=run.get("sample_dt", 0.05),
                     seed=args.seed, band=run.get("band", 3),
                     amplitudes=run.get("amplitudes", {"rho": 1.0, "theta": 1.0, "u": 1.0}),
                     cfl=run.get("cfl", 0.8), q0_mode=run.get("q0_mode", "pv"),
                     waves=run.get("waves", True), qg_compare=run.get("qg_compare", True))
    rep = run_sweep(sw, model, log=lambda s: log.info(s))
    paths = emit_report(rep, args.out, tuple(cfg.get("output", "formats", ["csv", "json", "svg"])))
    print(json.dumps({"flags": rep.flags, "paths": paths}, indent=1))
    if rep.flags:
        _require(all_flags_true(rep), "a convergence flag is false")


COMMANDS = {"audit-eos": cmd_audit_eos, "statics": cmd_statics, "lp": cmd_lp, "waves": cmd_waves,
            "qg": cmd_qg, "ob": cmd_ob, "primitive": cmd_primitive, "sweep": cmd_sweep}


def build_parser():
    p = argparse.ArgumentParser(prog="nsflab", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="YAML or JSON configuration file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None, help="FFT worker threads")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        if name in ("waves", "primitive"):
            sp.add_argument("--eps", type=float)
            sp.add_argument("--m", type=float)
        if name == "statics":
            sp.add_argument("--m", type=float, nargs="+", help="Mach exponents")
            sp.add_argument("--eps-grid", dest="eps_grid", type=float, nargs="+")
            sp.add_argument("--centrifugal", action="store_true", help="enable F (with --m)")
            sp.add_argument("--radius", type=float, default=1.0, help="cylinder radius l")
        if name == "waves":
            sp.add_argument("--A", type=float)
            sp.add_argument("--t", type=float)
            sp.add_argument("--test", choices=["energy", "gamma", "cone", "dispersion"], default="energy")
        if name == "primitive":
            sp.add_argument("--grid", help="NHxNV, e.g. 16x8")
            sp.add_argument("--t-end", dest="t_end", type=float)
            sp.add_argument("--nu-off", dest="nu_off", action="store_true",
                            help="inviscid, non-conducting run")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if cfg.get("output", "dir") and args.out == "out":
            args.out = cfg.get("output", "dir")
        os.makedirs(args.out, exist_ok=True)
        if args.threads:
            with sfft.set_workers(args.threads):
                COMMANDS[args.command](args, cfg)
        else:
            COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantViolation, SolverAbort, SweepAbort, CFLError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ValueError as exc:
        # bad physical parameters from the command line are configuration errors
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
