import csv
import json
import math

import jsonschema
import numpy as np
import pytest
from hypothesis import given, strategies as st

from nsflab.cli import main
from nsflab.config import ConfigError, load_config, parse_config
from nsflab.data import gen_ill_prepared
from nsflab.equilibrium import EpsilonScaling
from nsflab.rates import fit_rate
from nsflab.report import CSV_COLUMNS, REPORT_SCHEMA, emit_report, report_dict, validate_report
from nsflab.spectral import SpectralGrid, VELOCITY_PARITY, parity_error
from nsflab.sweep import (SweepConfig, SweepReport, all_flags_true, boussinesq_residual,
                          geostrophic_residual, run_sweep, tp_metric)

TINY = dict(nh=8, nv=4, t_end=0.1, sample_dt=0.05, band=1, waves=True)


# ----------------------------------------------------------------------
# initial data

def test_ill_prepared_contract():
    g = SpectralGrid(16, 8)
    d = gen_ill_prepared(g, EpsilonScaling(0.2), seed=3, band=3)
    assert abs(g.integrate(d.r1)) <= 1e-13 and abs(g.integrate(d.Theta0)) <= 1e-13
    assert parity_error(g, d.r1, "even") == 0 and parity_error(g, d.u0, VELOCITY_PARITY) == 0
    assert d.norms["r1"]["Linf"] <= 1.0 + 1e-12 and d.norms["u0"]["Linf"] == pytest.approx(1.0)
    # ill-prepared: vertical structure and nonzero divergence
    assert tp_metric(g, d.u0) > 0.1 and np.max(np.abs(g.div(d.u0))) > 0.1


def test_ill_prepared_deterministic():
    g = SpectralGrid(16, 8)
    a, b = gen_ill_prepared(g, seed=7), gen_ill_prepared(g, seed=7)
    assert np.array_equal(a.r1, b.r1) and np.array_equal(a.u0, b.u0) and np.array_equal(a.Theta0, b.Theta0)
    assert not np.array_equal(a.r1, gen_ill_prepared(g, seed=8).r1)


def test_ill_prepared_zero_amplitude(model):
    from nsflab.primitive import PrimitiveSystem
    g = SpectralGrid(8, 4)
    d = gen_ill_prepared(g, seed=1, band=1, amplitudes={"rho": 0, "theta": 0, "u": 0})
    sysm = PrimitiveSystem(g, model, EpsilonScaling(0.3))
    st0 = sysm.perturbed(d.r1, d.u0, d.Theta0)
    static = sysm.static_state()
    assert np.array_equal(st0.rho, static.rho) and not np.any(st0.m)


def test_ill_prepared_band_check():
    with pytest.raises(ValueError):
        gen_ill_prepared(SpectralGrid(8, 4), band=2)
    with pytest.raises(ValueError):
        gen_ill_prepared(SpectralGrid(8, 4), band=0)


# ----------------------------------------------------------------------
# rate fitting

def test_fit_rate_exact_power_laws():
    eps = np.array([0.1, 0.05, 0.025])
    assert fit_rate(eps, 3 * eps**2).slope == pytest.approx(2.0, abs=1e-12)
    assert fit_rate(eps, 0.5 * eps).slope == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        fit_rate(eps[:2], eps[:2])
    with pytest.raises(ValueError):
        fit_rate(eps, -eps)


@given(st.integers(0, 10**6))
def test_fit_rate_noisy(seed):
    rng = np.random.default_rng(seed)
    eps = 0.2 * 0.5 ** np.arange(5)
    err = eps**1.5 * (1 + 0.01 * rng.standard_normal(5))
    assert fit_rate(eps, err).slope == pytest.approx(1.5, abs=0.05)


def test_fit_rate_discards_preasymptotic_point():
    eps = np.array([0.4, 0.2, 0.1, 0.05])
    err = eps**2
    err[0] *= 5.0
    f = fit_rate(eps, err)
    assert f.discarded == (0.4,) and f.slope == pytest.approx(2.0, abs=1e-10)
    assert fit_rate(eps, err, discard=False).discarded == ()


# ----------------------------------------------------------------------
# diagnostics

def test_constraint_metrics_vanish_on_balanced_fields():
    g = SpectralGrid(16, 8)
    x1, x2, x3 = g.coords()
    pi = np.cos(x1) * np.sin(2 * x2)
    gp = g.grad(pi)
    u = np.stack([-gp[1], gp[0], 0 * x1])         # e3 x u^h = -grad_h pi
    assert tp_metric(g, u) <= 1e-14
    assert geostrophic_residual(g, u, pi) <= 1e-12
    assert boussinesq_residual(g, 2.0 + 0 * x1) <= 1e-14
    assert tp_metric(g, np.stack([np.cos(np.pi * x3), 0 * x1, 0 * x1])) == pytest.approx(np.pi, rel=1e-12)


# ----------------------------------------------------------------------
# reports

def _empty_report():
    cfg = SweepConfig(eps=[])
    return SweepReport([], [], {}, {}, [], cfg.to_dict(), cfg.hash())


def test_empty_report(tmp_path):
    paths = emit_report(_empty_report(), tmp_path)
    with open(paths["csv"]) as fh:
        rows = list(csv.reader(fh))
    assert rows == [[c for c, _ in CSV_COLUMNS]]
    doc = json.loads(open(paths["json"]).read())
    jsonschema.validate(doc, REPORT_SCHEMA)
    assert doc["records"] == []


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_report(_empty_report(), blocker / "sub")


@pytest.fixture(scope="module")
def tiny_report(model):
    cfg = SweepConfig(regimes=[{"m": 1, "centrifugal_on": False}, {"m": 2, "centrifugal_on": True}],
                      eps=[0.5, 0.4, 0.3], **TINY)
    return run_sweep(cfg, model)


def test_sweep_report_structure(tiny_report, tmp_path):
    rep = tiny_report
    assert set(rep.flags) == {"m=1,F=off", "m=2,F=on"}
    assert set(rep.flags["m=1,F=off"]) == {"taylor_proudman_decreasing", "geostrophic_decreasing",
                                           "gamma_modulus_bounded", "W_modulus_grows"}
    assert set(rep.flags["m=2,F=on"]) == {"boussinesq_decreasing"}
    assert "tp_avg" in rep.fits["m=1,F=off"] and "bous_avg" in rep.fits["m=2,F=on"]
    assert len(rep.records) == 2 * 3 * 3
    assert max(abs(r["mass_drift"]) for r in rep.records) <= 1e-12
    assert min(r["sigma_min"] for r in rep.records) >= 0
    doc = report_dict(rep)
    validate_report(doc)
    assert all(r["config_hash"] == rep.config_hash for r in doc["records"])
    assert isinstance(all_flags_true(rep), bool)
    paths = emit_report(rep, tmp_path)
    # one polyline per eps series in the time plots, one per regime in the eps plots
    tp_t = open(paths["svg"][0]).read()
    assert tp_t.count("<polyline") == 6
    assert open(paths["svg"][2]).read().count("<polyline") == 2


def test_qg_comparison_recorded(tiny_report):
    m1 = [r for r in tiny_report.records if r["m"] == 1.0]
    m2 = [r for r in tiny_report.records if r["m"] == 2.0]
    assert all(math.isfinite(r["qg_diff"]) for r in m1)
    assert all(math.isnan(r["geo_residual"]) for r in m2)


def test_single_eps_sweep_has_no_fits(model):
    rep = run_sweep(SweepConfig(eps=[0.5], **TINY), model)
    assert rep.fits == {"m=1,F=off": {}} and rep.flags == {}
    assert len(rep.records) == 3


def test_sweep_csv_deterministic(model, tmp_path):
    cfg = SweepConfig(eps=[0.5], **TINY)
    a = emit_report(run_sweep(cfg, model), tmp_path / "a", ("csv",))
    b = emit_report(run_sweep(cfg, model), tmp_path / "b", ("csv",))
    assert open(a["csv"], "rb").read() == open(b["csv"], "rb").read()


def test_config_hash_changes_with_config():
    assert SweepConfig(seed=1).hash() != SweepConfig(seed=2).hash()
    assert SweepConfig().hash() == SweepConfig().hash()


# ----------------------------------------------------------------------
# configuration and CLI

def test_parse_config_roundtrip(tmp_path):
    tree = {"eos": {"P": "default", "a": 0.0}, "grid": {"nh": 16, "nv": 8},
            "scaling": {"eps": [0.2, 0.1], "m": 1}, "output": {"formats": ["csv"]}}
    p = tmp_path / "c.yaml"
    import yaml
    p.write_text(yaml.safe_dump(tree))
    cfg = load_config(str(p))
    assert cfg.get("grid", "nh") == 16 and cfg.model().is_default
    (tmp_path / "c.json").write_text(json.dumps(tree))
    assert load_config(str(tmp_path / "c.json")).to_dict() == cfg.to_dict()


@pytest.mark.parametrize("tree", [{"grid": {"nh": 1}}, {"bogus": {}}, {"scaling": {"eps": 2.0}},
                                  {"eos": {"P": {"Z": [1, 2, 3, 4]}}}, {"run": {"q0_mode": "x"}}])
def test_parse_config_rejects(tree):
    with pytest.raises(ConfigError):
        parse_config(tree)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.yaml"))
    bad = tmp_path / "bad.yaml"
    bad.write_text("- a\n- b\n")
    with pytest.raises(ConfigError):
        load_config(str(bad))
    bad.write_text("grid: {nh: [\n")
    with pytest.raises(ConfigError):
        load_config(str(bad))


def test_cli_exit_codes(tmp_path, capsys):
    out = str(tmp_path / "o")
    assert main(["--out", out, "audit-eos"]) == 0
    assert json.loads(open(tmp_path / "o" / "audit_eos.json").read())["audit"]["passed"]
    assert main(["--out", out, "waves", "--test", "dispersion"]) == 0
    assert main(["--out", out, "primitive", "--eps", "0"]) == 3
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("grid: {bogus: 1}\n")
    assert main(["--config", str(cfg), "--out", out, "lp"]) == 3
    # a non-monotone table fails the structural audit: invariant violation
    cfg.write_text("eos: {P: {Z: [0.5, 1, 2, 3], P: [1, 0.9, 2, 3]}}\n")
    assert main(["--config", str(cfg), "--out", out, "audit-eos"]) == 2


def test_cli_lp_and_primitive(tmp_path):
    out = str(tmp_path / "o")
    assert main(["--out", out, "lp"]) == 0
    assert main(["--out", out, "primitive", "--grid", "16x8", "--t-end", "0.02", "--eps", "0.5"]) == 0
    with open(tmp_path / "o" / "primitive.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) >= 2 and float(rows[-1]["t"]) == pytest.approx(0.02)
