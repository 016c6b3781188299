"""CSV, JSON and SVG emission for sweep reports."""
import csv
import json
import math
import os
from dataclasses import asdict, is_dataclass

import jsonschema

CSV_COLUMNS = [
    ("config_hash", "sha256 of the canonical JSON of the run configuration"),
    ("m", "Mach exponent"),
    ("centrifugal_on", "centrifugal force enabled"),
    ("eps", "scaling parameter"),
    ("t", "sample time"),
    ("tp_metric", "||d3 u^h||_2 / ||u^h||_2"),
    ("geo_residual", "||e3 x u^h + grad_h (p - p~)/eps||_2 (m = 1 only)"),
    ("bous_residual", "H^-1 proxy of grad(p_r R + p_t Theta - G - delta2 F)"),
    ("mass_drift", "relative drift of int rho"),
    ("energy_drift", "relative drift of the total scaled energy"),
    ("balance_residual", "dissipation balance residual"),
    ("sigma_min", "minimum of the entropy production"),
    ("qg_diff", "||<u^h> - grad_h^perp q||_2 against the QG run (m = 1)"),
]

_num = {"type": ["number", "null"]}
REPORT_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["config_hash", "config", "records", "summary", "fits", "flags", "waves"],
    "properties": {
        "config_hash": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "config": {"type": "object"},
        "records": {"type": "array", "items": {
            "type": "object", "required": ["config_hash", "eps", "t"],
            "properties": {"config_hash": {"type": "string"}, "eps": {"type": "number"},
                           "t": {"type": "number"}}}},
        "summary": {"type": "array", "items": {
            "type": "object", "required": ["m", "eps"],
            "properties": {"m": {"type": "number"}, "eps": {"type": "number"}}}},
        "fits": {"type": "object", "additionalProperties": {
            "type": "object", "additionalProperties": {
                "type": "object", "required": ["slope", "width"],
                "properties": {"slope": _num, "width": _num}}}},
        "flags": {"type": "object", "additionalProperties": {
            "type": "object", "additionalProperties": {"type": "boolean"}}},
        "waves": {"type": "array"},
        "meta": {"type": "object"},
    },
}


def _clean(x):
    """JSON-safe copy: NaN/inf become null, numpy scalars become Python numbers."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def report_dict(report):
    d = asdict(report) if is_dataclass(report) else dict(report)
    h = d.get("config_hash", "0" * 64)
    d["records"] = [dict(r, config_hash=h) for r in d.get("records", [])]
    return _clean(d)


def validate_report(doc):
    jsonschema.validate(doc, REPORT_SCHEMA)


def write_csv(report, path):
    doc = report_dict(report)
    cols = [c for c, _ in CSV_COLUMNS]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in doc["records"]:
            w.writerow(["" if r.get(c) is None else _fmt(r.get(c)) for c in cols])


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_json(report, path):
    doc = report_dict(report)
    validate_report(doc)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    return doc


# ----------------------------------------------------------------------
# minimal SVG line plots

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]


def svg_lines(series, title="", xlabel="", ylabel="", logx=False, logy=False,
              width=480, height=320):
    """Self-contained SVG with one polyline per (label, xs, ys) series."""
    pad = 50
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if logy else (lambda v: v)
    pts = []
    for label, xs, ys in series:
        ok = [(tx(x), ty(y)) for x, y in zip(xs, ys)
              if y is not None and math.isfinite(y) and (not logy or y > 0) and (not logx or x > 0)]
        pts.append((label, ok))
    allp = [p for _, ps in pts for p in ps] or [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in allp), max(p[0] for p in allp)
    y0, y1 = min(p[1] for p in allp), max(p[1] for p in allp)
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0
    sx = lambda x: pad + (x - x0) / (x1 - x0) * (width - 2 * pad)
    sy = lambda y: height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="13">{title}</text>',
           f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle" font-size="11">{xlabel}</text>',
           f'<text x="14" y="{height / 2}" font-size="11" transform="rotate(-90 14 {height / 2})" '
           f'text-anchor="middle">{ylabel}</text>',
           f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
           f'fill="none" stroke="black"/>']
    for i, (label, ps) in enumerate(pts):
        c = _COLORS[i % len(_COLORS)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in ps)
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{coords}">'
                   f'<title>{label}</title></polyline>')
        out.append(f'<text x="{width - pad + 4}" y="{pad + 12 * (i + 1)}" font-size="10" '
                   f'fill="{c}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out)


def _series_vs_t(records, key):
    groups = {}
    for r in records:
        lab = f"m={r['m']:g} F={'on' if r['centrifugal_on'] else 'off'} eps={r['eps']:g}"
        groups.setdefault(lab, ([], []))
        groups[lab][0].append(r["t"])
        groups[lab][1].append(r.get(key))
    return [(k, xs, ys) for k, (xs, ys) in groups.items()]


def _series_vs_eps(summary, key):
    groups = {}
    for s in summary:
        lab = f"m={s['m']:g} F={'on' if s['centrifugal_on'] else 'off'}"
        groups.setdefault(lab, ([], []))
        groups[lab][0].append(s["eps"])
        groups[lab][1].append(s.get(key))
    return [(k, xs, ys) for k, (xs, ys) in groups.items()]


def emit_report(report, out_dir, formats=("csv", "json", "svg"), stem="sweep"):
    """Write the requested formats into out_dir; returns the written paths."""
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise OSError(f"output directory {out_dir} is not writable")
    doc = report_dict(report)
    paths = {}
    if "csv" in formats:
        p = os.path.join(out_dir, f"{stem}.csv")
        write_csv(report, p)
        paths["csv"] = p
    if "json" in formats:
        p = os.path.join(out_dir, f"{stem}.json")
        write_json(report, p)
        paths["json"] = p
    if "svg" in formats:
        plots = {
            "tp_vs_t": (_series_vs_t(doc["records"], "tp_metric"), "Taylor-Proudman metric", "t", False),
            "bous_vs_t": (_series_vs_t(doc["records"], "bous_residual"), "Boussinesq residual", "t", False),
            "tp_vs_eps": (_series_vs_eps(doc["summary"], "tp_avg"), "windowed TP metric", "eps", True),
            "bous_vs_eps": (_series_vs_eps(doc["summary"], "bous_avg"), "windowed Boussinesq residual", "eps", True),
        }
        paths["svg"] = []
        for name, (series, title, xl, logx) in plots.items():
            p = os.path.join(out_dir, f"{stem}_{name}.svg")
            with open(p, "w") as fh:
                fh.write(svg_lines(series, title, xl, title, logx=logx, logy=logx))
            paths["svg"].append(p)
    return paths


def csv_schema_doc():
    return "\n".join(f"{c}: {d}" for c, d in CSV_COLUMNS)
