"""Multi-scale sweep over eps for the primitive solver; writes CSV, JSON and SVG."""
import argparse
import json
import logging

from nsflab.config import load_config
from nsflab.report import emit_report
from nsflab.sweep import SweepConfig, all_flags_true, run_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", help="YAML/JSON run configuration (grid, scaling, run sections)")
    ap.add_argument("--out", default="out/sweep")
    ap.add_argument("--quick", action="store_true", help="tiny grid, for smoke testing")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    cfg = load_config(args.config)
    sw = SweepConfig(
        regimes=cfg.get("scaling", "regimes") or [{"m": 1, "centrifugal_on": False},
                                                  {"m": 2, "centrifugal_on": True},
                                                  {"m": 2, "centrifugal_on": False}],
        eps=cfg.get("scaling", "eps", [0.4, 0.2, 0.1, 0.05]),
        nh=cfg.get("grid", "nh", 32), nv=cfg.get("grid", "nv", 8),
        t_end=cfg.get("run", "t_end", 0.5), seed=cfg.get("run", "seed", 0))
    if args.quick:
        sw.nh, sw.nv, sw.t_end, sw.band, sw.eps = 8, 4, 0.1, 1, [0.5, 0.4, 0.3]
    rep = run_sweep(sw, cfg.model(), log=logging.info)
    paths = emit_report(rep, args.out)
    print(json.dumps(rep.flags, indent=1))
    print("all flags true:", all_flags_true(rep))
    print("wrote", paths["csv"], paths["json"])


if __name__ == "__main__":
    main()
