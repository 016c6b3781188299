"""Static-state convergence rates and the no-vacuum witness for every regime."""
import argparse
import json

from nsflab.equilibrium import positivity_study, static_rate_study
from nsflab.thermo import ThermoModel

REGIMES = [(2.0, True), (1.5, True), (1.0, True), (1.0, False), (2.0, False)]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.2, 0.1, 0.05, 0.025])
    ap.add_argument("--radius", type=float, default=1.0)
    ap.add_argument("--json", help="write the study to this file")
    args = ap.parse_args()
    model = ThermoModel()
    studies = static_rate_study(model, REGIMES, args.eps, radius=args.radius)
    rows, eps0 = positivity_study(model, REGIMES, args.eps)
    print(f"{'m':>4} {'F':>4} {'slope':>8} {'expected':>8} {'rho_min':>8}")
    for s in studies:
        print(f"{s.m:4g} {'on' if s.centrifugal_on else 'off':>4} {s.fit.slope:8.4f} "
              f"{s.expected:8g} {s.rho_min:8.4f}")
    print(f"rho_star = {min(r['rho_min'] for r in rows):.4f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"rates": [s.to_dict() for s in studies], "positivity": rows}, fh, indent=1)


if __name__ == "__main__":
    main()
