"""Decay slopes of radial derivatives of the fundamental solution and its phase-removed version."""

import argparse
import json

from biharmonic_lab.oscillatory import radial_derivative_decay


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=5)
    ap.add_argument("--xmin", type=float, default=10.0)
    ap.add_argument("--xmax", type=float, default=1000.0)
    ap.add_argument("--json", help="write the slope table here")
    args = ap.parse_args()

    rows = []
    for mode in ("raw", "frozen", "literal"):
        for beta in (0, 1, 2):
            rep = radial_derivative_decay(beta, (args.xmin, args.xmax), args.n, mode=mode)
            rows.append({"mode": mode, "beta": beta, "slope": rep.fit["slope"], "r2": rep.fit["r2"]})
            print(f"{mode:8s} beta={beta} slope={rep.fit['slope']:+.4f} R2={rep.fit['r2']:.5f}")
    print("target for the phase-removed integral: -(n + beta)/3 = "
          + ", ".join(f"{-(args.n + b) / 3:.3f}" for b in (0, 1, 2)))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
