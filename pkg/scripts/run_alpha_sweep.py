#!/usr/bin/env python3
"""Quench-parameter sweep with a convergence digest.

Runs forward solves along the alpha ladder and prints the distance of
each quench state to the obstacle solution, its empirical decay order
between consecutive levels, and the reaction norm spread.
"""

import argparse
import csv
import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from quenchctrl.cli import main as cli_main


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None, help="key=value config file")
    ap.add_argument("--alphas", default=None, help="comma-separated quench parameters")
    ap.add_argument("--out", default="out/sweep", help="output directory")
    args = ap.parse_args(argv)

    cli_args = ["sweep-alpha", "--out", args.out]
    if args.config is not None:
        cli_args += ["--config", args.config]
    if args.alphas is not None:
        cli_args += ["--alphas", args.alphas]
    code = cli_main(cli_args)
    if code != 0:
        return code

    with open(Path(args.out) / "sweep.csv", newline="") as fh:
        rows = [r for r in csv.DictReader(fh)]
    quench = [r for r in rows if float(r["alpha"]) > 0.0]
    print()
    print(f"{'alpha':>9}  {'rho distance':>12}  {'order':>6}  {'xi L6':>9}")
    prev = None
    xi_norms = []
    for r in quench:
        a = float(r["alpha"])
        d = float(r["rho_distance"])
        xi_norms.append(float(r["xi_l6"]))
        order = ""
        if prev is not None and d > 0.0:
            pa, pd = prev
            order = f"{math.log(pd / d) / math.log(pa / a):6.3f}"
        print(f"{a:9.1e}  {d:12.4e}  {order:>6}  {float(r['xi_l6']):9.4f}")
        prev = (a, d)
    if xi_norms:
        print(f"\nreaction norm spread factor: {max(xi_norms) / min(xi_norms):.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
