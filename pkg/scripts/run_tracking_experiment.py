#!/usr/bin/env python3
"""Full tracking experiment on the contact config: continuation run,
then a summary of the per-level convergence printed as a table.

Equivalent to `quenchctrl optimize` plus a readable digest; useful as a
template for custom studies.
"""

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from quenchctrl.cli import main as cli_main


def run(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None, help="key=value config file")
    ap.add_argument("--out", default="out/tracking", help="output directory")
    args = ap.parse_args(argv)

    cli_args = ["optimize", "--out", args.out]
    if args.config is not None:
        cli_args += ["--config", args.config]
    code = cli_main(cli_args)
    if code != 0:
        return code

    report = json.loads((Path(args.out) / "limit_report.json").read_text())
    print()
    print(f"{'alpha':>9}  {'iters':>5}  {'cost':>12}  {'anchor gap':>11}  {'VI min':>10}")
    for lvl in report["levels"]:
        gap = lvl["anchor_distance"]
        print(
            f"{lvl['alpha']:9.1e}  {lvl['iterations']:5d}  {lvl['cost']:12.6e}  "
            f"{'-' if gap is None else f'{gap:11.3e}'}  {lvl['vi_min']:10.2e}"
        )
    final = report["final"]
    print()
    print(f"obstacle-limit state distance : {final['state_distance']:.3e}")
    print(f"final VI minimum              : {final['vi_min']:.3e}")
    print(f"projection residual           : {final['projection_residual']:.3e}")
    print(f"concentration slope           : {final['concentration_slope']:.4f}")
    print(f"all levels converged          : {final['all_converged']}")
    return 0


if __name__ == "__main__":
    sys.exit(run())
