"""Grid-refinement trends of the discrete constants and of the unstable blow-up time.

The continuous problem has no closed-form constants for the Grushin fields, so
the useful output is the trend: lambda1, C_*, d and T_h should settle as the
grid is refined, and the energy-residual ratio under tau-halving should stay
near 2 at every resolution.

    python scripts/refinement_study.py [--grids 8 16 32 64] [--csv out/refinement.csv]
"""

import argparse
import csv
import math
from pathlib import Path

from pseudoparabolic import config as cf
from pseudoparabolic import dynamics as dy
from pseudoparabolic import experiment as ex


def study(n: int) -> dict:
    cfg = cf.ExperimentConfig()
    cfg.problem.grid = [n, n]
    cfg.initial = cf.InitialSpec(regime="UnstableWell", target_j0=0.0)
    cfg.stepper = dy.StepperConfig(t_end=50.0)
    cfg.output.refine = True
    res = ex.simulate(cfg)
    pc, rep = res.constants, res.report
    return {"grid": n, "lambda1": pc.lambda1, "c_star": pc.c_star, "d": pc.d,
            "T_h": res.trajectory.t_blowup if res.trajectory.blew_up else math.nan,
            "t_upper": rep.theorem_constants.t_upper,
            "energy_ratio": rep.check("energy_identity").details.get("ratio"),
            "all_passed": rep.all_passed}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grids", type=int, nargs="+", default=[8, 16, 32, 64])
    ap.add_argument("--csv", default=None)
    args = ap.parse_args()
    rows = [study(n) for n in args.grids]
    keys = list(rows[0])
    print("  ".join(f"{k:>12s}" for k in keys))
    for r in rows:
        print("  ".join(f"{v:>12.6g}" if isinstance(v, float) else f"{str(v):>12s}" for v in r.values()))
    if args.csv:
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, keys)
            w.writeheader()
            w.writerows(rows)


if __name__ == "__main__":
    main()
