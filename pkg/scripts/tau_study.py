"""First-order convergence of the IMEX scheme on a fixed-step StableWell run.

Prints the max energy residual and the max mismatch between dh/dt and -2I for
a sequence of halved steps together with successive ratios (about 2 expected).

    python scripts/tau_study.py [--grid 32] [--tau 0.04] [--levels 4]
"""

import argparse

import numpy as np

from pseudoparabolic import config as cf
from pseudoparabolic import constants as cs
from pseudoparabolic import dynamics as dy
from pseudoparabolic import experiment as ex
from pseudoparabolic import operators as op


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=32)
    ap.add_argument("--tau", type=float, default=0.04)
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--t-end", type=float, default=4.0)
    args = ap.parse_args()
    cfg = cf.ExperimentConfig()
    cfg.problem.grid = [args.grid, args.grid]
    prob = ex.build_problem(cfg)
    pc = ex.problem_constants(prob, cfg)
    u0 = cs.synthesize_initial(prob, pc, op.sine_product(prob.grid), "StableWell", pc.d / 4)
    prev = None
    print(f"{'tau':>10s} {'residual':>12s} {'ratio':>7s} {'dh mismatch':>12s} {'ratio':>7s}")
    for k in range(args.levels):
        tau = args.tau / 2 ** k
        tr = dy.run(prob, u0, dy.StepperConfig(tau0=tau, tau_max=tau, t_end=args.t_end))
        ds = dy.derived_series(tr, pc.d)
        res = float(np.max(np.abs(tr["energy_residual"])))
        mis = float(np.max(np.abs(ds["dh_dt"] - ds["minus_2I"])[1:-1]))
        r1 = f"{prev[0] / res:7.3f}" if prev else " " * 7
        r2 = f"{prev[1] / mis:7.3f}" if prev else " " * 7
        print(f"{tau:10.4g} {res:12.4e} {r1} {mis:12.4e} {r2}")
        prev = (res, mis)


if __name__ == "__main__":
    main()
