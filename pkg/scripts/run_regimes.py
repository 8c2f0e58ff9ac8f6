"""Run the three bundled Grushin regimes and print a one-line summary each.

    python scripts/run_regimes.py [--out out/regimes]
"""

import argparse
from pathlib import Path

from pseudoparabolic import config as cf
from pseudoparabolic import experiment as ex

CONFIGS = ("grushin_stable.toml", "grushin_unstable.toml", "grushin_negative.toml")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/regimes")
    ap.add_argument("--configs", default=str(Path(__file__).resolve().parent.parent / "configs"))
    args = ap.parse_args()
    for name in CONFIGS:
        cfg = cf.load(Path(args.configs) / name)
        out = Path(args.out) / Path(name).stem
        cfg.output.dir = str(out)
        res = ex.simulate(cfg)
        ex.write_result(res, out, cfg.output.plots, cfg)
        row = ex.summary_row({}, res)
        checks = " ".join(f"{k[6:]}={v}" for k, v in row.items() if k.startswith("check_") and v != "n/a")
        end = "T_h" if res.trajectory.blew_up else "J(t_end)"
        print(f"{name:24s} {row['regime']:15s} {row['status']:28s} {end}={row['T_h_or_final_J']:.5g}  {checks}")


if __name__ == "__main__":
    main()
