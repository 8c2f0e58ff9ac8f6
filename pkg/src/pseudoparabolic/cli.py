"""Command line: ``pseudoparabolic <subcommand> [options]``.

Exit codes: 0 success (for ``verify``/``simulate``: every applicable check
passed), 1 an applicable check failed, 2 Hörmander condition fails, 3 invalid
configuration or input, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from collections import Counter
from pathlib import Path

from . import config as cf
from . import constants as cs
from . import experiment as ex
from . import fields as fl
from . import io
from . import operators as op
from . import plots
from . import stationary as st
from . import verify as vf
from .errors import ArtifactError, ConfigError, ExponentOutOfRange, NotHormander, RIsTooSmall

log = logging.getLogger("pseudoparabolic")

EXIT_OK, EXIT_CHECKS, EXIT_HORMANDER, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3, 4


def _emit(data, fmt: str, stream=None) -> None:
    stream = stream or sys.stdout
    if fmt == "csv":
        flat = data if isinstance(data, dict) else {"value": data}
        w = csv.writer(stream)
        w.writerow(["key", "value"])
        for k, v in flat.items():
            w.writerow([k, json.dumps(io._clean(v)) if isinstance(v, (dict, list)) else ex.fmt_cell(v)])
    else:
        stream.write(json.dumps(io._clean(data), indent=2, sort_keys=True) + "\n")


def _config(args) -> cf.ExperimentConfig:
    cfg = cf.load(args.config) if args.config else cf.ExperimentConfig()
    if args.seed is not None:
        cfg.output.seed = args.seed
    if args.threads is not None:
        cfg.output.threads = args.threads
    if args.format is not None:
        cfg.output.format = args.format
    if args.out is not None:
        cfg.output.dir = args.out
    return cfg.validate()


def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from exc


# -- subcommands ------------------------------------------------------------------

def cmd_indices(args) -> int:
    cfg = _config(args)
    family = args.field or cfg.problem.field_family
    dim = args.dim if args.dim is not None else cfg.problem.dim
    system = fl.load_field_system(family, dim)
    if args.domain:
        domain = _floats(args.domain)
    elif args.field or args.dim:
        domain = [-1.0, 1.0] * system.dim
    else:
        domain = list(cfg.problem.domain)
    if len(domain) != 2 * system.dim:
        raise ConfigError(f"--domain needs {2 * system.dim} numbers for a {system.dim}-dimensional system")
    per_axis = args.samples
    grid = op.Grid.box(domain, [per_axis] * system.dim)
    rep = fl.compute_indices(system, fl.index_samples(system, grid.closed_axes()), max_len=args.max_len)
    try:
        p_range = list(fl.admissible_p_range(rep.metivier_index))
    except RIsTooSmall:
        p_range = None
    out = {"field_family": system.name, "dim": system.dim, "domain": domain, "Z": rep.hormander_index,
           "r": rep.metivier_index, "p_range": p_range, "satisfied": rep.satisfied,
           "max_bracket_length_searched": rep.max_bracket_length_searched,
           "v_histogram": {str(v): n for v, n in sorted(Counter(rep.pointwise_v.values()).items())},
           "samples": len(rep.pointwise_v)}
    _emit(out, cfg.output.format)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        io.write_json(Path(args.out) / "indices.json", out)
    return EXIT_OK


def cmd_constants(args) -> int:
    cfg = _config(args)
    prob = ex.build_problem(cfg)
    pc = ex.problem_constants(prob, cfg)
    data = pc.to_json()
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "constants.json", data)
    _emit(data, cfg.output.format)
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = _config(args)
    prob = ex.build_problem(cfg)
    pc = ex.problem_constants(prob, cfg)
    u0 = ex.initial_state(prob, pc, cfg)
    wc = cs.classify(prob, pc, u0)
    if wc.regime is cs.Regime.CRITICAL:
        log.warning("initial data is Critical/Unknown (on the Nehari manifold, zero, or at J0 = d)")
    data = wc.to_json()
    data["d"] = pc.d
    _emit(data, cfg.output.format)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    if args.refine:
        cfg.output.refine = True
    res = ex.simulate(cfg)
    ex.write_result(res, cfg.output.dir, cfg.output.plots, cfg)
    summary = ex.summary_row({}, res)
    _emit(summary, cfg.output.format)
    return EXIT_OK if res.report.all_passed else EXIT_CHECKS


def cmd_stationary(args) -> int:
    cfg = _config(args)
    prob = ex.build_problem(cfg)
    pc = ex.problem_constants(prob, cfg)
    gs = st.solve_ground_state(prob, pc)
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "ground_state.json", {"0.0": gs.state})
    data = gs.to_json()
    data["d"] = pc.d
    data["nehari_residual"] = op.functional_I(prob, gs.state)
    io.write_json(out / "stationary.json", data)
    _emit(data, cfg.output.format)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.config is None and args.run_dir and (Path(args.run_dir) / "config.toml").exists():
        args.config = str(Path(args.run_dir) / "config.toml")
    cfg = _config(args)
    run_dir = Path(args.run_dir or cfg.output.dir)
    trace = Path(args.trace) if args.trace else run_dir / "trace.csv"
    consts = Path(args.constants) if args.constants else run_dir / "constants.json"
    if not trace.exists() or not consts.exists():
        raise ConfigError(f"need a trace CSV and constants JSON (looked for {trace} and {consts})")
    base = trace.parent
    stem = trace.stem
    run_json = base / ("run.json" if stem == "trace" else f"run_{stem.removeprefix('trace_')}.json")
    snaps = base / "snapshots.json" if stem == "trace" else None
    traj = io.load_trajectory(trace, run_json, snaps, threshold=cfg.stepper.blowup_threshold,
                              t_end=cfg.stepper.t_end)
    refined = None
    ref_path = Path(args.refined) if args.refined else base / "trace_refined.csv"
    if ref_path.exists():
        refined = io.load_trajectory(ref_path, base / "run_refined.json", None,
                                     threshold=cfg.stepper.blowup_threshold, t_end=cfg.stepper.t_end)
    pc = cs.ProblemConstants.from_json(io.read_json(consts))
    prob = sols = None
    if traj.status.kind == "Completed" and traj.snapshots:
        prob = ex.build_problem(cfg)
        if traj.snapshots[0][1].size != prob.n:
            raise ConfigError(f"snapshots have {traj.snapshots[0][1].size} values but the configured grid has "
                              f"{prob.n} interior nodes; pass the run's --config")
        sols, _ = ex.stationary_solutions(prob, pc)
    report = vf.evaluate(traj, pc, prob, sols, refined)
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "report.json", report.to_json())
    if cfg.output.plots:
        plots.envelope_plots(out / "plots", report)
    data = {"regime": report.classification.regime.value,
            "checks": [{k: c.to_json()[k] for k in ("name", "applicable", "passed", "margin")}
                       for c in report.checks],
            "all_applicable_passed": report.all_passed}
    _emit(data, cfg.output.format)
    return EXIT_OK if report.all_passed else EXIT_CHECKS


def cmd_sweep(args) -> int:
    if not args.config:
        raise ConfigError("sweep needs --config pointing at a sweep file")
    spec = cf.load_sweep(args.config)
    if args.seed is not None:
        spec.base.output.seed = args.seed
    out = Path(args.out or spec.base.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = args.threads or spec.base.output.threads
    rows = ex.run_sweep(spec, out, workers)
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(rows[0]))
        for r in rows:
            w.writerow([ex.fmt_cell(v) for v in r.values()])
    fmt = args.format or spec.base.output.format
    if fmt == "csv":
        sys.stdout.write((out / "summary.csv").read_text(encoding="utf-8"))
    else:
        _emit({"runs": rows}, "json")
    return EXIT_OK


COMMANDS = {"indices": cmd_indices, "constants": cmd_constants, "classify": cmd_classify,
            "simulate": cmd_simulate, "stationary": cmd_stationary, "verify": cmd_verify, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment (or sweep) TOML file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="seed for random probes")
    common.add_argument("--threads", type=int, help="parallel runs for sweeps")
    common.add_argument("--format", choices=("csv", "json"), help="stdout format")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="pseudoparabolic", parents=[common],
                                     description="Desk-scale lab for degenerate pseudo-parabolic flows.")
    # subparsers repeat the global flags; SUPPRESS keeps values given before the subcommand
    sub_common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    for action in common._actions:
        sub_common._add_action(action)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("indices", parents=[sub_common], help="Hörmander and Métivier indices")
    p.add_argument("--field", help="builtin family or field-spec file")
    p.add_argument("--dim", type=int)
    p.add_argument("--domain", help="a1,b1,a2,b2,...")
    p.add_argument("--samples", type=int, default=8, help="interior nodes per axis for sampling")
    p.add_argument("--max-len", type=int, default=fl.DEFAULT_MAX_LEN)
    sub.add_parser("constants", parents=[sub_common], help="lambda1, C_*, embedding constant, d")
    sub.add_parser("classify", parents=[sub_common], help="potential-well regime of the initial data")
    p = sub.add_parser("simulate", parents=[sub_common], help="integrate, write trace, snapshots, report")
    p.add_argument("--refine", action="store_true", help="also run with halved step caps")
    sub.add_parser("stationary", parents=[sub_common], help="ground state of the stationary problem")
    p = sub.add_parser("verify", parents=[sub_common], help="theorem checks on a recorded trace")
    p.add_argument("--trace")
    p.add_argument("--constants")
    p.add_argument("--refined", help="trace of the same run with halved step caps")
    p.add_argument("--run-dir", help="directory holding trace.csv and constants.json")
    sub.add_parser("sweep", parents=[sub_common], help="cartesian parameter sweep")
    return parser


def _rewrite_negative_values(argv: list) -> list:
    # "--domain -1,1,-1,1" would otherwise parse the value as an option
    out = []
    it = iter(range(len(argv)))
    for i in it:
        tok = argv[i]
        if tok == "--domain" and i + 1 < len(argv):
            out.append(f"--domain={argv[i + 1]}")
            next(it, None)
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(_rewrite_negative_values(argv))
    for name in ("config", "out", "seed", "threads", "format"):
        if not hasattr(args, name):
            setattr(args, name, None)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except NotHormander as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HORMANDER
    except (ConfigError, ExponentOutOfRange, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArtifactError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
