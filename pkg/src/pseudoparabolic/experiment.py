"""Single-run orchestration shared by the command line and sweeps."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import config as cf
from . import constants as cs
from . import dynamics as dy
from . import fields as fl
from . import io
from . import operators as op
from . import plots
from . import stationary as st
from . import verify as vf
from .errors import ArtifactError, NotConverged

log = logging.getLogger(__name__)


def build_problem(cfg: cf.ExperimentConfig) -> op.DiscreteProblem:
    """Assemble the discrete problem; the exponent is checked against the index range here."""
    pr = cfg.problem
    system = fl.load_field_system(pr.field_family, pr.dim)
    grid = op.Grid.box(pr.domain, pr.grid)
    return op.assemble(grid, system, pr.p)


def problem_constants(prob: op.DiscreteProblem, cfg: cf.ExperimentConfig) -> cs.ProblemConstants:
    return cs.compute_problem_constants(prob, probes=cfg.constants.probes, seed=cfg.output.seed)


def initial_state(prob: op.DiscreteProblem, pc: cs.ProblemConstants, cfg: cf.ExperimentConfig) -> np.ndarray:
    ini = cfg.initial
    base = op.BASE_SHAPES[ini.base_shape](prob.grid)
    if ini.explicit_scale is not None:
        return float(ini.explicit_scale) * base
    target = ini.target_j0
    if ini.target_j0_over_d is not None:
        target = ini.target_j0_over_d * pc.d
    return cs.synthesize_initial(prob, pc, base, ini.regime, target)


def stationary_solutions(prob: op.DiscreteProblem, pc: cs.ProblemConstants):
    """``({0, +gs, -gs}, ground state)`` or ``(None, None)`` if the solver fails."""
    try:
        gs = st.solve_ground_state(prob, pc)
    except NotConverged as exc:
        log.warning("ground state not found: %s", exc)
        return None, None
    return st.stationary_set(prob, gs), gs


@dataclass
class RunResult:
    prob: op.DiscreteProblem
    constants: cs.ProblemConstants
    u0: np.ndarray
    trajectory: dy.Trajectory
    refined: dy.Trajectory | None
    report: vf.TheoremReport


def simulate(cfg: cf.ExperimentConfig, refine: bool | None = None) -> RunResult:
    prob = build_problem(cfg)
    pc = problem_constants(prob, cfg)
    u0 = initial_state(prob, pc, cfg)
    traj = dy.run(prob, u0, cfg.stepper, pc)
    refined = None
    if cfg.output.refine if refine is None else refine:
        refined = dy.run(prob, u0, cfg.stepper.halved(), pc)
    sols = None
    if traj.status.kind == "Completed":
        sols, _ = stationary_solutions(prob, pc)
    report = vf.evaluate(traj, pc, prob, sols, refined)
    return RunResult(prob, pc, u0, traj, refined, report)


def write_result(res: RunResult, out_dir, plots_on: bool = True, config: cf.ExperimentConfig | None = None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if config is not None:
        (out / "config.toml").write_text(cf.dumps(config), encoding="utf-8")  # lets verify rebuild the grid
    io.write_run(out, res.trajectory, res.refined)
    io.write_json(out / "constants.json", res.constants.to_json())
    io.write_json(out / "report.json", res.report.to_json())
    if plots_on:
        plots.envelope_plots(out / "plots", res.report)


def summary_row(assignment: dict, res: RunResult | None, error: str | None = None) -> dict:
    row = {k: v for k, v in assignment.items()}
    if res is None:
        row.update({"regime": "", "status": "Error", "T_h_or_final_J": "", "t_upper": "",
                    "max_energy_residual": "", "error": error or ""})
        return row
    tr = res.trajectory
    rep = res.report
    row["regime"] = rep.classification.regime.value
    row["status"] = str(tr.status)
    row["T_h_or_final_J"] = tr.t_blowup if tr.blew_up else float(tr["J"][-1])
    t_up = rep.theorem_constants.t_upper
    unstable = rep.classification.regime is cs.Regime.UNSTABLE
    row["t_upper"] = t_up if unstable and t_up is not None else ""
    row["c1"] = "" if rep.theorem_constants.c1 is None else rep.theorem_constants.c1
    row["d"] = res.constants.d
    row["j0"] = rep.classification.j0
    row["max_energy_residual"] = float(np.max(np.abs(tr["energy_residual"])))
    for chk in rep.checks:
        row[f"check_{chk.name}"] = ("pass" if chk.passed else "fail") if chk.applicable else "n/a"
    row["error"] = ""
    return row


def _sweep_job(args):
    k, assignment, cfg_text, out_dir = args
    cfg = cf.loads(cfg_text)
    try:
        res = simulate(cfg)
        write_result(res, Path(out_dir) / f"run_{k:03d}", cfg.output.plots, cfg)
        return k, summary_row(assignment, res)
    except (ArtifactError, ValueError, ArithmeticError) as exc:
        return k, summary_row(assignment, None, f"{type(exc).__name__}: {exc}")


def run_sweep(spec: cf.SweepSpec, out_dir, workers: int = 1) -> list:
    """Run every configuration; failures become rows rather than aborting the sweep."""
    jobs = [(k, a, cf.dumps(c), str(out_dir)) for k, (a, c) in enumerate(spec.expand())]
    workers = max(1, min(workers, spec.max_parallel, len(jobs)))
    if workers == 1:
        results = [_sweep_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_job, jobs))
    rows = [r for _, r in sorted(results, key=lambda kr: kr[0])]
    keys = []
    for r in rows:
        keys += [k for k in r if k not in keys]
    return [{k: r.get(k, "") for k in keys} for r in rows]


def fmt_cell(v) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)
