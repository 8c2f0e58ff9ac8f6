import copy
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hs

from pseudoparabolic import constants as cs
from pseudoparabolic import dynamics as dy
from pseudoparabolic import io
from pseudoparabolic import operators as op
from pseudoparabolic import stationary as st
from pseudoparabolic import verify as vf

PC = cs.ProblemConstants(lambda1=2.6, c_star=0.9, c_embed=0.9, p=3.0)


def _synthetic(kind: str, n: int = 40, threshold: float = 1e3) -> dy.Trajectory:
    t = np.linspace(0.0, 0.5, n)
    h = 1.0 / (0.6 - t)
    cols = {"t": t, "tau": np.full(n, 0.01), "J": np.linspace(0.05, 0.0, n), "I": np.full(n, 0.1),
            "h_norm_sq": h, "l2_sq": 0.3 * h, "lp1": h ** 0.25, "energy_residual": np.zeros(n),
            "cg_iters": np.full(n, 3)}
    status = dy.Status(kind, 0.5) if kind != "Completed" else dy.Status("Completed")
    return dy.Trajectory(cols, [(0.0, np.zeros(4))], status, 0.0, {"blowup_threshold": threshold})


J0 = {cs.Regime.STABLE: PC.d / 4, cs.Regime.UNSTABLE: PC.d / 4, cs.Regime.NEGATIVE: -1.0,
      cs.Regime.CRITICAL: PC.d}

EXPECTED = {
    "decay": lambda r, k: r is cs.Regime.STABLE,
    "blowup_upper": lambda r, k: r in vf.BLOWUP_REGIMES and k == "BlewUp",
    "growth_lower": lambda r, k: r in vf.BLOWUP_REGIMES,
    "rate_lower": lambda r, k: k == "BlewUp",
    "lemma_floor": lambda r, k: r is cs.Regime.UNSTABLE,
}


@settings(max_examples=40, deadline=None)
@given(hs.sampled_from(list(cs.Regime)), hs.sampled_from(["Completed", "BlewUp", "Stalled"]))
def test_gating_is_total(regime, kind):
    traj = _synthetic(kind)
    tc = cs.theorem_constants(PC, J0[regime], 1.0)
    wc = cs.WellClassification(J0[regime], 0.1, regime)
    runs = {
        "decay": lambda: vf._guard("decay", vf.check_decay, traj, tc, wc),
        "blowup_upper": lambda: vf._guard("blowup_upper", vf.check_blowup_upper, traj, tc, wc),
        "growth_lower": lambda: vf._guard("growth_lower", vf.check_growth_lower, traj, tc, wc),
        "rate_lower": lambda: vf._guard("rate_lower", vf.check_rate_lower, traj, tc),
        "lemma_floor": lambda: vf._guard("lemma_floor", vf.check_lemma_floor, traj, tc, wc),
    }
    for name, fn in runs.items():
        res = fn()
        assert isinstance(res, vf.CheckResult) and res.name == name
        assert res.applicable == EXPECTED[name](regime, kind), (name, regime, kind)
        if not res.applicable:
            assert "reason" in res.details and not res.passed


def test_empty_rate_window_is_not_applicable():
    traj = _synthetic("BlewUp", threshold=10.0)
    tc = cs.theorem_constants(PC, -1.0, 1.0)
    wc = cs.WellClassification(-1.0, -0.1, cs.Regime.NEGATIVE)
    for res in (vf.check_rate_lower(traj, tc), vf.check_blowup_upper(traj, tc, wc)):
        assert not res.applicable and "threshold" in res.details["reason"]
    tc = cs.theorem_constants(PC, 0.0, 1.0)
    wc = cs.WellClassification(0.0, -0.1, cs.Regime.UNSTABLE)
    res = vf.check_blowup_upper(traj, tc, wc)
    assert res.applicable and res.details["rate_margin"] is None


def test_stationary_check_needs_completed(grushin8):
    sols = [st.zero_solution(grushin8)]
    res = vf._guard("stationary_convergence", vf.check_stationary_convergence, grushin8, _synthetic("BlewUp"), sols)
    assert not res.applicable


@settings(max_examples=50, deadline=None)
@given(hs.floats(min_value=0.01, max_value=0.99), hs.floats(min_value=1e-3, max_value=1e3))
def test_envelopes_at_time_zero(frac, h0):
    tc = cs.theorem_constants(PC, frac * PC.d, h0)
    # decay envelope starts at h0 + J0 >= J0; growth envelope starts exactly at h0
    assert (tc.h0 + tc.j0) * np.exp(-tc.c_tilde * 0) >= tc.j0
    assert tc.h0 * np.exp(tc.c3 * 0.0) == h0
    assert tc.c_tilde > 0 and tc.c3 > 0
    assert tc.t_upper > 0 and np.isfinite(tc.t_upper)


def test_evaluate_is_pure():
    traj = _synthetic("BlewUp")
    before_cols = {k: v.copy() for k, v in traj.columns.items()}
    pc = copy.deepcopy(PC)
    a = vf.evaluate(traj, pc)
    b = vf.evaluate(traj, pc)
    assert json.dumps(io._clean(a.to_json()), sort_keys=True) == json.dumps(io._clean(b.to_json()), sort_keys=True)
    assert all(np.array_equal(before_cols[k], traj.columns[k]) for k in before_cols)
    assert pc == PC


def test_energy_identity_detects_nonzero_start():
    traj = _synthetic("Completed")
    traj.columns["energy_residual"] = traj.columns["energy_residual"].copy()
    traj.columns["energy_residual"][0] = 1e-3
    res = vf.check_energy_identity(traj)
    assert not res.passed and res.margin == -np.inf


def test_zero_data_report(grushin8):
    tr = dy.run(grushin8, np.zeros(grushin8.n), dy.StepperConfig(t_end=1.0))
    pc = cs.compute_problem_constants(grushin8, probes=5)
    rep = vf.evaluate(tr, pc, grushin8, [st.zero_solution(grushin8)])
    assert rep.classification.regime is cs.Regime.CRITICAL
    eid = rep.check("energy_identity")
    assert eid.passed and eid.details["max_residual"] == 0.0
    for name in ("decay", "blowup_upper", "growth_lower", "rate_lower", "lemma_floor"):
        assert not rep.check(name).applicable


def test_blowup_checks_on_completed_run_report_reason(grushin16, grushin16_constants):
    pc = grushin16_constants
    u0 = cs.synthesize_initial(grushin16, pc, op.sine_product(grushin16.grid), "StableWell", pc.d / 4)
    tr = dy.run(grushin16, u0, dy.StepperConfig(t_end=2.0))
    rep = vf.evaluate(tr, pc)
    assert "RegimeMismatch" in rep.check("blowup_upper").details["reason"]
    assert "DidNotBlowUp" in rep.check("rate_lower").details["reason"]
    assert "RegimeMismatch" in rep.check("lemma_floor").details["reason"]


@pytest.mark.parametrize("regime,shape,target,t_end", [
    ("StableWell", "sine_product", 0.25, 16.0),
    ("UnstableWell", "sine_product", 0.0, 40.0),
    ("NegativeEnergy", "gaussian_bump", None, 5.0),
])
def test_end_to_end_regimes(grushin16, regime, shape, target, t_end):
    pc = cs.compute_problem_constants(grushin16, probes=20)
    base = op.BASE_SHAPES[shape](grushin16.grid)
    j0 = None if target is None else target * pc.d
    u0 = cs.synthesize_initial(grushin16, pc, base, regime, j0)
    cfg = dy.StepperConfig(t_end=t_end, tau0=0.01, tau_max=0.01, snapshot_times=(t_end / 8, t_end / 4, t_end / 2))
    tr = dy.run(grushin16, u0, cfg, pc)
    fine = dy.run(grushin16, u0, cfg.halved(), pc)
    sols = None
    if tr.status.kind == "Completed":
        sols = st.stationary_set(grushin16, st.solve_ground_state(grushin16, pc))
    rep = vf.evaluate(tr, pc, grushin16, sols, fine)
    assert rep.classification.regime.value == regime
    assert rep.all_passed, [c.to_json() for c in rep.checks if c.applicable and not c.passed]
    applicable = {c.name for c in rep.checks if c.applicable}
    expected = {"StableWell": {"energy_identity", "decay", "stationary_convergence"},
                "UnstableWell": {"energy_identity", "blowup_upper", "growth_lower", "rate_lower", "lemma_floor"},
                "NegativeEnergy": {"energy_identity", "blowup_upper", "growth_lower", "rate_lower"}}[regime]
    assert applicable == expected
