"""Quantitative theorem envelopes evaluated on recorded trajectories.

Every check returns a :class:`CheckResult`.  ``margin`` is the smallest
normalized slack of the inequality over the tested rows (negative means the
envelope is crossed); a check passes iff ``margin >= -tolerance``.  Checks that
do not apply to the trajectory's regime come back with ``applicable=False``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import constants as cs
from . import operators as op
from . import stationary as st
from .dynamics import Trajectory
from .errors import DidNotBlowUp, RegimeMismatch

BLOWUP_REGIMES = (cs.Regime.UNSTABLE, cs.Regime.NEGATIVE)


@dataclass
class Slacks:
    decay: float = 1e-6
    blowup_time: float = 0.05
    rate_upper: float = 0.05
    growth: float = 0.05
    rate_lower: float = 0.05
    floor: float = 0.01
    energy_ratio: tuple = (1.5, 3.0)
    energy_k: float = 1.0  # single-trajectory bound: |residual| <= k * tau_max * scale
    rate_window: float = 1e-2  # rate envelopes use rows with h <= rate_window * blowup_threshold
    j_bounds: float = 1e-10
    distance_factor: float = 1e-2
    dual_factor: float = 1e-3


@dataclass
class CheckResult:
    name: str
    applicable: bool
    passed: bool
    margin: float
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"name": self.name, "applicable": self.applicable, "passed": self.passed,
                "margin": self.margin, "details": self.details}


def _not_applicable(name, exc) -> CheckResult:
    return CheckResult(name, False, False, math.nan, {"reason": f"{type(exc).__name__}: {exc}"})


def _regime(classification) -> cs.Regime:
    if isinstance(classification, cs.WellClassification):
        return classification.regime
    return cs.Regime(classification)


def _require_regime(classification, allowed, name):
    reg = _regime(classification)
    if reg not in allowed:
        raise RegimeMismatch(f"{name} needs regime in {[r.value for r in allowed]}, got {reg.value}")


def _require_blowup(traj: Trajectory):
    if not traj.blew_up:
        raise DidNotBlowUp(f"trajectory status is {traj.status}")


def _upper_margin(values, envelope):
    return float(np.min((envelope - values) / np.abs(envelope)))


def _lower_margin(values, envelope):
    return float(np.min((values - envelope) / np.abs(envelope)))


def _samples(t, values, envelope, k: int = 60) -> list:
    idx = np.unique(np.linspace(0, len(t) - 1, min(k, len(t))).astype(int))
    return [[float(t[i]), float(values[i]), float(envelope[i])] for i in idx]


# -- individual checks ------------------------------------------------------------

def _normalized_residual(traj: Trajectory) -> float:
    j = traj["J"]
    res = traj["energy_residual"]
    diss = res - j + j[0]
    return float(np.max(np.abs(res) / (1.0 + abs(j[0]) + np.abs(j) + np.abs(diss))))


def check_energy_identity(traj: Trajectory, refined: Trajectory | None = None,
                          slacks: Slacks | None = None) -> CheckResult:
    """The discrete energy identity holds up to an O(tau) residual.

    Residuals are normalized by ``1 + |J0| + |J| + dissipated`` so blow-up
    runs, where both sides of the identity diverge, stay comparable.  With
    ``refined`` (same run, all step caps halved) the max normalized residual
    must shrink by a factor inside ``slacks.energy_ratio``.  Without it, it
    must stay below ``energy_k * tau_max``.
    """
    slacks = slacks or Slacks()
    name = "energy_identity"
    res = np.abs(traj["energy_residual"])
    details = {"max_residual": float(res.max()), "residual_t0": float(res[0])}
    if res[0] != 0.0 or not np.all(np.isfinite(res)):
        return CheckResult(name, True, False, -math.inf, details)
    tau_max = float(traj["tau"].max())
    rel = _normalized_residual(traj)
    details["tau_max"] = tau_max
    details["normalized_residual"] = rel
    if refined is None:
        if tau_max == 0.0:
            return CheckResult(name, True, True, 0.0, details)
        bound = slacks.energy_k * tau_max
        margin = (bound - rel) / bound
        return CheckResult(name, True, margin >= 0.0, margin, details)
    fine = _normalized_residual(refined)
    details["refined_normalized_residual"] = fine
    if rel <= 1e-300 and fine <= 1e-300:
        details["ratio"] = None
        return CheckResult(name, True, True, 0.0, details)
    ratio = rel / fine if fine > 0 else math.inf
    lo, hi = slacks.energy_ratio
    details["ratio"] = ratio
    details["K"] = rel / tau_max if tau_max else None
    margin = min(ratio - lo, hi - ratio)
    return CheckResult(name, True, margin >= 0.0, margin, details)


def check_decay(traj: Trajectory, tc: cs.TheoremConstants, classification, slacks: Slacks | None = None) -> CheckResult:
    """``J(t) <= (||u0||_H^2 + J0) exp(-C~ t)`` and ``I(t) >= 0`` on every row."""
    slacks = slacks or Slacks()
    _require_regime(classification, (cs.Regime.STABLE,), "decay")
    c_tilde = tc.require("c_tilde")
    t, j, i = traj["t"], traj["J"], traj["I"]
    env = (tc.h0 + tc.j0) * np.exp(-c_tilde * t)
    margin = _upper_margin(j, env)
    scale = np.maximum(traj["h_norm_sq"], 1e-300)
    i_margin = float(np.min(i / scale))
    in_well = i_margin >= -1e-12
    details = {"c_tilde": c_tilde, "epsilon": tc.epsilon, "min_I_over_h": i_margin,
               "samples": _samples(t, j, env)}
    tail = slice(len(t) // 2, None)
    tt, jj = t[tail], j[tail]
    pos = jj > 0
    if pos.sum() >= 2 and np.ptp(tt[pos]) > 0:
        slope = float(np.polyfit(tt[pos], np.log(jj[pos]), 1)[0])
        details["fitted_rate"] = -slope
        details["fitted_rate_at_least_c_tilde"] = -slope >= c_tilde
    else:
        details["fitted_rate"] = None
    passed = margin >= -slacks.decay and in_well
    return CheckResult("decay", True, passed, margin if in_well else min(margin, i_margin), details)


def _pre_threshold(traj: Trajectory, fraction: float):
    """Rows with ``t < T_h`` and ``h <= fraction * threshold``.

    Near the threshold ``T - t ~ K / h`` is comparable to the step, so ``T_h``
    is a poor proxy for ``T`` there; below ``fraction * threshold`` swapping
    them moves the envelopes by a relative amount of order ``fraction``.
    """
    t, h = traj["t"], traj["h_norm_sq"]
    threshold = traj.meta.get("blowup_threshold", float(h.max()))
    keep = (t < traj.t_blowup) & (h <= fraction * threshold)
    return t[keep], h[keep], t[t < traj.t_blowup], h[t < traj.t_blowup]


def _empty_window(name, slacks) -> CheckResult:
    return CheckResult(name, False, False, math.nan,
                       {"reason": f"no rows with h <= {slacks.rate_window:g} * blowup_threshold; "
                                  "raise the threshold to test the rate envelope"})


def check_blowup_upper(traj: Trajectory, tc: cs.TheoremConstants, classification,
                       slacks: Slacks | None = None) -> CheckResult:
    """Blow-up time bound (upper-well data only) and the upper rate envelope.

    The rate envelope is evaluated with ``T_h`` in place of the unknown
    ``T >= T_h``: since the exponent is negative this is implied by the
    bound with the true ``T``.
    """
    slacks = slacks or Slacks()
    _require_regime(classification, BLOWUP_REGIMES, "blowup_upper")
    _require_blowup(traj)
    coef = tc.require("rate_upper_coef")
    expo = tc.require("rate_upper_exp")
    t_h = traj.t_blowup
    details = {"T_h": t_h, "c1": tc.c1, "rate_coef": coef, "rate_exp": expo}
    margins = []
    passed = True
    if _regime(classification) is cs.Regime.UNSTABLE:
        t_up = tc.require("t_upper")
        time_margin = (t_up - t_h) / t_up
        details["t_upper"] = t_up
        details["time_margin"] = time_margin
        margins.append(time_margin)
        passed &= time_margin >= -slacks.blowup_time
    t, h, t_all, h_all = _pre_threshold(traj, slacks.rate_window)
    details["window_rows"] = int(t.size)
    if t.size:
        env = coef * (t_h - t) ** expo
        rate_margin = _upper_margin(h, env)
        details["rate_margin"] = rate_margin
        details["rate_margin_all_rows"] = _upper_margin(h_all, coef * (t_h - t_all) ** expo)
        details["samples"] = _samples(t, h, env)
        margins.append(rate_margin)
        passed &= rate_margin >= -slacks.rate_upper
    elif not margins:
        return _empty_window("blowup_upper", slacks)
    else:
        details["rate_margin"] = None
    return CheckResult("blowup_upper", True, bool(passed), min(margins), details)


def check_growth_lower(traj: Trajectory, tc: cs.TheoremConstants, classification,
                       slacks: Slacks | None = None) -> CheckResult:
    """``||u||_H^2 >= ||u0||_H^2 exp(C t)`` with ``C = C2`` (J0 < 0) or ``C3`` (0 <= J0 < d)."""
    slacks = slacks or Slacks()
    _require_regime(classification, BLOWUP_REGIMES, "growth_lower")
    rate = tc.require("c2") if tc.j0 < 0 else tc.require("c3")
    t, h = traj["t"], traj["h_norm_sq"]
    env = tc.h0 * np.exp(rate * t)
    margin = _lower_margin(h, env)
    return CheckResult("growth_lower", True, margin >= -slacks.growth, margin,
                       {"rate": rate, "samples": _samples(t, h, env)})


def check_rate_lower(traj: Trajectory, tc: cs.TheoremConstants, slacks: Slacks | None = None) -> CheckResult:
    """``||u||_H^2 >= coef (T_h - t)^(-2/(p-1))`` for ``t < T_h``.

    ``T_h <= T`` makes this stricter than the bound with the true ``T``.
    """
    slacks = slacks or Slacks()
    _require_blowup(traj)
    t_h = traj.t_blowup
    t, h, t_all, h_all = _pre_threshold(traj, slacks.rate_window)
    if not t.size:
        return _empty_window("rate_lower", slacks)
    env = tc.rate_lower_coef * (t_h - t) ** tc.rate_lower_exp
    margin = _lower_margin(h, env)
    full = _lower_margin(h_all, tc.rate_lower_coef * (t_h - t_all) ** tc.rate_lower_exp)
    return CheckResult("rate_lower", True, margin >= -slacks.rate_lower, margin,
                       {"T_h": t_h, "coef": tc.rate_lower_coef, "exp": tc.rate_lower_exp, "window_rows": int(t.size),
                        "margin_all_rows": full, "samples": _samples(t, h, env)})


def check_lemma_floor(traj: Trajectory, tc: cs.TheoremConstants, classification,
                      slacks: Slacks | None = None) -> CheckResult:
    """``||u(t)||_{p+1} >= eps2`` on every row of upper-well data."""
    slacks = slacks or Slacks()
    _require_regime(classification, (cs.Regime.UNSTABLE,), "lemma_floor")
    eps2 = tc.require("eps2")
    lp1 = traj["lp1"]
    margin = float((lp1.min() - eps2) / eps2)
    return CheckResult("lemma_floor", True, margin >= -slacks.floor, margin,
                       {"eps2": eps2, "eps1": tc.eps1, "eps0": tc.eps0, "min_lp1": float(lp1.min()),
                        "initial_lp1": float(lp1[0])})


def _snapshot_at(traj: Trajectory, target: float):
    times = np.array([s[0] for s in traj.snapshots])
    k = int(np.argmin(np.abs(times - target)))
    return traj.snapshots[k]


def check_stationary_convergence(prob: op.DiscreteProblem, traj: Trajectory, solutions: list,
                                 slacks: Slacks | None = None) -> CheckResult:
    """``0 <= J <= J0``, shrinking distance to the stationary set, vanishing ``J'``."""
    slacks = slacks or Slacks()
    if traj.status.kind != "Completed":
        raise RegimeMismatch(f"stationary convergence needs a global trajectory (status {traj.status})")
    j = traj["J"]
    j0 = float(j[0])
    tol = slacks.j_bounds * (1.0 + abs(j0))
    j_lo = float(j.min())
    j_hi = float(j.max() - j0)
    ok_j = j_lo >= -tol and j_hi <= tol
    t_end = float(traj["t"][-1])
    _, u_init = traj.snapshots[0]
    d_init, _ = st.distance_to_Psi(prob, u_init, solutions)
    running = math.inf
    match = None
    visited = []
    for k in range(4):
        ts, u = _snapshot_at(traj, t_end / 8 * 2 ** k)
        dist, label = st.distance_to_Psi(prob, u, solutions)
        visited.append([ts, dist, label])
        if dist < running:
            running, match = dist, label
    ok_dist = running <= slacks.distance_factor * d_init if d_init > 0 else running == 0.0
    dual0 = st.dual_norm_Jprime(prob, u_init)
    dual_end = st.dual_norm_Jprime(prob, traj.snapshots[-1][1])
    ok_dual = dual_end <= slacks.dual_factor * dual0 if dual0 > 0 else dual_end == 0.0
    parts = []
    if d_init > 0:
        parts.append(1.0 - running / (slacks.distance_factor * d_init))
    if dual0 > 0:
        parts.append(1.0 - dual_end / (slacks.dual_factor * dual0))
    margin = min(parts) if parts else 0.0
    if not ok_j:
        margin = min(margin, -max(-j_lo, j_hi) / max(abs(j0), 1e-300))
    details = {"j_min": j_lo, "j_max_minus_j0": j_hi, "initial_distance": d_init, "min_distance": running,
               "match": match, "visited": visited, "initial_dual_norm": dual0, "final_dual_norm": dual_end}
    return CheckResult("stationary_convergence", True, bool(ok_j and ok_dist and ok_dual), margin, details)


# -- full report ----------------------------------------------------------------

@dataclass
class TheoremReport:
    classification: cs.WellClassification
    theorem_constants: cs.TheoremConstants
    problem_constants: cs.ProblemConstants
    checks: list

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks if c.applicable)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return {
            "regime": self.classification.regime.value,
            "classification": self.classification.to_json(),
            "constants": {"problem": self.problem_constants.to_json(), "theorem": self.theorem_constants.to_json()},
            "checks": [c.to_json() for c in self.checks],
            "all_applicable_passed": self.all_passed,
        }


def _guard(name, fn, *args, **kw) -> CheckResult:
    try:
        return fn(*args, **kw)
    except (RegimeMismatch, DidNotBlowUp) as exc:
        return _not_applicable(name, exc)


def evaluate(traj: Trajectory, pc: cs.ProblemConstants, prob: op.DiscreteProblem | None = None,
             solutions: list | None = None, refined: Trajectory | None = None,
             slacks: Slacks | None = None) -> TheoremReport:
    """Run every check; the regime is read off the first row with the current constants."""
    slacks = slacks or Slacks()
    j0 = float(traj["J"][0])
    i0 = float(traj["I"][0])
    h0 = float(traj["h_norm_sq"][0])
    scale = max(h0 - float(traj["l2_sq"][0]), float(traj["lp1"][0]) ** (pc.p + 1))
    wc = cs.classify_values(j0, i0, pc.d, scale)
    tc = cs.theorem_constants(pc, j0, h0)
    checks = [
        check_energy_identity(traj, refined, slacks),
        _guard("decay", check_decay, traj, tc, wc, slacks),
        _guard("blowup_upper", check_blowup_upper, traj, tc, wc, slacks),
        _guard("growth_lower", check_growth_lower, traj, tc, wc, slacks),
        _guard("rate_lower", check_rate_lower, traj, tc, slacks),
        _guard("lemma_floor", check_lemma_floor, traj, tc, wc, slacks),
    ]
    if prob is not None and solutions is not None:
        checks.append(_guard("stationary_convergence", check_stationary_convergence, prob, traj, solutions, slacks))
    else:
        checks.append(CheckResult("stationary_convergence", False, False, math.nan,
                                  {"reason": "no stationary solutions supplied"}))
    return TheoremReport(wc, tc, pc, checks)


def slacks_to_json(s: Slacks) -> dict:
    return asdict(s)
