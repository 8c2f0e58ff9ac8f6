"""IMEX time integration of ``(I + A) u' = -A u + g(u)`` with blow-up detection.

One step solves ``(I + (1 + tau) A) u+ = (I + A) u + tau g(u)`` by conjugate
gradients.  Taking the inner product with ``u+ - u`` shows the step dissipates
``J`` for every ``tau`` (``A`` is PSD and ``|u|^{p+1}`` is convex), and the
energy-identity defect per step is ``-(w/2)(d^T A d + sum g'(xi) d^2) = O(tau^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import operators as op
from .errors import CGDiverged, TooShort
from .linalg import cg

COLUMNS = ("t", "tau", "J", "I", "h_norm_sq", "l2_sq", "lp1", "energy_residual", "cg_iters")


@dataclass
class StepperConfig:
    tau0: float = 0.01
    tau_min: float = 1e-12
    tau_max: float = 0.05
    t_end: float = 10.0
    blowup_threshold: float = 1e8
    cg_rel_tol: float = 1e-11
    energy_slack: float = 1e-10
    snapshot_stride: int = 50
    snapshot_times: tuple = ()
    guard_factor: float = 1.0  # stiffness guard: tau <= guard_factor / (1 + max|u|^(p-1))
    grow_after: int = 5
    grow_factor: float = 1.2
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not 0 < self.tau_min <= self.tau0 <= self.tau_max:
            raise ValueError("need 0 < tau_min <= tau0 <= tau_max")
        if not self.blowup_threshold > 0:
            raise ValueError("blowup_threshold must be positive")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")
        self.snapshot_times = tuple(sorted(float(t) for t in self.snapshot_times))

    def halved(self) -> "StepperConfig":
        """Same run with every step-size cap halved (for refinement studies)."""
        kw = dict(self.__dict__)
        for k in ("tau0", "tau_min", "tau_max", "guard_factor"):
            kw[k] = kw[k] / 2
        return StepperConfig(**kw)


@dataclass(frozen=True)
class Status:
    kind: str  # Completed | BlewUp | Stalled
    time: float | None = None

    def __str__(self):
        return self.kind if self.time is None else f"{self.kind}({self.time:.17g})"

    @classmethod
    def parse(cls, text: str) -> "Status":
        if "(" in text:
            kind, rest = text.split("(", 1)
            return cls(kind, float(rest.rstrip(")")))
        return cls(text)


@dataclass
class Trajectory:
    columns: dict
    snapshots: list  # (t, state)
    status: Status
    dissipated: float
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.columns["t"])

    def __getitem__(self, name) -> np.ndarray:
        return self.columns[name]

    @property
    def blew_up(self) -> bool:
        return self.status.kind == "BlewUp"

    @property
    def t_blowup(self) -> float | None:
        return self.status.time if self.blew_up else None


def step(prob: op.DiscreteProblem, u: np.ndarray, tau: float, cg_rel_tol: float = 1e-11,
         source: bool = True) -> tuple[np.ndarray, int]:
    """One IMEX step; ``source=False`` drops the nonlinearity (linear test mode)."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    a = prob.stiffness
    au = a @ u
    rhs = u + au
    if source:
        rhs = rhs + tau * op.nonlinearity(prob, u)
    c = 1.0 + tau

    def matvec(v):
        return v + c * (a @ v)

    return cg(matvec, rhs, x0=u, rtol=cg_rel_tol)


def _row_values(prob, u):
    nm = op.norms(prob, u)
    j = 0.5 * nm.x_sq - nm.lp1_pow / (prob.p + 1)
    i = nm.x_sq - nm.lp1_pow
    return nm, j, i


def run(prob: op.DiscreteProblem, u0: np.ndarray, cfg: StepperConfig | None = None, constants=None,
        source: bool = True) -> Trajectory:
    """Integrate from ``u0`` until ``t_end``, blow-up, or stall.

    If ``constants`` (a :class:`~pseudoparabolic.constants.ProblemConstants`)
    is given, every accepted state's quotient ``||u||_{p+1}/||Xu||`` feeds its
    running maximum ``c_star``.
    """
    cfg = cfg or StepperConfig()
    u = np.array(u0, dtype=float)
    if not np.all(np.isfinite(u)):
        raise ValueError("initial data must be finite")
    w = prob.weight
    a = prob.stiffness
    cols = {c: [] for c in COLUMNS}
    nm, j, i = _row_values(prob, u)
    j0 = j

    def record(t, tau, nm, j, i, resid, iters):
        for name, val in zip(COLUMNS, (t, tau, j, i, nm.h_sq, nm.l2_sq, nm.lp1, resid, iters)):
            cols[name].append(val)
        if constants is not None and nm.x_sq > 0:
            constants.observe_quotient(nm.lp1 / math.sqrt(nm.x_sq), "trajectory")

    record(0.0, 0.0, nm, j, i, 0.0, 0)
    snapshots = [(0.0, u.copy())]
    pending = list(cfg.snapshot_times)
    while pending and pending[0] <= 0.0:
        pending.pop(0)
    t = 0.0
    tau = cfg.tau0
    streak = 0
    dissipated = 0.0
    status = Status("Completed")
    steps = 0
    end_tol = 1e-12 * max(1.0, cfg.t_end)
    last_snap = 0
    while t < cfg.t_end - end_tol:
        if steps >= cfg.max_steps:
            status = Status("Stalled", t)
            break
        guard = cfg.guard_factor / (1.0 + float(np.max(np.abs(u))) ** (prob.p - 1)) if u.size else 1.0
        tau_eff = min(tau, cfg.tau_max, guard, cfg.t_end - t)
        try:
            u_next, iters = step(prob, u, tau_eff, cfg.cg_rel_tol, source=source)
            ok = bool(np.all(np.isfinite(u_next)))
        except CGDiverged:
            ok, iters = False, 0
        if ok:
            nm_next, j_next, i_next = _row_values(prob, u_next)
            ok = j_next <= j + cfg.energy_slack * (1.0 + abs(j))
        if not ok:
            tau = tau_eff / 2
            streak = 0
            if tau < cfg.tau_min:
                status = Status("Stalled", t)
                break
            continue
        delta = u_next - u
        dissipated += w * float(delta @ delta + delta @ (a @ delta)) / tau_eff
        t += tau_eff
        u, nm, j, i = u_next, nm_next, j_next, i_next
        steps += 1
        record(t, tau_eff, nm, j, i, j + dissipated - j0, iters)
        streak += 1
        if streak >= cfg.grow_after:
            tau = min(tau * cfg.grow_factor, cfg.tau_max)
            streak = 0
        if nm.h_sq >= cfg.blowup_threshold:
            status = Status("BlewUp", t)
            break
        hit_time = False
        while pending and t >= pending[0] - end_tol:
            pending.pop(0)
            hit_time = True
        if hit_time or steps - last_snap >= cfg.snapshot_stride:
            snapshots.append((t, u.copy()))
            last_snap = steps
    if snapshots[-1][0] != t:
        snapshots.append((t, u.copy()))
    columns = {k: np.asarray(v, dtype=int if k == "cg_iters" else float) for k, v in cols.items()}
    meta = {"steps": steps, "tau0": cfg.tau0, "tau_max": cfg.tau_max, "t_end": cfg.t_end,
            "blowup_threshold": cfg.blowup_threshold}
    return Trajectory(columns, snapshots, status, dissipated, meta)


def derived_series(traj: Trajectory, d: float | None = None) -> dict:
    """Series used in the blow-up arguments, aligned on the trajectory times.

    ``M = h/2``, ``F_neg = -J``, ``F_sub = d - J`` (when ``d`` is given),
    ``dh_dt`` by centered differences on the nonuniform time grid, and ``-2I``.
    """
    if len(traj) < 2:
        raise TooShort("need at least two rows")
    t = traj["t"]
    h = traj["h_norm_sq"]
    out = {
        "t": t,
        "M": h / 2,
        "F_neg": -traj["J"],
        "dh_dt": np.gradient(h, t, edge_order=1),
        "minus_2I": -2 * traj["I"],
    }
    if d is not None:
        out["F_sub"] = d - traj["J"]
    return out
