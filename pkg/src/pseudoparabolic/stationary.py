"""Stationary solutions of ``-Delta_X phi = |phi|^{p-1} phi`` and distances to them."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import constants as cs
from . import operators as op
from .errors import NotConverged
from .linalg import cg

log = logging.getLogger(__name__)

GROUND = "GroundState"
ZERO = "Zero"


@dataclass
class StationarySolution:
    state: np.ndarray = field(repr=False)
    residual_dual_norm: float
    j_value: float
    multiplicity_tag: str
    label: str = ""
    iterations: int = 0

    def __neg__(self):
        return StationarySolution(-self.state, self.residual_dual_norm, self.j_value, self.multiplicity_tag,
                                  "-gs" if self.label == "+gs" else self.label, self.iterations)

    def to_json(self) -> dict:
        return {"j_value": self.j_value, "dual_norm": self.residual_dual_norm, "iterations": self.iterations,
                "multiplicity_tag": self.multiplicity_tag}


def residual(prob: op.DiscreteProblem, u: np.ndarray, source: bool = True) -> np.ndarray:
    """``A u - g(u)``, the nodal representative of ``J'(u)`` (the functional is ``w`` times it)."""
    rho = prob.stiffness @ u
    if source:
        rho = rho - op.nonlinearity(prob, u)
    return rho


def dual_norm_Jprime(prob: op.DiscreteProblem, u: np.ndarray, source: bool = True, rtol: float = 1e-12) -> float:
    """``sup <J'(u), v> / ||v||_H = sqrt(w rho^T (I + A)^{-1} rho)``."""
    u = np.asarray(u, float)
    rho = residual(prob, u, source)
    r, _ = cg(prob.h_matvec, rho, rtol=rtol)
    return math.sqrt(max(prob.weight * float(rho @ r), 0.0))


def h_distance(prob: op.DiscreteProblem, u: np.ndarray, v: np.ndarray) -> float:
    e = np.asarray(u, float) - np.asarray(v, float)
    return math.sqrt(prob.weight * float(e @ prob.h_matvec(e)))


def _nehari_scale(prob, v):
    return op.ray_scale_root(prob, v) * v


def solve_ground_state(prob: op.DiscreteProblem, pc: cs.ProblemConstants | None = None, tol: float = 1e-8,
                       max_iter: int = 2000, start: np.ndarray | None = None) -> StationarySolution:
    """Ground state by nonlinear inverse iteration, Nehari rescaling and damped refinement.

    The quotient maximizer ``v`` satisfies ``A v = mu g(v)``; by homogeneity
    ``phi = mu^{1/(p-1)} v`` solves the unscaled equation, and ``mu^{1/(p-1)}``
    is exactly the Nehari scale of ``v``.  Refinement steps are
    ``phi + alpha (N(A^{-1} g(phi)) - phi)`` with ``N`` the Nehari rescaling,
    halving ``alpha`` whenever the dual norm would grow.
    """
    if start is None and pc is not None and pc.c_star_maximizer is not None:
        start = pc.c_star_maximizer
    if start is None:
        start = cs.best_quotient(prob).maximizer
    phi = _nehari_scale(prob, np.asarray(start, float))
    res = dual_norm_Jprime(prob, phi)
    best = (res, phi)
    y = phi
    it = 0
    for it in range(1, max_iter + 1):
        if res <= tol:
            break
        y, _ = cg(prob.stiffness, op.nonlinearity(prob, phi), x0=y, rtol=1e-13)
        cand = _nehari_scale(prob, y)
        alpha = 1.0
        while True:
            trial = phi + alpha * (cand - phi)
            r_trial = dual_norm_Jprime(prob, trial)
            if r_trial < res or alpha < 1e-4:
                break
            alpha *= 0.5
        if r_trial >= res:
            log.warning("ground-state refinement stagnated at dual norm %.3e", res)
            break
        phi, res = trial, r_trial
        if res < best[0]:
            best = (res, phi)
    res, phi = best
    if res > tol:
        raise NotConverged(f"ground-state dual norm {res:.3e} above {tol:g}", best=res, iterations=it)
    if pc is not None:
        pc.observe(prob, phi, source="ground_state")
    return StationarySolution(phi, res, op.functional_J(prob, phi), GROUND, "+gs", it)


def zero_solution(prob: op.DiscreteProblem) -> StationarySolution:
    return StationarySolution(np.zeros(prob.n), 0.0, 0.0, ZERO, "Zero")


def stationary_set(prob: op.DiscreteProblem, gs: StationarySolution) -> list:
    """Desk-scale stand-in for the stationary set: ``{0, +gs, -gs}``."""
    return [zero_solution(prob), gs, -gs]


def distance_to_Psi(prob: op.DiscreteProblem, u: np.ndarray, solutions: list) -> tuple:
    """``(min_psi ||u - psi||_H, label of the closest psi)``."""
    best = (math.inf, None)
    for s in solutions:
        dist = h_distance(prob, u, s.state)
        if dist < best[0]:
            best = (dist, s.label or s.multiplicity_tag)
    return best
