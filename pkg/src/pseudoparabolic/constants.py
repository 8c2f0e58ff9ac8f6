"""Spectral and embedding constants, theorem constants, and potential-well regimes."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import operators as op
from .errors import NotConverged, RegimeMismatch, TargetUnreachable, ZeroDirection
from .linalg import cg

log = logging.getLogger(__name__)

BISECT_TOL = 1e-12
BISECT_MAXITER = 200


def bisect(f, lo: float, hi: float, tol: float = BISECT_TOL, maxiter: int = BISECT_MAXITER):
    """Bracketing bisection for a sign change of ``f`` on ``[lo, hi]``.

    Returns the final bracket ``(lo, hi)`` with ``sign f(lo) == sign f(lo0)``.
    """
    flo = f(lo)
    for _ in range(maxiter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return lo, hi


# -- lambda_1 -------------------------------------------------------------------

def lambda1_inverse_iteration(prob: op.DiscreteProblem, tol: float = 1e-10, max_iter: int = 10000,
                              cg_rtol: float = 1e-12):
    """Inverse power iteration for the smallest eigenvalue of the stiffness matrix.

    Returns ``(lambda1, eigenvector, iterations)``.  The weighted pencil
    ``A u = lambda (w I) u`` of the discrete weak form has the same eigenvalues
    as ``A`` because both sides of the discrete inner products carry ``w``.
    The Rayleigh quotients decrease geometrically, so the stop rule bounds the
    remaining tail ``delta * rho / (1 - rho)`` rather than the last change.
    """
    a = prob.stiffness
    x = np.ones(prob.n) / math.sqrt(prob.n)
    lam = float(x @ (a @ x))
    y = x / lam
    prev_delta = None
    for it in range(1, max_iter + 1):
        y, _ = cg(a, x, x0=y, rtol=cg_rtol)
        x = y / math.sqrt(float(y @ y))
        new = float(x @ (a @ x))
        delta = abs(new - lam)
        rho = min(delta / prev_delta, 0.999) if prev_delta else 0.5
        if delta < tol * abs(new) and delta * rho / (1 - rho) < tol * abs(new):
            return new, x, it
        lam = new
        prev_delta = delta if delta > 0 else None
        y = x / lam
    raise NotConverged(f"inverse iteration did not converge in {max_iter} iterations", best=lam,
                       iterations=max_iter)


def estimate_lambda1(prob: op.DiscreteProblem, **kw) -> float:
    return lambda1_inverse_iteration(prob, **kw)[0]


# -- sup-type quotients -------------------------------------------------------------

@dataclass
class QuotientSearch:
    value: float
    maximizer: np.ndarray
    iterations: int
    converged: bool


def nonlinear_inverse_iteration(prob: op.DiscreteProblem, start: np.ndarray, shift: float = 0.0,
                                tol: float = 1e-8, max_iter: int = 500, cg_rtol: float = 1e-10,
                                support: np.ndarray | None = None) -> QuotientSearch:
    """Maximize ``||u||_{p+1} / ||u||_K`` with ``K = A + shift*I`` by ``u <- K^{-1} g(u)``.

    Each iterate is renormalized in ``L^{p+1}``.  The quotient of every iterate
    is recorded and the best one returned.  When ``support`` is given the
    iteration runs on that block of the (block diagonal) stiffness matrix.
    """
    idx = np.arange(prob.n) if support is None else np.asarray(support)
    a = prob.stiffness[idx][:, idx].tocsr()
    w = prob.weight
    p = prob.p

    def matvec(v):
        out = a @ v
        if shift:
            out += shift * v
        return out

    def quot(v):
        energy = w * float(v @ matvec(v))
        return (w * float(np.sum(np.abs(v) ** (p + 1)))) ** (1 / (p + 1)) / math.sqrt(energy)

    v = np.asarray(start, float)[idx].copy()
    if not np.any(v):
        raise ZeroDirection("start vector vanishes on the chosen support")
    v /= (w * np.sum(np.abs(v) ** (p + 1))) ** (1 / (p + 1))
    best_q, best_v = quot(v), v.copy()
    prev = best_q
    y = None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        y, _ = cg(matvec, np.abs(v) ** (p - 1) * v, x0=y, rtol=cg_rtol)
        scale = (w * np.sum(np.abs(y) ** (p + 1))) ** (1 / (p + 1))
        v = y / scale
        y = y / scale
        q = quot(v)
        if q > best_q:
            best_q, best_v = q, v.copy()
        if abs(q - prev) < tol * q:
            converged = True
            break
        prev = q
    full = np.zeros(prob.n)
    full[idx] = best_v
    return QuotientSearch(best_q, full, it, converged)


def _search_supports(prob: op.DiscreteProblem) -> list:
    comps = prob.components
    if len(comps) == 1:
        return [None]
    biggest = comps[0].size
    return [c for c in comps if 2 * c.size >= biggest]


def best_quotient(prob: op.DiscreteProblem, shift: float = 0.0, start=None, **kw) -> QuotientSearch:
    """Run :func:`nonlinear_inverse_iteration` on every large stiffness component.

    On a block-diagonal stiffness the supremum is attained on a single block
    (``(sum E_c)^{(p+1)/2} >= sum E_c^{(p+1)/2}``), so the best block wins.
    """
    start = op.sine_product(prob.grid) if start is None else start
    best = None
    total = 0
    for support in _search_supports(prob):
        res = nonlinear_inverse_iteration(prob, start, shift=shift, support=support, **kw)
        total += res.iterations
        if best is None or res.value > best.value:
            best = res
    best.iterations = total
    return best


def estimate_c_star(prob: op.DiscreteProblem, **kw):
    """``(C_*, maximizer)``: the best ``||u||_{p+1}/||Xu||_2`` found."""
    res = best_quotient(prob, **kw)
    if not res.converged:
        log.warning("C_* iteration stopped before stagnation; returning best-so-far %.12g", res.value)
    return res.value, res.maximizer


def estimate_c_embed(prob: op.DiscreteProblem, **kw):
    """Best ``||u||_{p+1}/||u||_H`` found (the embedding constant)."""
    res = best_quotient(prob, shift=1.0, **kw)
    return res.value, res.maximizer


def mountain_pass_d(c_star: float, p: float) -> float:
    return (p - 1) / (2 * (p + 1)) * c_star ** (-2 * (p + 1) / (p - 1))


# -- problem constants ----------------------------------------------------------------

@dataclass
class ProblemConstants:
    lambda1: float
    c_star: float
    c_embed: float
    p: float
    c_star_source: str = "inverse_iteration"
    c_star_converged: bool = True
    iteration_counts: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    c_star_maximizer: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def d(self) -> float:
        return mountain_pass_d(self.c_star, self.p)

    @property
    def eps1(self) -> float:
        return self.c_star ** (-2 / (self.p - 1))

    def observe_quotient(self, q: float, source: str, maximizer=None) -> bool:
        """Raise the running maximum ``c_star`` if ``q`` exceeds it."""
        if q > self.c_star:
            log.info("C_* refined %.12g -> %.12g from %s", self.c_star, q, source)
            self.c_star = float(q)
            self.c_star_source = source
            if maximizer is not None:
                self.c_star_maximizer = np.array(maximizer, float)
            return True
        return False

    def observe(self, prob: op.DiscreteProblem, u: np.ndarray, source: str = "probe") -> bool:
        try:
            q = op.quotient(prob, u)
        except ZeroDirection:
            return False
        return self.observe_quotient(q, source, u)

    def to_json(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k not in ("c_star_maximizer", "provenance")}
        out["d"] = self.d
        out.update(self.provenance)
        return out

    @classmethod
    def from_json(cls, data: dict) -> "ProblemConstants":
        names = {"lambda1", "c_star", "c_embed", "p", "c_star_source", "c_star_converged", "iteration_counts"}
        kw = {k: data[k] for k in names if k in data}
        prov = {k: v for k, v in data.items() if k not in names | {"d", "provenance"}}
        prov.update(data.get("provenance", {}))
        return cls(provenance=prov, **kw)


def compute_problem_constants(prob: op.DiscreteProblem, probes: int = 100, seed: int = 0) -> ProblemConstants:
    lam, _, lam_it = lambda1_inverse_iteration(prob)
    cs = best_quotient(prob)
    ce = best_quotient(prob, shift=1.0)
    pc = ProblemConstants(
        lambda1=lam,
        c_star=cs.value,
        c_embed=ce.value,
        p=prob.p,
        c_star_converged=cs.converged,
        iteration_counts={"lambda1": lam_it, "c_star": cs.iterations, "c_embed": ce.iterations},
        provenance={
            "r": prob.r,
            "Z": prob.Z,
            "grid": {"lower": list(prob.grid.lower), "upper": list(prob.grid.upper), "shape": list(prob.grid.shape)},
            "field_family": prob.system.name,
        },
        c_star_maximizer=cs.maximizer,
    )
    if not cs.converged:
        log.warning("C_* iteration hit its cap; stored value is a best-so-far lower estimate")
    rng = np.random.default_rng(seed)
    for _ in range(probes):
        pc.observe(prob, rng.standard_normal(prob.n), source="random_probe")
    return pc


# -- theorem constants ------------------------------------------------------------------

REGIME_TAGS = {
    "epsilon": "0<J0<d",
    "c_tilde": "0<J0<d",
    "eps0": "0<=J0<d",
    "eps2": "0<=J0<d",
    "c3": "0<=J0<d",
    "t_upper": "0<=J0<d",
    "c1": "J0<d",
    "rate_upper_coef": "J0<d",
    "rate_upper_exp": "J0<d",
    "c2": "J0<0",
    "eps1": "any",
    "rate_lower_coef": "any",
    "rate_lower_exp": "any",
}


@dataclass
class TheoremConstants:
    j0: float
    h0: float
    d: float
    p: float
    lambda1: float
    c_star: float
    epsilon: float | None = None
    c_tilde: float | None = None
    eps0: float | None = None
    eps1: float | None = None
    eps2: float | None = None
    c1: float | None = None
    c2: float | None = None
    c3: float | None = None
    t_upper: float | None = None
    rate_upper_coef: float | None = None
    rate_upper_exp: float | None = None
    rate_lower_coef: float | None = None
    rate_lower_exp: float | None = None

    def require(self, name: str) -> float:
        value = getattr(self, name)
        if value is None:
            raise RegimeMismatch(f"{name} is defined only for {REGIME_TAGS[name]}; J0={self.j0:.6g}, d={self.d:.6g}")
        return value

    def to_json(self) -> dict:
        out = asdict(self)
        out["regimes"] = {k: REGIME_TAGS[k] for k in REGIME_TAGS if out.get(k) is not None}
        return out


def decay_epsilon(j0: float, d: float, p: float) -> float:
    ratio = (j0 / d) ** ((p - 1) / 2)
    return 4 * (p + 1) / (2 + (p - 1) / (1 - ratio))


def decay_rate(epsilon: float, lambda1: float, p: float) -> float:
    return epsilon * lambda1 * (p - 1) / (2 * (lambda1 + 1) * (p + 1) + lambda1 * (p - 1))


def eps0_value(c_star: float, j0: float, p: float) -> float:
    base = (p + 1) / 2 - c_star ** (2 * (p + 1) / (p - 1)) * j0 * (p + 1)
    return base ** (1 / (p - 1))


def profile_h(eps, c_star: float, p: float):
    """``eps^2 / (2 C_*^2) - eps^(p+1) / (p+1)``."""
    return eps * eps / (2 * c_star * c_star) - eps ** (p + 1) / (p + 1)


def eps2_solve(pc: ProblemConstants, j0: float) -> float:
    """Root of ``profile_h(eps) = j0`` above ``eps1`` by bisection."""
    d = pc.d
    if not 0 <= j0 < d:
        raise RegimeMismatch(f"eps2 needs 0 <= J0 < d (J0={j0:g}, d={d:g})")
    e1 = pc.eps1
    hi = 2 * e1
    while profile_h(hi, pc.c_star, pc.p) >= j0:
        hi *= 2
    # never looser than the absolute tolerance; relative when eps1 is tiny (p near 1)
    lo, hi = bisect(lambda e: profile_h(e, pc.c_star, pc.p) - j0, e1, hi, tol=BISECT_TOL * min(1.0, e1))
    return 0.5 * (lo + hi)


def theorem_constants(pc: ProblemConstants, j0: float, h_norm0_sq: float) -> TheoremConstants:
    p, d, lam, cs = pc.p, pc.d, pc.lambda1, pc.c_star
    tc = TheoremConstants(j0=j0, h0=h_norm0_sq, d=d, p=p, lambda1=lam, c_star=cs)
    tc.eps1 = pc.eps1
    tc.rate_lower_coef = 1.0 / (cs ** (2 * (p + 1) / (p - 1)) * (p - 1) ** (2 / (p - 1)))
    tc.rate_lower_exp = -2 / (p - 1)
    if 0 < j0 < d:
        tc.epsilon = decay_epsilon(j0, d, p)
        tc.c_tilde = decay_rate(tc.epsilon, lam, p)
    if 0 <= j0 < d:
        tc.eps0 = eps0_value(cs, j0, p)
        tc.eps2 = eps2_solve(pc, j0)
        e = tc.eps0 ** (p + 1)
        tc.c1 = (e - 1) * (p - 1) / e + 2
        tc.c3 = lam * (p - 1) * (tc.eps0 ** 2 - 1) / (tc.eps0 ** 2 * (lam + 1))
        tc.t_upper = h_norm0_sq / (tc.c1 * (tc.c1 - 2) * (d - j0)) if h_norm0_sq > 0 else None
        f0 = d - j0
    elif j0 < 0:
        tc.c1 = p + 1
        tc.c2 = lam * (p - 1) / (lam + 1)
        f0 = -j0
    if tc.c1 is not None and h_norm0_sq > 0:
        c1 = tc.c1
        # log domain: the exponent 2/(2 - C1) is huge when p is close to 1
        log_coef = 2 / (2 - c1) * (math.log(c1 * (c1 - 2) * f0) - c1 / 2 * math.log(h_norm0_sq))
        tc.rate_upper_coef = math.exp(log_coef) if log_coef < 709.0 else math.inf
        tc.rate_upper_exp = -2 / (c1 - 2)
    return tc


# -- regimes ------------------------------------------------------------------------------

class Regime(str, enum.Enum):
    STABLE = "StableWell"
    UNSTABLE = "UnstableWell"
    NEGATIVE = "NegativeEnergy"
    CRITICAL = "Critical/Unknown"


@dataclass(frozen=True)
class WellClassification:
    j0: float
    i0: float
    regime: Regime

    def to_json(self) -> dict:
        return {"j0": self.j0, "i0": self.i0, "regime": self.regime.value}


def classify_values(j0: float, i0: float, d: float, scale: float) -> WellClassification:
    if abs(i0) <= 1e-12 * scale:
        regime = Regime.CRITICAL
    elif j0 < 0:
        regime = Regime.NEGATIVE
    elif j0 >= d - 1e-12 * d:
        regime = Regime.CRITICAL
    elif i0 > 0:
        regime = Regime.STABLE
    else:
        regime = Regime.UNSTABLE
    return WellClassification(float(j0), float(i0), regime)


def classify(prob: op.DiscreteProblem, pc: ProblemConstants, u0: np.ndarray) -> WellClassification:
    nm = op.norms(prob, u0)
    j0 = 0.5 * nm.x_sq - nm.lp1_pow / (prob.p + 1)
    i0 = nm.x_sq - nm.lp1_pow
    return classify_values(j0, i0, pc.d, max(nm.x_sq, nm.lp1_pow))


def synthesize_initial(prob: op.DiscreteProblem, pc: ProblemConstants, base: np.ndarray, regime,
                       target_j0: float | None = None) -> np.ndarray:
    """Scale ``base`` so the result lies in ``regime`` (optionally at energy ``target_j0``).

    Uses ``J(s u) = s^2 a/2 - s^(p+1) b/(p+1)`` with ``a = ||Xu||^2``,
    ``b = ||u||_{p+1}^{p+1}``; ``s*`` is the Nehari scale and ``s0 > s*`` the
    positive zero of ``J(s u)``.
    """
    regime = Regime(regime)
    base = np.asarray(base, float)
    pc.observe(prob, base, source="initial_base")
    p = prob.p
    nm = op.norms(prob, base)
    a, b = nm.x_sq, nm.lp1_pow
    if a <= 0 or b <= 0:
        raise ZeroDirection("base direction is zero")
    s_star = (a / b) ** (1 / (p - 1))
    s_zero = ((p + 1) * a / (2 * b)) ** (1 / (p - 1))

    def j_of(s):
        return 0.5 * s * s * a - s ** (p + 1) * b / (p + 1)

    d = pc.d
    j_peak = j_of(s_star)
    if regime is Regime.STABLE:
        if target_j0 is None:
            s = 0.5 * s_star
            while j_of(s) >= d:
                s *= 0.5
        else:
            if not 0 < target_j0 < min(d, j_peak):
                raise TargetUnreachable(f"StableWell target {target_j0:g} not in (0, {min(d, j_peak):g})")
            s, _ = bisect(lambda s: j_of(s) - target_j0, 0.0, s_star)
    elif regime is Regime.UNSTABLE:
        target = 0.5 * min(d, j_peak) if target_j0 is None else target_j0
        if not 0 <= target < d:
            raise TargetUnreachable(f"UnstableWell target {target:g} outside [0, d={d:g})")
        if j_peak < target:
            raise TargetUnreachable(f"Nehari peak {j_peak:g} of this direction is below target {target:g}")
        s, _ = bisect(lambda s: j_of(s) - target, s_star, s_zero)
        # keep J(s u) >= target in floating point (matters for target 0)
        while op.functional_J(prob, s * base) < target:
            s *= 1 - 1e-12
    elif regime is Regime.NEGATIVE:
        if target_j0 is None:
            s = 1.5 * s_zero
        else:
            if not target_j0 < 0:
                raise TargetUnreachable("NegativeEnergy target must be negative")
            hi = 2 * s_zero
            while j_of(hi) > target_j0:
                hi *= 2
            _, s = bisect(lambda s: j_of(s) - target_j0, s_zero, hi)
    else:
        raise TargetUnreachable("cannot synthesize Critical/Unknown data")
    u0 = s * base
    got = classify(prob, pc, u0)
    if got.regime is not regime:
        raise TargetUnreachable(f"synthesized data classified {got.regime.value}, wanted {regime.value}")
    return u0

