import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles as orc
from pseudoparabolic import constants as cs
from pseudoparabolic import fields as fl
from pseudoparabolic import operators as op
from pseudoparabolic.errors import RegimeMismatch, TargetUnreachable


def unit_constants(p=3.0, lam=2 * math.pi ** 2, c_star=1.0):
    return cs.ProblemConstants(lambda1=lam, c_star=c_star, c_embed=c_star, p=p)


def test_bisect_bracket():
    lo, hi = cs.bisect(lambda x: x * x - 2, 0.0, 2.0)
    assert hi - lo <= cs.BISECT_TOL and lo * lo < 2 <= hi * hi


@pytest.mark.parametrize("name,shape", [("grushin", (8, 8)), ("laplacian", (7, 7)), ("grushin", (5, 8))])
def test_lambda1_matches_dense_eigh(name, shape):
    prob = op.assemble(op.Grid.box((-1, 1, -1, 1), shape), fl.builtin_system(name), 3.0)
    lam, vec, _ = cs.lambda1_inverse_iteration(prob)
    dense = np.linalg.eigvalsh(prob.stiffness.toarray())[0]
    assert abs(lam - dense) <= 1e-10 * dense
    assert np.linalg.norm(prob.stiffness @ vec - lam * vec) < 1e-4


def test_c_star_matches_lbfgs_oracle(grushin8):
    pc = cs.compute_problem_constants(grushin8, probes=10)
    rng = np.random.default_rng(1)
    starts = [op.sine_product(grushin8.grid)] + [rng.standard_normal(grushin8.n) for _ in range(6)]
    a = grushin8.stiffness.toarray()
    q = orc.lbfgs_quotient_max(a, 3.0, grushin8.weight, starts)
    assert abs(q - pc.c_star) <= 1e-6 * pc.c_star
    q1 = orc.lbfgs_quotient_max(a, 3.0, grushin8.weight, starts, shift=1.0)
    assert abs(q1 - pc.c_embed) <= 1e-6 * pc.c_embed


def test_c_star_is_running_max(grushin16, grushin16_constants):
    pc = cs.ProblemConstants(**{k: getattr(grushin16_constants, k)
                                for k in ("lambda1", "c_star", "c_embed", "p")})
    rng = np.random.default_rng(5)
    for _ in range(30):
        u = rng.standard_normal(grushin16.n)
        before = pc.c_star
        pc.observe(grushin16, u)
        assert pc.c_star >= max(before, op.quotient(grushin16, u)) - 1e-15
    assert pc.observe_quotient(pc.c_star + 1.0, "test")
    assert pc.c_star_source == "test"


def test_embedding_quotients_related(grushin16_constants):
    pc = grushin16_constants
    # ||u||_H >= ||Xu|| and lambda1 ||u||^2 <= ||Xu||^2 give the sandwich below
    assert pc.c_embed <= pc.c_star <= pc.c_embed * math.sqrt(1 + 1 / pc.lambda1) + 1e-12


def test_constants_json_round_trip(grushin16_constants):
    data = grushin16_constants.to_json()
    for key in ("lambda1", "c_star", "c_embed", "d", "p", "r", "Z", "grid", "field_family", "iteration_counts"):
        assert key in data
    again = cs.ProblemConstants.from_json(data)
    assert again.c_star == grushin16_constants.c_star and again.d == grushin16_constants.d
    assert again.to_json() == data


def test_formula_spot_values():
    pc = unit_constants()
    assert pc.d == pytest.approx(0.25, abs=1e-12)
    tc = cs.theorem_constants(pc, 0.0, 1.3125)
    assert tc.eps0 == pytest.approx(math.sqrt(2), abs=1e-12)
    assert tc.c1 == pytest.approx(3.5, abs=1e-12)
    assert tc.t_upper == pytest.approx(1.0, abs=1e-12)
    assert tc.rate_lower_coef == pytest.approx(0.5, abs=1e-12)
    assert tc.rate_lower_exp == -1.0
    assert tc.eps2 == pytest.approx(math.sqrt(2), abs=1e-10)
    assert cs.decay_epsilon(0.25 * pc.d, pc.d, 3.0) == pytest.approx(24 / 7, abs=1e-12)
    neg = cs.theorem_constants(pc, -1.0, 2.0)
    assert neg.c1 == 4.0 and neg.rate_upper_exp == -1.0
    assert neg.c2 == pytest.approx(1.90357, abs=1e-5)


@settings(max_examples=80, deadline=None)
@given(st.floats(1.05, 4.5), st.floats(0.3, 3.0), st.floats(0.5, 50.0), st.floats(1e-3, 0.999))
def test_theorem_constants_well_regime(p, c_star, lam, frac):
    pc = unit_constants(p, lam, c_star)
    j0 = frac * pc.d
    tc = cs.theorem_constants(pc, j0, 1.0)
    assert tc.epsilon > 0 and tc.c_tilde > 0
    assert tc.eps0 > 1 and tc.c1 > 2
    assert abs(cs.profile_h(tc.eps2, c_star, p) - j0) < 1e-10 * max(1.0, j0)
    assert tc.eps2 / tc.eps1 >= tc.eps0 * (1 - 1e-9)
    assert tc.eps2 > tc.eps1


def test_regime_gating_of_theorem_constants():
    pc = unit_constants()
    neg = cs.theorem_constants(pc, -0.5, 1.0)
    with pytest.raises(RegimeMismatch):
        neg.require("c_tilde")
    with pytest.raises(RegimeMismatch):
        neg.require("t_upper")
    well = cs.theorem_constants(pc, 0.1, 1.0)
    with pytest.raises(RegimeMismatch):
        well.require("c2")
    above = cs.theorem_constants(pc, 0.3, 1.0)
    for name in ("c1", "eps2", "c_tilde"):
        with pytest.raises(RegimeMismatch):
            above.require(name)
    with pytest.raises(RegimeMismatch):
        cs.eps2_solve(pc, 0.25)


def test_classify_values():
    R = cs.Regime
    assert cs.classify_values(0.1, 1.0, 0.25, 1.0).regime is R.STABLE
    assert cs.classify_values(0.1, -1.0, 0.25, 1.0).regime is R.UNSTABLE
    assert cs.classify_values(-0.1, -1.0, 0.25, 1.0).regime is R.NEGATIVE
    assert cs.classify_values(0.25, -1.0, 0.25, 1.0).regime is R.CRITICAL
    assert cs.classify_values(0.0, 0.0, 0.25, 0.0).regime is R.CRITICAL


@pytest.mark.parametrize("regime,target", [("StableWell", None), ("StableWell", "quarter"),
                                           ("UnstableWell", None), ("UnstableWell", 0.0),
                                           ("NegativeEnergy", None), ("NegativeEnergy", -0.5)])
def test_synthesize_initial(grushin16, grushin16_constants, regime, target):
    pc = grushin16_constants
    tgt = 0.25 * pc.d if target == "quarter" else target
    for base in (op.sine_product(grushin16.grid), op.gaussian_bump(grushin16.grid)):
        u0 = cs.synthesize_initial(grushin16, pc, base, regime, tgt)
        wc = cs.classify(grushin16, pc, u0)
        assert wc.regime.value == regime
        if tgt is not None:
            assert wc.j0 == pytest.approx(tgt, rel=1e-9, abs=1e-10)
            assert wc.j0 >= tgt if regime == "UnstableWell" else True


def test_synthesize_unreachable(grushin16, grushin16_constants):
    base = op.sine_product(grushin16.grid)
    with pytest.raises(TargetUnreachable):
        cs.synthesize_initial(grushin16, grushin16_constants, base, "StableWell", 10.0)
    with pytest.raises(TargetUnreachable):
        cs.synthesize_initial(grushin16, grushin16_constants, base, "NegativeEnergy", 0.1)
