from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pseudoparabolic import fields as fl
from pseudoparabolic.errors import DimensionMismatch, NotHormander, RIsTooSmall


def small_poly(dim):
    exps = st.tuples(*[st.integers(0, 2) for _ in range(dim)]).filter(lambda e: sum(e) <= 2)
    coef = st.fractions(min_value=-3, max_value=3, max_denominator=4)
    return st.dictionaries(exps, coef, max_size=3)


def fields_of(dim):
    return st.lists(small_poly(dim), min_size=dim, max_size=dim).map(
        lambda comps: fl.PolyVectorField(dim, tuple(comps)))


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_bracket_antisymmetry(data):
    dim = data.draw(st.integers(2, 3))
    a = data.draw(fields_of(dim))
    b = data.draw(fields_of(dim))
    assert fl.lie_bracket(a, b) == -fl.lie_bracket(b, a)
    assert fl.lie_bracket(a, a).is_zero()


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_jacobi_identity(data):
    dim = data.draw(st.integers(2, 3))
    a, b, c = (data.draw(fields_of(dim)) for _ in range(3))
    br = fl.lie_bracket
    total = br(a, br(b, c)) + br(b, br(c, a)) + br(c, br(a, b))
    assert total.is_zero()


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_bracket_is_commutator_of_derivations(data):
    dim = 2
    a, b = data.draw(fields_of(dim)), data.draw(fields_of(dim))
    f = data.draw(small_poly(dim))
    lhs = fl.lie_bracket(a, b).apply(f)
    rhs = fl.poly_add(a.apply(b.apply(f)), b.apply(a.apply(f)), scale=-1)
    assert lhs == rhs


def test_grushin_bracket_is_y_direction():
    x1, x2 = fl.grushin().fields
    assert fl.lie_bracket(x1, x2) == fl.PolyVectorField.from_terms(2, [(1, (0, 0), 1)])


def test_heisenberg_bracket_is_z_direction():
    x1, x2 = fl.heisenberg().fields
    assert fl.lie_bracket(x1, x2) == fl.PolyVectorField.from_terms(3, [(2, (0, 0, 0), 1)])


def test_builtins_are_divergence_free():
    for sys_ in (fl.laplacian(2), fl.laplacian(3), fl.grushin(), fl.heisenberg()):
        for f in sys_.fields:
            assert f.divergence() == {}


def test_non_divergence_free_rejected():
    bad = fl.PolyVectorField.from_terms(2, [(0, (1, 0), 1)])  # x d/dx
    with pytest.raises(ValueError):
        fl.VectorFieldSystem(2, [bad])


def _indices(sys_, lo=-1.0, hi=1.0, n=8):
    axes = [np.linspace(lo, hi, n + 2) for _ in range(sys_.dim)]
    return fl.compute_indices(sys_, fl.index_samples(sys_, axes))


@pytest.mark.parametrize("dim", [2, 3])
def test_laplacian_indices(dim):
    rep = _indices(fl.laplacian(dim))
    assert (rep.hormander_index, rep.metivier_index) == (1, dim)


def test_grushin_indices_need_degenerate_line():
    rep = _indices(fl.grushin())
    assert (rep.hormander_index, rep.metivier_index) == (2, 3)
    # away from x = 0 the fields are elliptic
    away = fl.compute_indices(fl.grushin(), np.array([[0.5, 0.1], [-0.7, 0.3]]))
    assert (away.hormander_index, away.metivier_index) == (1, 2)


def test_grushin_samples_include_zero_line_for_odd_grid():
    axes = [np.linspace(-1, 1, 10), np.linspace(-1, 1, 10)]  # no node at x = 0
    pts = fl.index_samples(fl.grushin(), axes)
    assert np.any(pts[:, 0] == 0.0)


def test_heisenberg_indices():
    rep = _indices(fl.heisenberg(), n=4)
    assert (rep.hormander_index, rep.metivier_index) == (2, 4)


def test_not_hormander_raises():
    only_x = fl.VectorFieldSystem(2, [fl.PolyVectorField.from_terms(2, [(0, (0, 0), 1)])])
    with pytest.raises(NotHormander):
        _indices(only_x)


def test_admissible_p_range():
    assert fl.admissible_p_range(3) == (1.0, 5.0)
    assert fl.admissible_p_range(4) == (1.0, 3.0)
    with pytest.raises(RIsTooSmall):
        fl.admissible_p_range(2)


def test_noncharacteristic_boundary():
    ok, margin = fl.check_noncharacteristic(fl.grushin(), fl.box_boundary_samples((-1, -1), (1, 1)))
    assert not ok and margin == 0.0  # x d/dy vanishes at x = 0 on the top face
    ok, margin = fl.check_noncharacteristic(fl.grushin(), fl.box_boundary_samples((1, -1), (2, 1)))
    assert ok and margin == pytest.approx(1.0)


def test_field_spec_round_trip():
    for sys_ in (fl.grushin(), fl.heisenberg()):
        again = fl.parse_field_spec(fl.format_field_spec(sys_))
        assert again.dim == sys_.dim
        assert list(again.fields) == list(sys_.fields)


def test_field_spec_rational_coefficients():
    text = 'dim = 3\n[[field]]\nterms = [[1, [0,0,0], "1"], [3, [0,1,0], "-1/2"]]\n' \
           '[[field]]\nterms = [[2, [0,0,0], "1"], [3, [1,0,0], "1/2"]]\n'
    sys_ = fl.parse_field_spec(text)
    assert list(sys_.fields) == list(fl.heisenberg().fields)
    assert sys_.fields[0].components[2] == {(0, 1, 0): Fraction(-1, 2)}


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        fl.lie_bracket(fl.grushin().fields[0], fl.heisenberg().fields[0])
