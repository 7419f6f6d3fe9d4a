import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from chiralkit.errors import ContractViolation, NotClosed, ParseError
from chiralkit.polyform import (
    DifferentialForm, EULER, Polynomial, PolyVectorField, dx, dy, dz, evaluate, ext_d,
    hodge_euclid, interior, laplacian, parse_polynomial, poincare_homotopy, solve_poisson,
    truncate_jet, wedge,
)

x, y, z = Polynomial.variables()
P = parse_polynomial

# -- strategies ---------------------------------------------------------------

coef = st.fractions(min_value=-1000, max_value=1000, max_denominator=7)
exps = st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3)).filter(lambda e: sum(e) <= 5)
polys = st.dictionaries(exps, coef, max_size=5).map(Polynomial)


def forms(degree):
    n = 3 if degree in (1, 2) else 1
    return st.lists(polys, min_size=n, max_size=n).map(lambda c: DifferentialForm(degree, c))


any_form = st.integers(0, 3).flatmap(forms)


# -- examples -----------------------------------------------------------------

def test_wedge_basis():
    assert wedge(dx, dy) == DifferentialForm.two_form(0, 0, 1)
    assert wedge(dy, dz) == DifferentialForm.two_form(1, 0, 0)
    assert wedge(dz, dx) == DifferentialForm.two_form(0, 1, 0)
    assert wedge(dy, dx) == DifferentialForm.two_form(0, 0, -1)


def test_exact_form_wedge_its_derivative_vanishes():
    eta = DifferentialForm.one_form(x, y, -2 * z)
    out = wedge(eta, ext_d(eta))
    assert out.degree == 3 and out.is_zero()
    # cross-check against the vector-calculus oracle
    ref = oracles.wedge(oracles.form_to_sym(eta), oracles.d(*oracles.form_to_sym(eta)))
    assert oracles.same(oracles.form_to_sym(out), ref)


def test_d_of_function():
    assert ext_d(DifferentialForm.function(x ** 2 * y)) == DifferentialForm.one_form(2 * x * y, x ** 2, 0)


def test_d_of_chiral_term():
    nu = DifferentialForm.one_form(y * z, -x * z, 0)
    assert ext_d(nu) == DifferentialForm.two_form(x, y, -2 * z)


def test_interior_examples():
    assert interior(PolyVectorField(0, 0, 1), wedge(dx, dy)) == DifferentialForm.one_form(0, 0, 0)
    assert interior(EULER, wedge(dx, dy)) == DifferentialForm.one_form(-y, x, 0)
    # frozen from oracles.interior: F x E with F = (x, y, -2z), E = (x, y, z)
    got = interior(EULER, DifferentialForm.two_form(x, y, -2 * z))
    assert got == DifferentialForm.one_form(3 * y * z, -3 * x * z, 0)
    ref = oracles.interior([oracles.X, oracles.Y, oracles.Z],
                           (2, [oracles.X, oracles.Y, -2 * oracles.Z]))
    assert oracles.same(oracles.form_to_sym(got), ref)


def test_hodge_examples():
    assert hodge_euclid(dz) == wedge(dx, dy)
    phi = x ** 2 / 2 + y ** 2 / 2 - z ** 2
    assert hodge_euclid(ext_d(DifferentialForm.function(phi))) == DifferentialForm.two_form(x, y, -2 * z)


def test_homotopy_examples():
    assert poincare_homotopy(wedge(dx, dy)) == DifferentialForm.one_form(-y / 2, x / 2, 0)
    assert poincare_homotopy(DifferentialForm.two_form(x, y, -2 * z)) == DifferentialForm.one_form(y * z, -x * z, 0)
    beta = poincare_homotopy(DifferentialForm.volume())
    assert ext_d(beta) == DifferentialForm.volume()


def test_homotopy_rejects_non_closed():
    with pytest.raises(NotClosed):
        poincare_homotopy(DifferentialForm.two_form(x, 0, 0))


def test_truncate_and_evaluate():
    assert truncate_jet(DifferentialForm.one_form(x, x ** 3, 0), 1) == DifferentialForm.one_form(x, 0, 0)
    t = Fraction(1, 3)
    eta = DifferentialForm.one_form(x + t * y * z, y - t * x * z, -2 * z)
    assert truncate_jet(eta, 1) == DifferentialForm.one_form(x, y, -2 * z)
    assert np.array_equal(evaluate(eta, (0, 0, 0)), np.zeros(3))
    assert np.array_equal(evaluate(DifferentialForm.one_form(x, 0, 0), (2, 0, 0)), [2.0, 0, 0])


def test_contracts():
    with pytest.raises(ContractViolation):
        ext_d(DifferentialForm.volume())
    with pytest.raises(ContractViolation):
        wedge(wedge(dx, dy), wedge(dy, dz))
    with pytest.raises(ContractViolation):
        DifferentialForm(1, [x, y])
    with pytest.raises(ContractViolation):
        dx + wedge(dx, dy)


def test_parse_polynomial():
    assert P("x^2/2 + y^2/2 - z^2") == x ** 2 / 2 + y ** 2 / 2 - z ** 2
    assert P("2xy - 3/4 z^3") == 2 * x * y - Fraction(3, 4) * z ** 3
    assert P("(x+y)**2") == x * x + 2 * x * y + y * y
    with pytest.raises(ParseError) as exc:
        P("x^2 + (y")
    assert "column" in str(exc.value)


def test_json_schema_roundtrip():
    eta = DifferentialForm.one_form(x + y * z / 3, y - x * z, -2 * z)
    data = eta.to_json()
    assert data["degree"] == 1 and set(data["components"]) == {"dx", "dy", "dz"}
    assert ["1/3"] == [c for e, c in data["components"]["dx"] if e == [0, 1, 1]]
    assert DifferentialForm.from_json(json.loads(json.dumps(data))) == eta
    with pytest.raises(ParseError):
        DifferentialForm.from_json({"degree": 1, "components": {"dxdy": []}})


def test_poisson_solve():
    f = 3 * x ** 2 * y - z ** 4 + 7
    assert laplacian(solve_poisson(f)) == f


# -- properties ---------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(forms(1), forms(1))
def test_wedge_antisymmetry(a, b):
    assert wedge(a, b) == -wedge(b, a)
    assert wedge(a, a).is_zero()


@settings(max_examples=60, deadline=None)
@given(any_form, any_form)
def test_graded_leibniz(a, b):
    if a.degree + b.degree > 2:
        return
    sign = -1 if a.degree % 2 else 1
    assert ext_d(wedge(a, b)) == wedge(ext_d(a), b) + wedge(a, ext_d(b)) * sign


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 1).flatmap(forms))
def test_d_squared(a):
    assert ext_d(ext_d(a)).is_zero()


@settings(max_examples=60, deadline=None)
@given(forms(1))
def test_homotopy_inverts_d_on_closed_two_forms(a):
    b = ext_d(a)
    assert ext_d(poincare_homotopy(b)) == b


@settings(max_examples=60, deadline=None)
@given(any_form)
def test_hodge_involution(a):
    assert hodge_euclid(hodge_euclid(a)) == a


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2).flatmap(forms))
def test_d_matches_vector_calculus_oracle(a):
    assert oracles.same(oracles.form_to_sym(ext_d(a)), oracles.d(*oracles.form_to_sym(a)))


@settings(max_examples=40, deadline=None)
@given(forms(1), st.integers(1, 2).flatmap(forms))
def test_wedge_matches_oracle(a, b):
    assert oracles.same(oracles.form_to_sym(wedge(a, b)),
                        oracles.wedge(oracles.form_to_sym(a), oracles.form_to_sym(b)))


@settings(max_examples=40, deadline=None)
@given(st.lists(polys, min_size=3, max_size=3), st.integers(1, 3).flatmap(forms))
def test_interior_matches_oracle(V, a):
    got = interior(PolyVectorField(*V), a)
    ref = oracles.interior([oracles.to_sym(p) for p in V], oracles.form_to_sym(a))
    assert oracles.same(oracles.form_to_sym(got), ref)


@settings(max_examples=40, deadline=None)
@given(forms(1), forms(1),
       st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3))
def test_evaluate_commutes_with_algebra(a, b, p):
    lhs = evaluate(wedge(a, b) + wedge(ext_d(a), DifferentialForm.function(x)), p)
    va, vb = evaluate(a, p), evaluate(b, p)
    curl_a = evaluate(ext_d(a), p)
    rhs = np.cross(va, vb) + curl_a * p[0]
    scale = 1.0 + np.linalg.norm(va) * np.linalg.norm(vb) + np.linalg.norm(curl_a)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


@settings(max_examples=40, deadline=None)
@given(polys)
def test_poisson_property(f):
    assert laplacian(solve_poisson(f)) == f


@settings(max_examples=40, deadline=None)
@given(any_form)
def test_json_roundtrip_property(a):
    assert DifferentialForm.from_json(json.loads(json.dumps(a.to_json()))) == a
