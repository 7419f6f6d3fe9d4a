from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

import oracles
from chiralkit.chirality import (
    beltrami_series, chiral_perturb, contact_defect, defect_polynomial, gradient_form,
    perturbed_form, reeb_like,
)
from chiralkit.errors import IndefiniteDefect, NotHarmonic
from chiralkit.germ import load_catalog
from chiralkit.polyform import (
    DifferentialForm, Polynomial, PolyVectorField, evaluate, ext_d, hodge_euclid, interior,
    laplacian, parse_polynomial as P, solve_poisson, wedge,
)

x, y, z = Polynomial.variables()
F = Fraction
MORSE = P("x^2/2 + y^2/2 - z^2")
D4 = P("x^2 y - y^3/3 + z^2/2")
D4_NU = DifferentialForm.one_form(P("z(x^2 - y^2) - y z^3"), P("x z^3 - 2 x y z"), 0)


def morse_eta(t):
    return DifferentialForm.one_form(x + t * y * z, y - t * x * z, -2 * z)


@pytest.mark.parametrize("t", [F(1), F(1, 3), F(1, 10)])
def test_morse_defect_closed_form(t):
    cd = contact_defect(morse_eta(t))
    assert cd.defect == t * (x ** 2 + y ** 2 + 4 * z ** 2)
    assert cd.sign_verdict == "positive-semidefinite" and cd.certified
    T = sp.Rational(t.numerator, t.denominator)
    X, Y, Z = oracles.XYZ
    assert oracles.defect([X + T * Y * Z, Y - T * X * Z, -2 * Z]) == sp.expand(T * (X ** 2 + Y ** 2 + 4 * Z ** 2))


def test_exact_form_has_zero_defect():
    cd = contact_defect(gradient_form(D4 + x * y * z))
    assert cd.defect.is_zero() and cd.sign_verdict == "zero"


def test_d4_perturbation_is_one_signed():
    for t in (F(1, 10), F(1, 2), F(1)):
        cd = contact_defect(gradient_form(D4) + D4_NU * t)
        assert cd.sign_verdict == "positive-semidefinite"
        assert cd.defect.evaluate_exact((0, 0, 0)) == 0
    # a germ statement: large t keeps the sign only on a smaller ball
    eta = gradient_form(D4) + D4_NU * 3
    assert contact_defect(eta, radii=(0.1, 0.25, 0.5)).sign_verdict == "positive-semidefinite"
    assert contact_defect(eta).sign_verdict == "indefinite"


def test_chiral_perturb_examples():
    assert chiral_perturb(MORSE) == DifferentialForm.one_form(y * z, -x * z, 0)
    nu = chiral_perturb(x)
    assert ext_d(nu) == DifferentialForm.two_form(1, 0, 0)
    zonal = P("z^3 - 3/2 z (x^2 + y^2)")
    cd = contact_defect(perturbed_form(zonal, chiral_perturb(zonal), F(1, 10)))
    assert cd.sign_verdict == "positive-semidefinite"
    with pytest.raises(NotHarmonic):
        chiral_perturb(D4)


def test_series_first_terms():
    s1 = beltrami_series(MORSE, F(1, 10), 1)
    assert s1.eta == morse_eta(F(1, 10))
    s2 = beltrami_series(MORSE, F(1, 10), 2)
    nu2 = DifferentialForm.one_form(-x * z ** 2, -y * z ** 2, (x ** 2 + y ** 2) * z) / 4
    assert s2.terms[1] == nu2
    assert ext_d(nu2) == hodge_euclid(s2.terms[0])


def test_series_residual_shrinks():
    res = [beltrami_series(MORSE, F(1, 10), K).sup_residual() for K in range(1, 5)]
    assert all(a / b >= 2 for a, b in zip(res, res[1:]))


def test_series_recursion_exact_for_several_germs():
    for phi in (MORSE, P("z^3 - 3/2 z (x^2 + y^2)"), P("x^2 - y^2 + x y z")):
        assert beltrami_series(phi, F(1, 5), 4).check_recursion()


def test_reeb_like_examples():
    W = reeb_like(DifferentialForm.one_form(0, x, 1))
    assert W == PolyVectorField(0, 0, 1)
    eta = morse_eta(F(1, 2))
    W = reeb_like(eta)
    assert np.array_equal(evaluate(W, (0, 0, 0)), np.zeros(3))
    assert interior(W, ext_d(eta)).is_zero()
    eta = gradient_form(D4) + D4_NU / 10
    assert interior(reeb_like(eta), ext_d(eta)).is_zero()
    with pytest.raises(IndefiniteDefect):
        reeb_like(DifferentialForm.one_form(z, x, 0))


def test_catalog_forms_have_closed_jet_at_origin():
    for e in load_catalog().values():
        if e.perturbation is not None:
            eta = gradient_form(e.phi) + e.perturbation / 10
        elif laplacian(e.phi).is_zero():
            eta = perturbed_form(e.phi, chiral_perturb(e.phi), F(1, 10))
        else:
            continue
        assert np.array_equal(evaluate(ext_d(eta), (0, 0, 0)), np.zeros(3)), e.name


# -- properties ---------------------------------------------------------------

coef = st.integers(-9, 9)
exps = st.tuples(st.integers(0, 4), st.integers(0, 4), st.integers(0, 4)).filter(lambda e: 1 <= sum(e) <= 4)
raw_polys = st.dictionaries(exps, coef, min_size=1, max_size=5).map(Polynomial)


def harmonize(f: Polynomial) -> Polynomial:
    return f - solve_poisson(laplacian(f))


harmonics = raw_polys.map(harmonize).filter(lambda h: not h.is_zero())


def homogeneous_harmonics(degree):
    return raw_polys.map(lambda f: harmonize(f.homogeneous_part(degree))).filter(lambda h: not h.is_zero())


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4).flatmap(homogeneous_harmonics))
def test_homogeneous_harmonic_defect_is_gradient_norm(phi):
    nu = chiral_perturb(phi)
    g = phi.gradient().components
    assert defect_polynomial(gradient_form(phi) + nu) == g[0] ** 2 + g[1] ** 2 + g[2] ** 2
    assert contact_defect(gradient_form(phi) + nu).sign_verdict == "positive-semidefinite"


@settings(max_examples=20, deadline=None)
@given(harmonics, st.fractions(min_value=F(1, 50), max_value=2, max_denominator=50))
def test_harmonic_defect_identity(phi, t):
    # (dphi + t nu) ^ t dnu = t |grad phi|^2 + t^2 <nu, grad phi>, checked in sympy
    nu = chiral_perturb(phi)
    T = sp.Rational(t.numerator, t.denominator)
    g = [oracles.to_sym(c) for c in phi.gradient().components]
    n = [oracles.to_sym(c) for c in nu.components]
    want = sp.expand(T * oracles.dot(g, g) + T ** 2 * oracles.dot(n, g))
    assert oracles.to_sym(defect_polynomial(perturbed_form(phi, nu, t))) == want
    eta = [gi + T * ni for gi, ni in zip(g, n)]
    assert oracles.defect(eta) == want


@settings(max_examples=10, deadline=None)
@given(harmonics)
def test_series_recursion_property(phi):
    s = beltrami_series(phi, F(1, 10), 3)
    assert s.check_recursion()


@settings(max_examples=15, deadline=None)
@given(harmonics)
def test_reeb_like_contractions(phi):
    eta = perturbed_form(phi, chiral_perturb(phi), F(1, 10))
    try:
        W = reeb_like(eta)
    except IndefiniteDefect:
        return
    assert interior(W, ext_d(eta)).is_zero()
    assert interior(W, eta).components[0] == defect_polynomial(eta)
    assert W == PolyVectorField(*ext_d(eta).components)


@pytest.mark.parametrize("K", [2, 3, 4])
def test_beltrami_defect_matches_norm(K):
    t = F(1, 10)
    eta = beltrami_series(MORSE, t, K).eta
    f = defect_polynomial(eta).lambdify()
    e = eta.lambdify()
    rng = np.random.default_rng(K)
    p = rng.normal(size=(2000, 3))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    want = float(t) * np.sum(e(*p.T) ** 2, axis=-1)
    got = f(*p.T)
    assert np.max(np.abs(got - want) / want) < 10 * float(t) ** K


def test_wedge_oracle_for_defect():
    eta = gradient_form(D4) + D4_NU
    ref = oracles.defect([oracles.to_sym(c) for c in eta.components])
    assert oracles.to_sym(wedge(eta, ext_d(eta)).components[0]) == ref
