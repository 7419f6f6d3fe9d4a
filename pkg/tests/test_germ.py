import itertools
from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

import oracles
from chiralkit.errors import ZeroOnSphere
from chiralkit.germ import (
    analyze_catalog_entry, beltrami_obstruction, catalog_entry, hessian_at_origin, is_harmonic,
    load_catalog, numeric_index, preimage_degree,
)
from chiralkit.polyform import Polynomial, PolyVectorField, laplacian, parse_polynomial as P

x, y, z = Polynomial.variables()
F = Fraction


def test_hessian_morse_normal_form():
    h = hessian_at_origin(P("x^2/2 + y^2/2 - z^2"))
    assert h.matrix == ((1, 0, 0), (0, 1, 0), (0, 0, -2))
    assert h.corank == 0 and h.morse_index == 1


def test_hessian_d4():
    h = hessian_at_origin(P("x^2 y - y^3/3 + z^2/2"))
    assert h.matrix == ((0, 0, 0), (0, 0, 0), (0, 0, 1))
    assert h.corank == 2 and h.trace == 1 and h.morse_index is None


def test_hessian_cubic_is_zero():
    h = hessian_at_origin(x ** 3)
    assert h.corank == 3 and h.trace == 0


@pytest.mark.parametrize("signs", list(itertools.product((1, -1), repeat=3)))
def test_morse_patterns(signs):
    phi = signs[0] * x ** 2 + signs[1] * y ** 2 + signs[2] * z ** 2
    res = numeric_index(phi.gradient())
    assert res.index == (-1) ** signs.count(-1)
    assert res.residual < 0.01


def test_index_morse1_and_d4():
    assert numeric_index(P("x^2/2 + y^2/2 - z^2").gradient()).index == -1
    res = numeric_index(P("x^2 y - y^3/3 + z^2/2").gradient())
    assert res.index == -2 and res.residual < 0.05


def test_index_t444_against_independent_count():
    e = catalog_entry("T444")
    grad = e.phi.gradient()
    res = numeric_index(grad, radius=e.index_radius)
    assert res.index == -3
    # lat-long barycentric counting, shares nothing with the package's quadrature
    f = grad.lambdify()
    counts = oracles.preimage_count_index(lambda p: f(p[:, 0], p[:, 1], p[:, 2]), radius=e.index_radius)
    assert counts == [-3] * len(counts)
    assert set(preimage_degree(grad, radius=e.index_radius)) == {-3}


def test_index_d4_against_independent_count():
    f = P("x^2 y - y^3/3 + z^2/2").gradient().lambdify()
    counts = oracles.preimage_count_index(lambda p: f(p[:, 0], p[:, 1], p[:, 2]))
    assert counts == [-2] * len(counts)


def test_harmonic_u12_representative():
    e = catalog_entry("U12harmonic")
    assert is_harmonic(e.phi)
    assert numeric_index(e.phi.gradient(), radius=e.index_radius).index == -2
    assert not is_harmonic(catalog_entry("U12").phi)


def test_obstructions():
    assert beltrami_obstruction(P("x^2 y - y^3/3 + z^2/2")) == "corank2"
    for k in (1, 3, 5):
        for s in (1, -1):
            phi = s * (x ** (k + 1) + y ** 2 + z ** 2)
            assert beltrami_obstruction(phi) == "spherical-level-sets"
    assert beltrami_obstruction(P("x^2/2 + y^2/2 - z^2")) == "none-found"
    assert beltrami_obstruction(P("x^3 + y^2 + z^2")) == "nonzero-trace"


def test_laplacian_examples():
    assert laplacian(P("x^2/2 + y^2/2 - z^2")).is_zero()
    for a in (F(0), F(1, 2), F(-3, 7), F(5)):
        phi = x ** 3 / 3 - (1 - a) * x * y ** 2 - a * x * z ** 2 + y ** 2 / 2 - z ** 2 / 2
        assert laplacian(phi).is_zero()
    d4 = P("x^2 y - y^3/3 + z^2/2")
    assert laplacian(d4) == Polynomial.const(1)
    assert oracles.laplacian(oracles.to_sym(d4)) == 1


def test_catalog_reports():
    cat = load_catalog()
    for name in ("Morse1", "Morse2", "D4minus", "T444"):
        rep = analyze_catalog_entry(cat[name])
        assert rep.numeric_index == cat[name].expected_index
    rep = analyze_catalog_entry(cat["D4minus"])
    assert rep.chirality_verdict == "chiral" and rep.beltrami_verdict == "not-beltrami"
    rep = analyze_catalog_entry(cat["Morse1"])
    assert rep.beltrami_verdict == "beltrami" and "chiral_perturbation" in rep.to_json()
    assert analyze_catalog_entry(cat["Morse0"]).chirality_verdict == "achiral-spherical"


def test_zero_on_sphere():
    with pytest.raises(ZeroOnSphere):
        numeric_index(PolyVectorField(x - 1, y, z))


@pytest.mark.parametrize("name", ["Morse1", "D4minus", "A3"])
def test_index_radius_invariance(name):
    grad = catalog_entry(name).phi.gradient()
    idx = {numeric_index(grad, radius=r).index for r in (0.5, 1.0, 2.0)}
    assert len(idx) == 1


_ROOTS = (-0.6, -0.15, 0.35, 0.8)


@settings(max_examples=15, deadline=None)
@given(st.lists(st.sampled_from(_ROOTS), min_size=1, max_size=3, unique=True),
       st.lists(st.sampled_from(_ROOTS), min_size=1, max_size=2, unique=True),
       st.lists(st.sampled_from(_ROOTS), min_size=1, max_size=2, unique=True))
def test_poincare_hopf_on_product_fields(rx, ry, rz):
    def factor(var, roots):
        out = Polynomial.const(1)
        for r in roots:
            out = out * (var - F(r).limit_denominator(100))
        return out

    V = PolyVectorField(factor(x, rx), factor(y, ry), factor(z, rz))
    # each coordinate contributes sum of sign p'(root) = 1 for odd counts, 0 for even
    expected = np.prod([len(r) % 2 for r in (rx, ry, rz)])
    assert numeric_index(V, radius=2.0).index == expected


@settings(max_examples=20, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 4), st.integers(0, 4), st.integers(0, 4),
                          st.integers(-9, 9)), min_size=1, max_size=5))
def test_laplacian_matches_finite_differences(terms):
    phi = Polynomial({(a, b, c): k for a, b, c, k in terms})
    lap = laplacian(phi).lambdify()
    f = phi.lambdify()
    rng = np.random.default_rng(len(terms))
    p = rng.uniform(-1, 1, size=(50, 3))
    h = 1e-3
    fd = -6 * f(*p.T)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd = fd + f(*(p + e).T) + f(*(p - e).T)
    fd /= h * h
    exact = np.broadcast_to(lap(*p.T), fd.shape)
    scale = np.maximum(1.0, np.abs(exact))
    assert np.all(np.abs(fd - exact) / scale < 1e-4)


def test_sympy_hessian_agrees():
    phi = P("x^2 y - y^3/3 + z^2/2 + 3 x z - y^2")
    s = oracles.to_sym(phi)
    H = sp.hessian(s, oracles.XYZ).subs({v: 0 for v in oracles.XYZ})
    assert hessian_at_origin(phi).matrix == tuple(tuple(F(int(v)) for v in row) for row in H.tolist())
