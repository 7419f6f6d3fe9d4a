from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from chiralkit.chirality import chiral_perturb, gradient_form, perturbed_form
from chiralkit.errors import TransversalityFailure, ZeroOnSphere
from chiralkit.fields import tangent_boundary_example
from chiralkit.germ import catalog_entry
from chiralkit.meshes import disk_mesh, euler_characteristic, icosphere
from chiralkit.polyform import DifferentialForm, Polynomial, PolyVectorField, parse_polynomial as P
from chiralkit.surface import (
    dividing_set, level_set_euler, level_set_mesh, reeb_tangency_check, slab_semidefinite,
    surface_contact_construct,
)

x, y, z = Polynomial.variables()
MORSE = P("x^2/2 + y^2/2 - z^2")


def morse_eta(t):
    return DifferentialForm.one_form(x + t * y * z, y - t * x * z, -2 * z)


def test_mesh_basics():
    assert euler_characteristic(icosphere(3)) == 2
    assert euler_characteristic(disk_mesh()) == 1
    obj = icosphere(1).to_obj()
    assert obj.count("\nf ") + obj.startswith("f ") == icosphere(1).n_faces


def test_round_sphere_level_set():
    assert level_set_euler(x * x + y * y + z * z, 0.25, resolution=48) == 2


def test_morse_outside_level_set_connected():
    m = level_set_mesh(MORSE, 0.01, resolution=64)
    assert m.connected_components() == 1
    assert euler_characteristic(m) == 0  # annulus, 1 + k with k = -1


@pytest.mark.parametrize("name,k", [("Morse1", -1), ("Morse2", 1), ("D4minus", -2)])
def test_level_set_euler_formula(name, k):
    phi = catalog_entry(name).phi
    plus = level_set_euler(phi, 0.01, resolution=96)
    minus = level_set_euler(phi, -0.01, resolution=96)
    assert (plus, minus) == (1 + k, 1 - k)
    assert plus + minus == 2 and plus - minus == 2 * k


def test_level_set_stable_under_refinement():
    phi = catalog_entry("D4minus").phi
    assert level_set_euler(phi, -0.01, resolution=64) == level_set_euler(phi, -0.01, resolution=128)


def _radial(eta):
    f = eta.lambdify()
    return lambda p, n: np.einsum("ij,ij->i", f(p[:, 0], p[:, 1], p[:, 2]), n)


def test_dividing_set_morse():
    eta = morse_eta(Fraction(1, 10))
    rep = dividing_set(eta, radius=0.5)
    assert rep.component_count == 2 and rep.giroux_verdict == "overtwisted"
    assert oracles.sign_regions_on_sphere(_radial(eta)) == 3


def test_dividing_set_standard_form():
    eta = DifferentialForm.one_form(0, x, 1)
    for c in [(0, 0, 0), (0.4, -1.0, 2.0)]:
        rep = dividing_set(eta, center=c, radius=0.5)
        assert rep.component_count == 1 and rep.giroux_verdict == "tight-neighborhood"


def test_dividing_set_d4():
    e = catalog_entry("D4minus")
    eta = gradient_form(e.phi) + e.perturbation / 10
    rep = dividing_set(eta, radius=0.5)
    assert rep.component_count == 3 and rep.giroux_verdict == "overtwisted"
    # finer lat-long sign regions: three curves split the sphere into four pieces
    assert oracles.sign_regions_on_sphere(_radial(eta)) == 4


def test_dividing_set_zero_on_sphere():
    with pytest.raises(ZeroOnSphere):
        dividing_set(DifferentialForm.one_form(x - Fraction(1, 2), y, z), radius=0.5)


def test_surface_construction_reproduces_normal_form():
    sc = surface_contact_construct(PolyVectorField(y, -x, 0), PolyVectorField(x, y, 0))
    assert sc.eta == DifferentialForm.one_form(x + y * z, y - x * z, -2 * z)
    assert sc.identity_holds
    assert slab_semidefinite(sc) == "positive-semidefinite"


def test_surface_construction_source_field():
    sc = surface_contact_construct(PolyVectorField(x, y, 0), PolyVectorField(0, 0, 0))
    assert sc.eta == DifferentialForm.one_form(-y, x, 2)
    assert sc.identity_holds
    rep = reeb_tangency_check(sc.eta)
    assert not rep.passed and rep.worst_point is not None


def test_surface_construction_rejects_bad_pair():
    with pytest.raises(TransversalityFailure):
        surface_contact_construct(PolyVectorField(y, -x, 0), PolyVectorField(-x, -y, 0))


def test_tangency_divergence_free():
    sc = surface_contact_construct(PolyVectorField(y, -x, 0), PolyVectorField(x, y, 0))
    rep = reeb_tangency_check(sc.eta)
    assert rep.passed and rep.max_normal_component < 1e-8


def test_tangent_boundary_plane_field():
    rep = reeb_tangency_check(tangent_boundary_example(), extent=((0, 6), (0, 6)))
    assert rep.plane_tangency < 1e-12


@settings(max_examples=15, deadline=None)
@given(st.fractions(Fraction(1, 5), 3, max_denominator=10),
       st.fractions(Fraction(1, 5), 3, max_denominator=10))
def test_rotation_source_pairs(a, b):
    # X a divergence-free rotation, Y a source
    X = PolyVectorField(y * a, -x * a, 0)
    Y = PolyVectorField(x * b, y * b, 0)
    sc = surface_contact_construct(X, Y)
    assert sc.identity_holds
    assert slab_semidefinite(sc) == "positive-semidefinite"
    assert reeb_tangency_check(sc.eta).passed


@settings(max_examples=10, deadline=None)
@given(st.fractions(Fraction(1, 20), Fraction(1, 2), max_denominator=20))
def test_morse_dividing_count_independent_of_t(t):
    assert dividing_set(perturbed_form(MORSE, chiral_perturb(MORSE), t), radius=0.5).component_count == 2
