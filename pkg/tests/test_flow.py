import csv
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from chiralkit.chirality import chiral_perturb, curl_field, gradient_form, perturbed_form
from chiralkit.fields import abc_classify, abc_field, lutz_family, lutz_singular_points
from chiralkit.flow import (
    available_backends, detect_periodic, detect_singular_connecting, integrate, trajectory_csv,
)
from chiralkit.flow.orbits import closure_residual_fixed_step
from chiralkit.polyform import PolyVectorField, parse_polynomial as P

BACKENDS = available_backends()
# harmonic, with nondegenerate critical points at (+-1/2, 0, 0)
TWO_SADDLES = P("x^3/3 - x y^2/2 - x z^2/2 - x/4")


def core_period(s, t):
    # on the core z' = 2 t (s - cos z / 2); integrate dz over one turn
    return 2 * math.pi / (t * math.sqrt(4 * s * s - 1))


@pytest.mark.parametrize("backend", BACKENDS)
def test_abc_single_mode_straight_line(backend):
    rec = integrate(abc_field(1, 0, 0), (0, 0, math.pi / 2), t_max=25, backend=backend)
    v = np.diff(rec.trajectory, axis=0)
    assert np.allclose(rec.trajectory[:, 1:], [0, math.pi / 2], atol=1e-12)
    assert np.all(v[:, 0] > 0)
    assert rec.trajectory[-1, 0] == pytest.approx(25, abs=1e-9)  # |V| = 1


def test_backends_agree():
    if len(BACKENDS) < 2:
        pytest.skip("compiled kernel not built")
    field = abc_field(1, 0.8, 0.6)
    a = integrate(field, (0.1, 0.2, 0.3), t_max=20, backend="compiled")
    b = integrate(field, (0.1, 0.2, 0.3), t_max=20, backend="python")
    assert a.trajectory.shape == b.trajectory.shape
    # same step sequence; only libm rounding differs, amplified by the chaotic flow
    assert np.max(np.abs(a.trajectory - b.trajectory)) < 1e-7


@pytest.mark.parametrize("s,t", [(-1, 1), (-1, 0.5), (0.8, 1)])
def test_lutz_core_orbit(s, t):
    orbits = detect_periodic(lutz_family(s, t).reeb_like(), seeds=[(0, 0, 1)], t_max=50)
    per = [o for o in orbits if o.verdict == "periodic"]
    assert len(per) == 1
    assert per[0].period == pytest.approx(core_period(s, t), rel=1e-8)
    assert per[0].closure_residual < 1e-6
    assert np.allclose(per[0].trajectory[:, :2], 0, atol=1e-9)


def test_lutz_s0_has_no_core_orbit_but_two_connections():
    W = lutz_family(0, 1).reeb_like()
    orbits = detect_periodic(W, seeds=[(0, 0, 1)], t_max=50)
    assert not [o for o in orbits if o.verdict == "periodic"]
    cons = detect_singular_connecting(W, lutz_singular_points(0), t_max=50)
    pairs = sorted((c.backward_limit, c.forward_limit) for c in cons)
    assert len(cons) == 2 and all(set(p) == {0, 1} for p in pairs)


def test_gradient_flow_is_monotone():
    phi = P("x^2 + 2 y^2 - z^2 + x y z")
    grad = phi.gradient()
    rec = integrate(grad, (0.3, 0.2, 0.05), t_max=3)
    f = phi.lambdify()
    vals = f(*rec.trajectory.T)
    assert np.all(np.diff(vals) >= -1e-12)


def test_connection_between_two_zeros():
    phi = TWO_SADDLES
    eta = perturbed_form(phi, chiral_perturb(phi), Fraction(1, 10))
    R = curl_field(eta)
    zeros = [(-0.5, 0, 0), (0.5, 0, 0)]
    # speeds scale with t = 1/10, so escaping and approaching each take ~90 time units
    cons = detect_singular_connecting(R, zeros, t_max=400, bound=2.0)
    assert any({c.backward_limit, c.forward_limit} == {0, 1} for c in cons)
    # the unperturbed gradient connects the same pair along the x axis
    # x' = x^2 - 1/4 < 0 between them, so it runs from (1/2, 0, 0) to (-1/2, 0, 0)
    g = integrate(phi.gradient(), (0.5 - 1e-3, 0, 0), t_max=100, stop_points=zeros, bound=2.0)
    assert g.forward_limit == 0
    assert any((c.backward_limit, c.forward_limit) == (1, 0) for c in cons)


def test_fixed_step_order():
    W = lutz_family(-1, 1).reeb_like()
    T = core_period(-1, 1)
    res = [closure_residual_fixed_step(W, (0, 0, 1), T, n) for n in (20, 40, 80)]
    assert res[0] / res[1] >= 4 and res[1] / res[2] >= 4


def test_abc_divergence_along_trajectory():
    ev = abc_field(1, 0.7, 0.4)
    rec = integrate(ev, (1.0, 2.0, 3.0), t_max=50)
    assert np.max(np.abs(ev.divergence(rec.trajectory))) < 1e-10


def test_stop_points_and_bounds():
    V = PolyVectorField(P("-x"), P("-y"), P("-z"))
    rec = integrate(V, (1, 1, 1), t_max=100, stop_points=[(0, 0, 0)], stop_radius=1e-3)
    assert rec.forward_limit == 0 and rec.forward_distance < 1e-3
    out = integrate(V, (1, 1, 1), t_max=100, direction=-1, bound=10)
    assert out.verdict == "escaping"


def test_no_periodic_orbits_for_gradient():
    orbits = detect_periodic(P("x^2/2 + y^2/2 - z^2").gradient(), n_seeds=40, t_max=20, bound=3.0)
    assert not [o for o in orbits if o.verdict == "periodic"]


def test_abc_connections_two_sided():
    cl = abc_classify(1, 0.8, 0.8)
    cons = detect_singular_connecting(abc_field(1, 0.8, 0.8), [z.location for z in cl.zeros], t_max=50)
    assert cons
    for c in cons:
        assert c.forward_limit is not None and c.backward_limit is not None
        assert c.forward_distance <= 1e-4 and c.backward_distance <= 1e-4


def test_export(tmp_path):
    rec = integrate(abc_field(1, 1, 1), (0.1, 0.2, 0.3), t_max=2)
    trajectory_csv(rec, tmp_path / "t.csv")
    rows = list(csv.reader((tmp_path / "t.csv").open()))
    assert rows[0] == ["t", "x", "y", "z"] and len(rows) == len(rec.times) + 1
    data = json.loads(json.dumps(rec.to_json()))
    assert data["verdict"] == "inconclusive" and data["stats"]["status"] == "completed"


def test_no_zeros_no_connections():
    c = 0.5 / math.sqrt(2)
    cl = abc_classify(1, c, c)
    assert cl.zeros == []
    assert detect_singular_connecting(abc_field(1, c, c), [], t_max=10) == []
