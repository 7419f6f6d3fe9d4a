import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chiralkit.fields import (
    abc_classify, abc_field, lutz_defect_closed_form, lutz_family, lutz_h_determinant,
    lutz_h_profile, lutz_singular_points, tangent_boundary_example,
)
from chiralkit.germ import numeric_index

TWO_PI = 2 * math.pi


def abc_by_hand(A, B, C, p):
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    return np.stack([A * np.sin(z) + C * np.cos(y), B * np.sin(x) + A * np.cos(z),
                     C * np.sin(y) + B * np.cos(x)], 1)


def abc_curl_by_hand(A, B, C, p):
    # d/dy of third minus d/dz of second, etc., differentiated by hand
    x, y, z = p[:, 0], p[:, 1], p[:, 2]
    return np.stack([C * np.cos(y) + A * np.sin(z), A * np.cos(z) + B * np.sin(x),
                     B * np.cos(x) + C * np.sin(y)], 1)


def test_single_mode_abc():
    ev = abc_field(1, 0, 0)
    p = np.random.default_rng(0).uniform(0, TWO_PI, (500, 3))
    v = ev.value(p)
    assert np.allclose(np.linalg.norm(v, axis=1), 1.0, atol=1e-15)
    assert np.allclose(v, np.stack([np.sin(p[:, 2]), np.cos(p[:, 2]), 0 * p[:, 0]], 1))
    assert abc_classify(1, 0, 0).zeros == []


def test_abc_curl_random_parameters():
    rng = np.random.default_rng(5)
    for _ in range(20):
        A, B, C = rng.uniform(0, 2, 3)
        ev = abc_field(A, B, C)
        p = rng.uniform(0, TWO_PI, (1000, 3))
        assert np.max(np.abs(ev.curl(p) - abc_curl_by_hand(A, B, C, p))) < 1e-12
        assert np.max(np.abs(ev.curl(p) - ev.value(p))) < 1e-12
        assert np.max(np.abs(ev.value(p) - abc_by_hand(A, B, C, p))) < 1e-12
        assert np.max(np.abs(ev.divergence(p))) < 1e-12


def test_abc_regimes():
    c = math.sqrt(0.25)
    cl = abc_classify(1, c, c)
    assert cl.regime == "nonsingular" and cl.tightness == "tight"
    cl = abc_classify(1, 1, 0)
    assert cl.regime == "degenerate-boundary" and cl.tightness == "tight"
    assert all(z.index == 0 for z in cl.zeros) and cl.zero_line_detected
    cl = abc_classify(1, 0.8, 0.8)
    assert cl.regime == "singular" and cl.tightness == "overtwisted"
    assert cl.zeros and {z.morse_index for z in cl.zeros} <= {1, 2}
    assert cl.index_sum == 0


def test_abc_equal_parameters_have_morse_zeros():
    cl = abc_classify(1, 1, 1)
    assert len(cl.zeros) == 8
    for z in cl.zeros:
        assert not z.degenerate and z.morse_index in (1, 2)
        ev = abc_field(1, 1, 1)
        assert np.linalg.norm(ev.value(np.array(z.location))) < 1e-10
    assert cl.index_sum == 0


@pytest.mark.parametrize("b", [0.9, 1.0, 1.1])
def test_abc_zero_transition(b):
    c = b / math.sqrt(2)  # B = C with B^2 + C^2 = b^2
    cl = abc_classify(1, c, c)
    if b < 1:
        assert not cl.zeros
    else:
        assert cl.zeros
    assert cl.tightness == ("tight" if b <= 1 else "overtwisted")


def test_abc_zero_indices_match_quadrature():
    cl = abc_classify(1, 0.8, 0.8)
    ev = abc_field(1, 0.8, 0.8)
    for z in cl.zeros[:4]:
        assert numeric_index(ev, center=z.location, radius=0.05).index == z.index


def test_lutz_singular_points():
    assert lutz_singular_points(1) == []
    pts = lutz_singular_points(0)
    assert len(pts) == 2
    assert {round(p[2], 12) for p in pts} == {round(math.pi / 2, 12), round(3 * math.pi / 2, 12)}
    ev = lutz_family(0, 1)
    for p in pts:
        assert np.linalg.norm(ev.value(np.array(p))) < 1e-15


def test_fold_unfolding_counts():
    counts = []
    for s in np.round(np.arange(1, -1.0001, -0.05), 10):
        counts.append(len(lutz_singular_points(s)))
    # collapse runs
    runs = [counts[0]] + [c for a, c in zip(counts, counts[1:]) if c != a]
    assert runs == [0, 1, 2, 1, 0]
    assert len(lutz_singular_points(0.5)) == 1 and lutz_singular_points(0.5)[0][2] == 0.0


def test_lutz_defect_closed_form():
    rng = np.random.default_rng(2)
    p = np.concatenate([rng.uniform(-1, 1, (10_000, 2)), rng.uniform(0, TWO_PI, (10_000, 1))], 1)
    for s in (-1, -0.5, 0, 0.5, 1):
        for t in (0.5, 1, 2):
            ev = lutz_family(s, t)
            assert np.max(np.abs(ev.defect(p) - lutz_defect_closed_form(s, t, p))) < 1e-12


def test_lutz_defect_sign():
    rng = np.random.default_rng(3)
    p = np.concatenate([rng.uniform(-1, 1, (5000, 2)), rng.uniform(0, TWO_PI, (5000, 1))], 1)
    for s in (-1, -0.3, 0, 0.5):
        ev = lutz_family(s, 1)
        assert np.all(ev.defect(p) > 0)
        for q in lutz_singular_points(s):
            assert abs(ev.defect(np.array(q))) < 1e-30


def test_h_profile_endpoints():
    r = 0.01
    h1, h2 = lutz_h_profile(r)
    assert h1 == pytest.approx(-1, abs=1e-15) and h2 == pytest.approx(-r * r, abs=1e-15)
    r = 0.99
    h1, h2 = lutz_h_profile(r)
    assert h1 == pytest.approx(1, abs=1e-15) and h2 == pytest.approx(r * r, abs=1e-15)
    grid = np.linspace(0, 1, 2001)[1:-1]
    assert np.all(lutz_h_determinant(grid) > 0)


def test_tangent_boundary_example():
    ev = tangent_boundary_example()
    assert np.allclose(ev.value(np.array([0.3, 0.2, 0.0])), [0, 0, 1])
    z = np.linspace(0.1, 1, 50)
    p = np.stack([np.zeros_like(z), np.zeros_like(z), z], 1)
    # eta . curl eta = -sin(z)^2, derived by hand
    assert np.allclose(ev.defect(p), -np.sin(z) ** 2, atol=1e-14)
    assert np.all(ev.defect(p) < 0)


def test_csv_export(tmp_path):
    ev = abc_field(1, 1, 1)
    text = ev.to_csv(3, path=tmp_path / "abc.csv")
    lines = (tmp_path / "abc.csv").read_text().splitlines()
    assert lines[0] == "x,y,z,vx,vy,vz" and len(lines) == 28
    assert text.splitlines() == lines
    assert lutz_family(0, 1).to_csv(2).splitlines()[0] == "x,y,z,ex,ey,ez"


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 1), st.floats(0, 1))
def test_abc_index_sum_zero(b, frac):
    A, B, C = 1.0, b, b * frac
    cl = abc_classify(A, B, C, grid=12)
    if cl.zero_line_detected:
        return
    assert cl.index_sum == 0
