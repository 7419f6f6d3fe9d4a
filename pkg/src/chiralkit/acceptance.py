"""The eleven end-to-end acceptance checks, runnable from tests and the CLI."""
from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable

import numpy as np

from . import chirality, fields, germ, metriclab, polyform, surface
from .flow import detect_periodic, detect_singular_connecting
from .polyform import (
    DifferentialForm,
    PolyVectorField,
    ext_d,
    hodge_euclid,
    parse_polynomial,
    poincare_homotopy,
    random_form,
    wedge,
)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number:2d}: {self.title} ({self.seconds:.1f}s)"

    def to_json(self) -> dict:
        # no timings: reports must be byte-identical across runs
        return {"number": self.number, "title": self.title, "passed": self.passed, "details": self.details}


def _g(v: float) -> float:
    return float(f"{v:.6g}")


# ---------------------------------------------------------------------------

def exact_algebra(n: int = 1000, seed: int = 0) -> CriterionResult:
    rng = np.random.default_rng(seed)
    fails = {"d_squared": 0, "leibniz": 0, "star_star": 0, "homotopy": 0}
    for i in range(n):
        k = i % 3
        a = random_form(rng, k, max_degree=5, max_coef=1000)
        b = random_form(rng, 1 if k < 2 else 0, max_degree=5, max_coef=1000)
        if k < 2 and not ext_d(ext_d(a)).is_zero():
            fails["d_squared"] += 1
        lhs = ext_d(wedge(a, b))
        rhs = wedge(ext_d(a), b) + wedge(a, ext_d(b)) * (-1) ** k
        if lhs != rhs:
            fails["leibniz"] += 1
        if hodge_euclid(hodge_euclid(a)) != a:
            fails["star_star"] += 1
        closed = ext_d(random_form(rng, k, max_degree=5, max_coef=1000))
        if ext_d(poincare_homotopy(closed)) != closed:
            fails["homotopy"] += 1
    return CriterionResult(1, "exact-algebra identities", not any(fails.values()),
                           {"n_forms": n, "failures": fails})


def morse_normal_form(n_points: int = 100, seed: int = 0) -> CriterionResult:
    phi = parse_polynomial("x^2/2 + y^2/2 - z^2")
    x, y, z = polyform.Polynomial.variables()
    nu = chirality.chiral_perturb(phi)
    nu_ok = nu == DifferentialForm.one_form(y * z, -x * z, polyform.Polynomial())
    t = Fraction(1, 3)
    eta = chirality.perturbed_form(phi, nu, t)
    defect_ok = chirality.defect_polynomial(eta) == (x * x + y * y + z * z * 4) * t
    pts = metriclab.random_ball_points(n_points, seed)
    reports = {str(tt): metriclab.verify_compatible_metric_morse(tt, pts, 1e-8) for tt in (0.1, 0.5, 1.0)}
    metric_ok = all(r.passed for r in reports.values())
    return CriterionResult(2, "Morse normal form: perturbation, defect, metric", nu_ok and defect_ok and metric_ok, {
        "nu": repr(nu), "nu_exact": nu_ok, "defect_exact": defect_ok,
        "metric_max_relative_error": {k: _g(r.max_relative_error) for k, r in reports.items()},
    })


def d4_reproduction() -> CriterionResult:
    entry = germ.catalog_entry("D4minus")
    eta = chirality.gradient_form(entry.phi) + entry.perturbation * Fraction(1, 10)
    cd = chirality.contact_defect(eta)
    h = germ.hessian_at_origin(entry.phi)
    idx = germ.numeric_index(entry.phi, radius=entry.index_radius)
    ok = (cd.sign_verdict == "positive-semidefinite" and h.corank == 2 and h.trace == 1
          and idx.index == -2 and idx.residual < 0.05)
    return CriterionResult(3, "D4- defect, corank, trace, index", ok, {
        "defect_verdict": cd.sign_verdict, "defect_certified": cd.certified,
        "sample_min": None if cd.sample_min is None else _g(cd.sample_min),
        "corank": h.corank, "trace": str(h.trace), "index": idx.index, "residual": _g(idx.residual),
    })


def index_suite() -> CriterionResult:
    details = {}
    ok = True
    for sx in (1, -1):
        for sy in (1, -1):
            for sz in (1, -1):
                phi = parse_polynomial(f"{sx}*x^2 + {sy}*y^2 + {sz}*z^2")
                r = germ.numeric_index(phi)
                want = sx * sy * sz
                ok &= r.index == want and r.residual < 0.05
                details[f"morse({sx:+d},{sy:+d},{sz:+d})"] = [r.index, _g(r.residual)]
    for name, want in (("D4minus", -2), ("T444", -3)):
        e = germ.catalog_entry(name)
        r = germ.numeric_index(e.phi, radius=e.index_radius)
        pre = germ.preimage_degree(e.phi, radius=e.index_radius)
        agree = all(c == want for c in pre)
        ok &= r.index == want and r.residual < 0.05 and agree
        details[name] = {"index": r.index, "residual": _g(r.residual), "preimage_counts": pre}
    return CriterionResult(4, "index suite with preimage oracle", bool(ok), details)


def level_set_topology(resolutions=(128, 256)) -> CriterionResult:
    details = {}
    ok = True
    for name in ("Morse2", "Morse1", "D4minus"):
        e = germ.catalog_entry(name)
        k = e.expected_index
        for c in (0.01, -0.01):
            # F_+ = {phi = +c} carries chi = 1 + k, F_- = {phi = -c} carries 1 - k
            want = 1 + k if c > 0 else 1 - k
            chis = [surface.level_set_euler(e.phi, c, 1.0, n) for n in resolutions]
            ok &= all(x == want for x in chis)
            details[f"{name} c={c:+}"] = {"k": k, "expected": want, "chi": chis}
    return CriterionResult(5, "level-set Euler characteristics", bool(ok), details)


def beltrami_convergence(seed: int = 0) -> CriterionResult:
    phi = parse_polynomial("x^2/2 + y^2/2 - z^2")
    res = []
    exact = True
    for K in range(1, 5):
        s = chirality.beltrami_series(phi, Fraction(1, 10), K)
        exact &= s.check_recursion()
        res.append(s.sup_residual(seed=seed))
    ratios = [res[i] / res[i + 1] for i in range(len(res) - 1)]
    ok = exact and all(r >= 5 for r in ratios)
    return CriterionResult(6, "Beltrami series convergence", bool(ok), {
        "sup_residuals": [_g(r) for r in res], "ratios": [_g(r) for r in ratios], "recursion_exact": exact,
    })


def abc_suite(n_points: int = 10_000, seed: int = 0) -> CriterionResult:
    rng = np.random.default_rng(seed)
    pts = rng.random((n_points, 3)) * 2 * math.pi
    curl_err = 0.0
    for A, B, C in ((1, 1, 1), (1, 0.8, 0.8), (0.3, 1.2, 0.7)):
        V = fields.abc_field(A, B, C)
        curl_err = max(curl_err, float(np.abs(V.curl(pts) - V.value(pts)).max()))
    counts = {}
    tight_ok = True
    for s2 in (0.9, 1.0, 1.1):
        b = math.sqrt(s2 / 2)
        cl = fields.abc_classify(1.0, b, b)
        counts[str(s2)] = len(cl.zeros)
        tight_ok &= (cl.tightness == "tight") == (s2 <= 1)
    transition = counts["0.9"] == 0 and counts["1.0"] > 0 and counts["1.1"] > 0
    cl = fields.abc_classify(1.0, 0.8, 0.8)
    morse = sorted({z.morse_index for z in cl.zeros})
    ok = (curl_err < 1e-12 and transition and tight_ok and set(morse) <= {1, 2} and cl.zeros
          and cl.index_sum == 0 and cl.tightness == "overtwisted")
    return CriterionResult(7, "ABC curl, zeros, classification", bool(ok), {
        "curl_max_error": _g(curl_err), "zero_counts": counts, "tightness_ok": tight_ok,
        "morse_indices_0.8": morse, "index_sum_0.8": cl.index_sum, "regime_0.8": cl.regime,
    })


def lutz_suite(n_points: int = 10_000, seed: int = 0) -> CriterionResult:
    rng = np.random.default_rng(seed)
    r = np.sqrt(rng.random(n_points))
    a = rng.random(n_points) * 2 * math.pi
    pts = np.stack([r * np.cos(a), r * np.sin(a), rng.random(n_points) * 2 * math.pi], 1)
    worst = 0.0
    for s in (-1.0, -0.5, 0.0, 0.5, 1.0):
        for t in (0.5, 1.0, 2.0):
            ev = fields.lutz_family(s, t)
            got = ev.defect(pts)
            want = fields.lutz_defect_closed_form(s, t, pts)
            worst = max(worst, float(np.max(np.abs(got - want) / np.maximum(1.0, np.abs(want)))))
    # zeros of the form on the core x = y = 0, located numerically
    zs = np.linspace(0, 2 * math.pi, 20001)[:-1]
    counts = {}
    for s in (-0.75, -0.5, 0.0, 0.5, 0.75):
        eta = np.abs(fields.lutz_family(s, 1.0).value(np.stack([0 * zs, 0 * zs, zs], 1))[:, 2])
        prev, nxt = np.roll(eta, 1), np.roll(eta, -1)
        numeric = int(np.sum((eta <= prev) & (eta < nxt) & (eta < 1e-3)))
        counts[str(s)] = [numeric, len(fields.lutz_singular_points(s))]
    count_ok = [c[0] for c in counts.values()] == [0, 1, 2, 1, 0] and all(c[0] == c[1] for c in counts.values())

    W = fields.lutz_family(-1.0, 1.0).reeb_like()
    per = [o for o in detect_periodic(W) if o.verdict == "periodic"]
    core = [o for o in per if np.max(np.hypot(o.trajectory[:, 0], o.trajectory[:, 1])) < 1e-6]
    core_ok = bool(core) and core[0].closure_residual < 1e-6
    W0 = fields.lutz_family(0.0, 1.0).reeb_like()
    per0 = [o for o in detect_periodic(W0) if o.verdict == "periodic"]
    core0 = [o for o in per0 if np.max(np.hypot(o.trajectory[:, 0], o.trajectory[:, 1])) < 1e-3]
    cons = detect_singular_connecting(W0, fields.lutz_singular_points(0.0))
    ok = worst < 1e-12 and count_ok and core_ok and not core0 and len(cons) == 2
    return CriterionResult(8, "singular Lutz twist suite", bool(ok), {
        "defect_max_error": _g(worst), "zero_counts_numeric_vs_closed": counts,
        "core_orbit_s=-1": None if not core else {"period": _g(core[0].period),
                                                 "closure_residual": _g(core[0].closure_residual)},
        "core_orbits_s=0": len(core0), "connections_s=0": len(cons),
        "connection_limits": [[c.backward_limit, c.forward_limit] for c in cons],
    })


def dividing_sets() -> CriterionResult:
    t = Fraction(1, 10)
    morse = parse_polynomial("x^2/2 + y^2/2 - z^2")
    eta_m = chirality.perturbed_form(morse, chirality.chiral_perturb(morse), t)
    d4 = germ.catalog_entry("D4minus")
    eta_d = chirality.gradient_form(d4.phi) + d4.perturbation * t
    x, y, z = polyform.Polynomial.variables()
    zero = polyform.Polynomial()
    std = DifferentialForm.one_form(zero, x, polyform.Polynomial.const(1))
    rm = surface.dividing_set(eta_m)
    rd = surface.dividing_set(eta_d)
    rs = surface.dividing_set(std)
    ok = (rm.component_count == 2 and rd.component_count == 3 and rs.component_count == 1
          and rm.giroux_verdict == "overtwisted" and rd.giroux_verdict == "overtwisted"
          and rs.giroux_verdict == "tight-neighborhood")
    return CriterionResult(9, "dividing sets and Giroux verdicts", bool(ok), {
        "morse": [rm.component_count, rm.giroux_verdict],
        "d4minus": [rd.component_count, rd.giroux_verdict],
        "standard": [rs.component_count, rs.giroux_verdict],
    })


def surface_construction() -> CriterionResult:
    x, y, z = polyform.Polynomial.variables()
    zero = polyform.Polynomial()
    X = PolyVectorField(y, -x, zero)
    Y = PolyVectorField(x, y, zero)
    sc = surface.surface_contact_construct(X, Y)
    target = DifferentialForm.one_form(x + y * z, y - x * z, z * -2)
    normal_ok = sc.eta == target
    # X is divergence-free, so the Reeb-like field is tangent to z = 0
    tang = surface.reeb_tangency_check(sc.eta)
    ok = normal_ok and sc.identity_holds and tang.passed
    return CriterionResult(10, "surface-neighbourhood construction", bool(ok), {
        "eta": repr(sc.eta), "normal_form_exact": normal_ok, "identity_exact": sc.identity_holds,
        "tangency_max": _g(tang.max_normal_component),
    })


def determinism() -> CriterionResult:
    from .cli import main

    runs = (
        ["abc", "--A", "1", "--B", "0.8", "--C", "0.8"],
        ["lutz", "--s", "0", "--t", "1", "--export-grid", "8"],
        ["metric", "--t", "0.5", "--points", "50"],
        ["analyze", "D4minus"],
        ["trace", "--field", "lutz", "--s", "-1", "--t", "1", "--point", "0,0,1", "--t-max", "20",
         "--periodic"],
    )
    same = {}
    with tempfile.TemporaryDirectory() as tmp:
        for i, argv in enumerate(runs):
            outs = []
            for rep in range(2):
                d = Path(tmp) / f"{i}-{rep}"
                main(["--out", str(d), "--seed", "7", "--quiet", *argv])
                outs.append({p.name: p.read_bytes() for p in sorted(d.iterdir())})
            same[argv[0]] = bool(outs[0]) and outs[0] == outs[1]
    return CriterionResult(11, "byte-identical CLI outputs", all(same.values()), {"identical": same})


CRITERIA: dict[int, Callable[[], CriterionResult]] = {
    1: exact_algebra,
    2: morse_normal_form,
    3: d4_reproduction,
    4: index_suite,
    5: level_set_topology,
    6: beltrami_convergence,
    7: abc_suite,
    8: lutz_suite,
    9: dividing_sets,
    10: surface_construction,
    11: determinism,
}


def run(numbers=None, echo: Callable[[str], None] | None = print) -> list[CriterionResult]:
    out = []
    for n in numbers or sorted(CRITERIA):
        t0 = time.perf_counter()
        try:
            r = CRITERIA[n]()
        except Exception as exc:  # a crash is a failed criterion, reported as such
            r = CriterionResult(n, CRITERIA[n].__name__, False, {"error": f"{type(exc).__name__}: {exc}"})
        r.seconds = time.perf_counter() - t0
        if echo:
            echo(r.line())
        out.append(r)
    return out


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(0 if all(r.passed for r in run()) else 2)
