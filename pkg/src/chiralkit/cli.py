"""``chiralkit`` command line.

Every subcommand writes JSON (sorted keys, fixed float formatting) and any
CSV/OBJ exports into the output directory, then prints a one-line summary.
Exit codes: 0 pass, 1 error, 2 verdict failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ChiralkitError, ParseError

EXIT_PASS, EXIT_ERROR, EXIT_FAIL = 0, 1, 2
DEFAULT_OUT = "chiralkit-out"


class _Ctx:
    def __init__(self, args):
        self.out = Path(args.out)
        self.seed = args.seed
        self.threads = args.threads
        self.quiet = args.quiet
        self.out.mkdir(parents=True, exist_ok=True)

    def write_json(self, name: str, data) -> Path:
        path = self.out / name
        path.write_text(json.dumps(_plain(data), sort_keys=True, indent=2) + "\n")
        return path

    def say(self, msg: str) -> None:
        if not self.quiet:
            print(msg)


def _plain(obj):
    """JSON-ready copy with numpy scalars, fractions and non-finite floats normalised."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _number(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


def _point(text: str) -> tuple[float, float, float]:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z, got {text!r}")
    return tuple(float(Fraction(p)) if "/" in p else float(p) for p in parts)


# ---------------------------------------------------------------------------
# input resolution

def load_polynomial(source: str):
    """Catalog name, path to a JSON polynomial/0-form, or inline polynomial text."""
    from .germ import load_catalog
    from .polyform import DifferentialForm, Polynomial, parse_polynomial

    cat = load_catalog()
    if source in cat:
        return cat[source].phi, cat[source]
    path = Path(source)
    if source.endswith(".json") and path.exists():
        data = json.loads(path.read_text())
        if isinstance(data, dict) and "degree" in data:
            form = DifferentialForm.from_json(data)
            if form.degree != 0:
                raise ParseError(f"{source}: expected a function (degree 0 form), got degree {form.degree}")
            return form.components[0], None
        if isinstance(data, dict) and "phi" in data:
            return parse_polynomial(data["phi"]), None
        return Polynomial.from_json(data), None
    return parse_polynomial(source), None


def load_form(source: str):
    from .polyform import DifferentialForm, parse_polynomial

    path = Path(source)
    if path.exists():
        return DifferentialForm.from_json(json.loads(path.read_text()))
    parts = [p.strip() for p in source.split(",")]
    if len(parts) != 3:
        raise ParseError("a 1-form is given as a JSON file or as 'a, b, c' (coefficients of dx, dy, dz)")
    return DifferentialForm.one_form(*(parse_polynomial(p) for p in parts))


def load_vector(source: str):
    from .polyform import PolyVectorField, parse_polynomial

    parts = [p.strip() for p in source.split(",")]
    if len(parts) != 3:
        raise ParseError("a vector field is given as 'P, Q, R'")
    return PolyVectorField(*(parse_polynomial(p) for p in parts))


# ---------------------------------------------------------------------------
# commands

def cmd_analyze(args, ctx: _Ctx) -> int:
    from .germ import analyze_germ
    from .meshes import euler_characteristic
    from .surface import level_set_mesh

    phi, entry = load_polynomial(args.phi)
    radius = args.radius if args.radius is not None else (entry.index_radius if entry else None)
    report = analyze_germ(phi, entry.name if entry else args.phi, radius,
                          entry.perturbation if entry else None)
    data = report.to_json()
    status = EXIT_PASS
    if args.levelsets:
        k = report.numeric_index
        sets = {}
        for sign, label in ((1, "plus"), (-1, "minus")):
            mesh = level_set_mesh(phi, sign * args.level, args.ball_radius, args.resolution)
            chi = euler_characteristic(mesh)
            mesh.to_obj(ctx.out / f"levelset_{label}.obj")
            expected = None if k is None else 1 + sign * k
            sets[label] = {"c": sign * args.level, "euler_characteristic": chi, "expected": expected,
                           "n_vertices": mesh.used_vertex_count(), "n_faces": len(mesh.faces)}
            if expected is not None and chi != expected:
                status = EXIT_FAIL
        data["level_sets"] = sets
    ctx.write_json("report.json", data)
    ctx.say(f"{data['name']}: index {report.numeric_index}, corank {report.corank}, "
            f"{report.chirality_verdict}, {report.beltrami_verdict}")
    return status


def cmd_perturb(args, ctx: _Ctx) -> int:
    from .chirality import chiral_perturb, contact_defect, perturbed_form

    phi, _ = load_polynomial(args.phi)
    nu = chiral_perturb(phi)
    eta = perturbed_form(phi, nu, args.t)
    cd = contact_defect(eta)
    ctx.write_json("perturbation.json", {"phi": str(phi), "t": args.t, "nu": nu.to_json(), "nu_text": repr(nu),
                                         "eta": eta.to_json(), "defect": cd.to_json()})
    ctx.say(f"nu = {nu!r}; defect {cd.sign_verdict}")
    return EXIT_PASS if cd.one_signed else EXIT_FAIL


def cmd_series(args, ctx: _Ctx) -> int:
    from .chirality import beltrami_series

    phi, _ = load_polynomial(args.phi)
    residuals = []
    for K in range(1, args.K + 1):
        s = beltrami_series(phi, args.t, K)
        residuals.append(s.sup_residual(seed=ctx.seed))
    ok = s.check_recursion()
    ratios = [residuals[i] / residuals[i + 1] for i in range(len(residuals) - 1)]
    data = s.to_json()
    data.update({"sup_residuals": [float(f"{r:.6g}") for r in residuals],
                 "ratios": [float(f"{r:.6g}") for r in ratios], "recursion_exact": ok})
    ctx.write_json("series.json", data)
    ctx.say(f"K = {args.K}: residuals {' '.join(f'{r:.3g}' for r in residuals)}")
    return EXIT_PASS if ok and all(r >= args.min_ratio for r in ratios) else EXIT_FAIL


def cmd_check(args, ctx: _Ctx) -> int:
    from .chirality import contact_defect

    eta = load_form(args.eta)
    cd = contact_defect(eta)
    ctx.write_json("defect.json", cd.to_json())
    ctx.say(f"defect {cd.defect}: {cd.sign_verdict}")
    return EXIT_PASS if cd.one_signed else EXIT_FAIL


def cmd_metric(args, ctx: _Ctx) -> int:
    from .metriclab import random_ball_points, verify_compatible_metric_morse

    pts = random_ball_points(args.points, ctx.seed)
    rep = verify_compatible_metric_morse(float(args.t), pts, args.rel_tol, args.scale)
    ctx.write_json("metric.json", rep.to_json())
    ctx.say(f"t = {args.t}, scale {args.scale}: max relative error {rep.max_relative_error:.3g}, "
            f"{'PASS' if rep.passed else 'FAIL'}")
    return EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_abc(args, ctx: _Ctx) -> int:
    from .fields import abc_classify

    cl = abc_classify(args.A, args.B, args.C, grid=args.grid)
    data = cl.to_json()
    if args.connections and cl.zeros and not cl.zero_line_detected:
        from .fields import abc_field
        from .flow import detect_singular_connecting

        cons = detect_singular_connecting(abc_field(args.A, args.B, args.C),
                                          [z.location for z in cl.zeros], t_max=args.t_max)
        data["connections"] = [c.to_json() for c in cons]
    ctx.write_json("abc.json", data)
    ctx.say(f"ABC({args.A}, {args.B}, {args.C}): {len(cl.zeros)} zeros, {cl.regime}, {cl.tightness}")
    return EXIT_PASS


def cmd_lutz(args, ctx: _Ctx) -> int:
    from .fields import lutz_defect_closed_form, lutz_family, lutz_singular_points

    ev = lutz_family(args.s, args.t)
    rng = np.random.default_rng(ctx.seed)
    n = args.points
    r = np.sqrt(rng.random(n))
    a = rng.random(n) * 2 * math.pi
    pts = np.stack([r * np.cos(a), r * np.sin(a), rng.random(n) * 2 * math.pi], 1)
    got = ev.defect(pts)
    want = lutz_defect_closed_form(args.s, args.t, pts)
    err = float(np.max(np.abs(got - want) / np.maximum(1.0, np.abs(want))))
    zeros = lutz_singular_points(args.s)
    on_zero = [float(ev.defect(np.array([z]))[0]) for z in zeros]
    ok = err < 1e-12 and all(abs(v) < 1e-12 for v in on_zero)
    if args.t > 0:
        ok = ok and bool(np.all(got >= -1e-12))
    data = {"s": args.s, "t": args.t, "n_points": n, "defect_max_error": float(f"{err:.6g}"),
            "singular_points": [list(z) for z in zeros], "defect_at_singular_points": on_zero,
            "domain": ev.domain.to_json(), "passed": ok}
    if args.export_grid:
        m = args.export_grid
        g = np.linspace(-1, 1, m)
        zz = np.linspace(0, 2 * math.pi, m, endpoint=False)
        gx, gy, gz = np.meshgrid(g, g, zz, indexing="ij")
        P = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], 1)
        P = P[P[:, 0] ** 2 + P[:, 1] ** 2 <= 1.0]
        E = ev.value(P)
        W = ev.curl(P)
        D = np.einsum("ij,ij->i", E, W)
        with open(ctx.out / "lutz_grid.csv", "w") as fh:
            fh.write("x,y,z,ex,ey,ez,wx,wy,wz,defect\n")
            for row in np.hstack([P, E, W, D[:, None]]):
                fh.write(",".join(f"{v:.12g}" for v in row) + "\n")
        data["grid_points"] = int(len(P))
    ctx.write_json("lutz.json", data)
    ctx.say(f"Lutz s = {args.s}, t = {args.t}: {len(zeros)} singular points, defect error {err:.2g}, "
            f"{'PASS' if ok else 'FAIL'}")
    return EXIT_PASS if ok else EXIT_FAIL


def _divide_form(args):
    from .chirality import chiral_perturb, gradient_form
    from .germ import is_harmonic

    if args.eta:
        return load_form(args.eta)
    phi, entry = load_polynomial(args.phi)
    if entry is not None and entry.perturbation is not None:
        return gradient_form(phi) + entry.perturbation * args.t
    if is_harmonic(phi):
        return gradient_form(phi) + chiral_perturb(phi) * args.t
    raise ChiralkitError("no perturbation known for this germ; pass --eta")


def cmd_divide(args, ctx: _Ctx) -> int:
    from .surface import dividing_set

    eta = _divide_form(args)
    rep = dividing_set(eta, _point(args.center), args.radius, args.level)
    data = rep.to_json()
    data["eta"] = eta.to_json()
    ctx.write_json("dividing_set.json", data)
    ctx.say(f"{rep.component_count} dividing curve(s): {rep.giroux_verdict}")
    if args.expect is not None:
        return EXIT_PASS if rep.component_count == args.expect else EXIT_FAIL
    return EXIT_PASS


def cmd_surface(args, ctx: _Ctx) -> int:
    from .surface import reeb_tangency_check, surface_contact_construct

    X = load_vector(args.X)
    Y = load_vector(args.Y)
    sc = surface_contact_construct(X, Y)
    tang = reeb_tangency_check(sc.eta)
    data = sc.to_json()
    data["tangency"] = tang.to_json()
    ctx.write_json("surface.json", data)
    ctx.say(f"eta = {sc.eta!r}; identity {'holds' if sc.identity_holds else 'FAILS'}; "
            f"tangency {tang.max_normal_component:.2g}")
    return EXIT_PASS if sc.identity_holds and (tang.passed or not args.require_tangent) else EXIT_FAIL


def _trace_field(args):
    from .chirality import curl_field
    from .fields import abc_field, lutz_family

    if args.field == "abc":
        return abc_field(args.A, args.B, args.C)
    if args.field == "lutz":
        return lutz_family(args.s, args.t).reeb_like()
    if args.field == "vector":
        return load_vector(args.vector)
    if args.field == "reeb":
        return curl_field(load_form(args.eta))
    raise ChiralkitError(f"unknown field {args.field}")


def cmd_trace(args, ctx: _Ctx) -> int:
    from .flow import BACKEND, detect_periodic, detect_singular_connecting, integrate, trajectory_csv
    from .flow.orbits import default_seeds

    V = _trace_field(args)
    data = {"field": args.field, "backend": args.backend or BACKEND}
    if args.point:
        rec = integrate(V, _point(args.point), args.t_max, args.tol, normalize=args.normalize,
                        stride=args.stride, bound=args.bound, backend=args.backend)
        trajectory_csv(rec, ctx.out / "trajectory.csv")
        data["trajectory"] = rec.to_json()
    status = EXIT_PASS
    if args.periodic:
        seeds = [_point(args.point)] if args.point else None
        if seeds is None:
            kind = getattr(getattr(V, "domain", None), "kind", "R3")
            seeds = default_seeds(kind, args.n_seeds, ctx.seed)
        orbits = detect_periodic(V, seeds=seeds, t_max=args.t_max, threads=ctx.threads,
                                 backend=args.backend, bound=args.bound)
        data["periodic"] = [o.to_json() for o in orbits]
    if args.zeros:
        zeros = [_point(z) for z in args.zeros.split(";") if z.strip()]
        cons = detect_singular_connecting(V, zeros, t_max=args.t_max, backend=args.backend, bound=args.bound)
        data["connections"] = [c.to_json() for c in cons]
    ctx.write_json("orbits.json", data)
    summary = []
    if "periodic" in data:
        summary.append(f"{sum(o['verdict'] == 'periodic' for o in data['periodic'])} periodic orbit(s)")
    if "connections" in data:
        summary.append(f"{len(data['connections'])} connection(s)")
    if "trajectory" in data:
        summary.append(f"trajectory {data['trajectory']['stats']['status']}")
    ctx.say(", ".join(summary) or "nothing to do")
    return status


def cmd_accept(args, ctx: _Ctx) -> int:
    from .acceptance import run

    nums = [int(v) for v in args.only.split(",")] if args.only else None
    results = run(nums, echo=None if ctx.quiet else print)
    ctx.write_json("acceptance.json", [r.to_json() for r in results])
    return EXIT_PASS if all(r.passed for r in results) else EXIT_FAIL


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chiralkit", description=__doc__.splitlines()[0])
    p.add_argument("--out", default=os.environ.get("CHIRALKIT_OUT", DEFAULT_OUT),
                   help="output directory (default: $CHIRALKIT_OUT or ./chiralkit-out)")
    p.add_argument("--seed", type=int, default=0, help="seed for every randomized step")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--quiet", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="Hessian, index and verdicts for a germ at the origin")
    a.add_argument("phi", help="catalog name, polynomial JSON file or inline polynomial")
    a.add_argument("--radius", type=float)
    a.add_argument("--levelsets", action="store_true", help="also mesh phi = +-c and report Euler characteristics")
    a.add_argument("--level", type=float, default=0.01)
    a.add_argument("--ball-radius", type=float, default=1.0)
    a.add_argument("--resolution", type=int, default=128)
    a.set_defaults(func=cmd_analyze)

    a = sub.add_parser("perturb", help="chiral perturbation of a harmonic germ")
    a.add_argument("phi")
    a.add_argument("--t", type=_number, default=Fraction(1, 10))
    a.set_defaults(func=cmd_perturb)

    a = sub.add_parser("series", help="Beltrami power series and its residuals")
    a.add_argument("phi")
    a.add_argument("--t", type=_number, default=Fraction(1, 10))
    a.add_argument("--K", type=int, default=4)
    a.add_argument("--min-ratio", type=float, default=5.0)
    a.set_defaults(func=cmd_series)

    a = sub.add_parser("check", help="contact defect of a 1-form")
    a.add_argument("--eta", required=True, help="form JSON file or 'a, b, c'")
    a.set_defaults(func=cmd_check)

    a = sub.add_parser("metric", help="verify the explicit metric for the Morse normal form")
    a.add_argument("--t", type=_number, default=Fraction(1, 2))
    a.add_argument("--points", type=int, default=100)
    a.add_argument("--rel-tol", type=float, default=1e-8)
    a.add_argument("--scale", choices=("corrected", "uncorrected"), default="corrected")
    a.set_defaults(func=cmd_metric)

    a = sub.add_parser("abc", help="zeros and tightness of an ABC field")
    a.add_argument("--A", type=float, default=1.0)
    a.add_argument("--B", type=float, default=1.0)
    a.add_argument("--C", type=float, default=1.0)
    a.add_argument("--grid", type=int, default=16)
    a.add_argument("--connections", action="store_true")
    a.add_argument("--t-max", type=float, default=50.0)
    a.set_defaults(func=cmd_abc)

    a = sub.add_parser("lutz", help="singular Lutz twist family")
    a.add_argument("--s", type=float, default=0.0)
    a.add_argument("--t", type=float, default=1.0)
    a.add_argument("--points", type=int, default=10_000)
    a.add_argument("--export-grid", type=int, default=0, metavar="N")
    a.set_defaults(func=cmd_lutz)

    a = sub.add_parser("divide", help="dividing set on a sphere")
    g = a.add_mutually_exclusive_group(required=True)
    g.add_argument("--phi", help="germ; perturbed by its catalog or harmonic perturbation")
    g.add_argument("--eta", help="1-form JSON file or 'a, b, c'")
    a.add_argument("--t", type=_number, default=Fraction(1, 10))
    a.add_argument("--center", default="0,0,0")
    a.add_argument("--radius", type=float, default=0.5)
    a.add_argument("--level", type=int, default=5)
    a.add_argument("--expect", type=int)
    a.set_defaults(func=cmd_divide)

    a = sub.add_parser("surface", help="contact form near a surface from planar fields X, Y")
    a.add_argument("--X", required=True, help="'P, Q, 0'")
    a.add_argument("--Y", required=True)
    a.add_argument("--require-tangent", action="store_true")
    a.set_defaults(func=cmd_surface)

    a = sub.add_parser("trace", help="trajectories, periodic orbits and connections")
    a.add_argument("--field", choices=("abc", "lutz", "vector", "reeb"), required=True)
    a.add_argument("--A", type=float, default=1.0)
    a.add_argument("--B", type=float, default=1.0)
    a.add_argument("--C", type=float, default=1.0)
    a.add_argument("--s", type=float, default=0.0)
    a.add_argument("--t", type=float, default=1.0)
    a.add_argument("--vector", help="'P, Q, R' for --field vector")
    a.add_argument("--eta", help="1-form for --field reeb")
    a.add_argument("--point", help="seed x,y,z")
    a.add_argument("--t-max", type=float, default=500.0)
    a.add_argument("--tol", type=float, default=1e-10)
    a.add_argument("--stride", type=int, default=1)
    a.add_argument("--normalize", action="store_true")
    a.add_argument("--bound", type=float)
    a.add_argument("--periodic", action="store_true")
    a.add_argument("--n-seeds", type=int, default=200)
    a.add_argument("--zeros", help="'x,y,z; x,y,z' to search for connecting orbits")
    a.add_argument("--backend", choices=("compiled", "python"))
    a.set_defaults(func=cmd_trace)

    a = sub.add_parser("accept", help="run the acceptance criteria")
    a.add_argument("--only", help="comma-separated criterion numbers")
    a.set_defaults(func=cmd_accept)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        ctx = _Ctx(args)
        return args.func(args, ctx)
    except ParseError as exc:
        print(f"chiralkit: parse error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ChiralkitError, ValueError, OSError) as exc:
        print(f"chiralkit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
