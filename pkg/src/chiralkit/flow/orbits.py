"""Trajectories, periodic orbits and zero-to-zero connections."""
from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree
from scipy.stats import qmc

from ..polyform import PolyVectorField
from . import _pykernels as pk
from ._backend import get_kernel

STATUS_NAMES = {
    pk.STATUS_DONE: "completed",
    pk.STATUS_UNDERFLOW: "step-underflow",
    pk.STATUS_MAX_STEPS: "max-steps",
    pk.STATUS_STOP_POINT: "reached-zero",
    pk.STATUS_OUT_OF_BOUNDS: "left-domain",
    pk.STATUS_HITS: "section-hits",
}


# ---------------------------------------------------------------------------
# field adapters

@dataclass
class _KernelField:
    kind: int
    params: np.ndarray
    pexp: np.ndarray
    pcoef: np.ndarray
    pcomp: np.ndarray
    periods: np.ndarray
    bound_kind: int
    bound: float
    value: Callable
    jacobian: Callable
    callback: Optional[Callable] = None


def _poly_arrays(V: PolyVectorField):
    exps, coefs, comps = [], [], []
    for k, p in enumerate(V.components):
        for e in p.sorted_exponents():
            exps.append(e)
            coefs.append(float(p.terms[e]))
            comps.append(k)
    return (np.array(exps, dtype=np.int64).reshape(-1, 3), np.array(coefs, dtype=float),
            np.array(comps, dtype=np.int64))


def as_kernel_field(field, bound: Optional[float] = None) -> _KernelField:
    empty = (np.zeros((0, 3), dtype=np.int64), np.zeros(0), np.zeros(0, dtype=np.int64))
    if isinstance(field, PolyVectorField):
        f = field.lambdify()
        j = field.lambdify_jacobian()
        exps, coefs, comps = _poly_arrays(field)
        return _KernelField(pk.KIND_POLY, np.zeros(3), exps, coefs, comps, np.zeros(3),
                            1, 1e3 if bound is None else bound,
                            lambda p: f(p[..., 0], p[..., 1], p[..., 2]),
                            lambda p: j(p[..., 0], p[..., 1], p[..., 2]))
    if hasattr(field, "domain") and hasattr(field, "value"):
        periods = np.array([p or 0.0 for p in field.domain.periods], dtype=float)
        if field.domain.kind == "solid-torus":
            bk, bd = 2, 2.0 * (field.domain.disk_radius or 1.0) if bound is None else bound
        elif bound is not None:
            bk, bd = 1, bound
        else:
            bk, bd = 0, 0.0
        kernel = getattr(field, "kernel", None)
        if getattr(field, "kind", "vector") == "form":
            field = field.as_vector()
        if kernel and kernel[0] == "abc":
            kind = pk.KIND_ABC
        elif kernel and kernel[0] == "lutz":
            kind = pk.KIND_LUTZ
        else:
            kind = pk.KIND_CALLBACK
        params = np.array(kernel[1] if kernel and kind != pk.KIND_CALLBACK else (0.0, 0.0, 0.0), dtype=float)
        return _KernelField(kind, np.ascontiguousarray(params), *empty, periods, bk, bd,
                            field.value, field.jacobian, field.value)
    if callable(field):
        def jac(p, h=1e-6):
            p = np.asarray(p, dtype=float)
            cols = []
            for k in range(3):
                e = np.zeros(3)
                e[k] = h
                cols.append((field(p + e) - field(p - e)) / (2 * h))
            return np.stack(cols, axis=-1)
        return _KernelField(pk.KIND_CALLBACK, np.zeros(3), *empty, np.zeros(3),
                            1 if bound else 0, bound or 0.0, field, jac, field)
    raise TypeError(f"cannot trace a {type(field).__name__}")


def _wrap(d: np.ndarray, periods: np.ndarray) -> np.ndarray:
    d = np.array(d, dtype=float, copy=True)
    for i, p in enumerate(periods):
        if p > 0:
            d[..., i] -= p * np.floor(d[..., i] / p + 0.5)
    return d


# ---------------------------------------------------------------------------
# records

@dataclass
class OrbitRecord:
    seed: tuple[float, float, float]
    t_span: float
    trajectory: np.ndarray = field(repr=False)
    times: np.ndarray = field(repr=False)
    verdict: str = "inconclusive"
    period: Optional[float] = None
    closure_residual: Optional[float] = None
    forward_limit: Optional[int] = None
    backward_limit: Optional[int] = None
    forward_distance: Optional[float] = None
    backward_distance: Optional[float] = None
    stats: dict = field(default_factory=dict)

    def to_json(self, include_trajectory: bool = False) -> dict:
        r = lambda v: None if v is None else float(f"{v:.10g}")  # noqa: E731
        d = {
            "seed": [r(v) for v in self.seed],
            "t_span": r(self.t_span),
            "verdict": self.verdict,
            "period": r(self.period),
            "closure_residual": r(self.closure_residual),
            "forward_limit": self.forward_limit,
            "backward_limit": self.backward_limit,
            "forward_distance": r(self.forward_distance),
            "backward_distance": r(self.backward_distance),
            "stats": self.stats,
            "n_samples": int(len(self.times)),
        }
        if include_trajectory:
            d["trajectory"] = [[r(v) for v in row] for row in self.trajectory]
        return d


def trajectory_csv(rec: OrbitRecord, path=None) -> str:
    buf = io.StringIO()
    buf.write("t,x,y,z\n")
    for t, p in zip(rec.times, rec.trajectory):
        buf.write(f"{t:.12g},{p[0]:.12g},{p[1]:.12g},{p[2]:.12g}\n")
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------------------
# integration

def _run(kf: _KernelField, seed, t_max, tol=1e-10, direction=1.0, normalize=False,
         stop_points=None, stop_radius=1e-4, fixed_step=0.0, section=None, max_hits=0,
         sec_tmin=0.0, sec_radius=1.0, max_steps=2_000_000, backend=None, h0=1e-2):
    trace = get_kernel(backend)
    if kf.kind == pk.KIND_CALLBACK:
        trace = get_kernel("python")
    sp = np.zeros(3)
    sn = np.zeros(3)
    if section is not None:
        sp = np.ascontiguousarray(section[0], dtype=float)
        sn = np.ascontiguousarray(section[1], dtype=float)
    stops = np.ascontiguousarray(np.asarray(stop_points if stop_points is not None else np.zeros((0, 3)),
                                            dtype=float).reshape(-1, 3))
    return trace(int(kf.kind), kf.params, kf.pexp, kf.pcoef, kf.pcomp,
                 np.ascontiguousarray(seed, dtype=float), float(t_max), float(tol), float(tol),
                 float(h0), 1e-14, int(max_steps), float(direction), kf.periods,
                 int(kf.bound_kind), float(kf.bound), stops, float(stop_radius), int(normalize),
                 float(fixed_step), int(section is not None), sp, sn, float(sec_radius),
                 float(sec_tmin), int(max_hits), callback=kf.callback)


def integrate(field, seed: Sequence[float], t_max: float = 500.0, tol: float = 1e-10,
              direction: int = 1, normalize: bool = False, stop_points=None,
              stop_radius: float = 1e-4, stride: int = 1, bound: Optional[float] = None,
              fixed_step: float = 0.0, backend: Optional[str] = None) -> OrbitRecord:
    """Adaptive Dormand-Prince trajectory from ``seed``.

    The field is used as given (no normalisation) unless ``normalize``.
    Trajectories are stored in lifted coordinates; wrap with the domain
    periods for plotting.
    """
    kf = as_kernel_field(field, bound)
    out = _run(kf, seed, t_max, tol, direction, normalize, stop_points, stop_radius,
               fixed_step, backend=backend)
    status = STATUS_NAMES[out["status"]]
    verdict = "escaping" if out["status"] == pk.STATUS_OUT_OF_BOUNDS else "inconclusive"
    ts, ys = out["t"], out["y"]
    if stride > 1:
        keep = np.r_[np.arange(0, len(ts), stride), len(ts) - 1] if len(ts) else np.arange(0)
        keep = np.unique(keep)
        ts, ys = ts[keep], ys[keep]
    stats = {
        "status": status,
        "n_accepted": int(out["n_accepted"]),
        "n_rejected": int(out["n_rejected"]),
        "t_end": float(ts[-1]) if len(ts) else 0.0,
        "truncated": out["status"] == pk.STATUS_UNDERFLOW,
        "backend": "python" if kf.kind == pk.KIND_CALLBACK else (backend or _default_backend()),
    }
    rec = OrbitRecord(tuple(float(v) for v in seed), float(t_max), ys, ts, verdict, stats=stats)
    if out["stop_index"] >= 0:
        rec.forward_limit = int(out["stop_index"])
        rec.forward_distance = float(out["min_dist"][out["stop_index"]])
    if stop_points is not None and len(out["min_dist"]):
        stats["min_distances"] = [float(f"{v:.6g}") for v in out["min_dist"]]
    return rec


def _default_backend():
    from ._backend import BACKEND
    return BACKEND


# ---------------------------------------------------------------------------
# periodic orbits

def _section_basis(n: np.ndarray) -> np.ndarray:
    k = int(np.argmin(np.abs(n)))
    e = np.zeros(3)
    e[k] = 1.0
    a = e - (e @ n) * n
    a /= np.linalg.norm(a)
    b = np.cross(n, a)
    return np.stack([a, b])


def first_return(kf: _KernelField, p: np.ndarray, n: np.ndarray, anchor: np.ndarray, t_max: float,
                 tol: float, sec_tmin: float, backend=None):
    """First crossing of the plane through ``anchor`` with normal ``n``; (point, time) or None."""
    out = _run(kf, p, t_max, tol, section=(anchor, n), max_hits=1, sec_tmin=sec_tmin,
               sec_radius=_sec_radius(kf), backend=backend)
    if len(out["hits_t"]) == 0:
        return None
    return out["hits_y"][0], float(out["hits_t"][0])


def _sec_radius(kf: _KernelField) -> float:
    per = [p for p in kf.periods if p > 0]
    return 0.25 * min(per) if per else math.inf


def shoot_periodic(kf: _KernelField, p0: np.ndarray, t_max: float = 100.0, tol: float = 1e-11,
                   max_iter: int = 25, fd: float = 1e-7, backend=None):
    """Newton on the return map of the plane through p0 normal to the flow.

    Returns (point, period, closure residual) or None.
    """
    p0 = np.asarray(p0, dtype=float)
    if kf.bound_kind:
        # saddle orbits throw neighbours far out before they return
        kf = replace(kf, bound=max(1e3 * kf.bound, 1e3))
    v = np.asarray(kf.value(p0[None, :])[0], dtype=float)
    nv = np.linalg.norm(v)
    if not np.isfinite(nv) or nv < 1e-8:
        return None
    n = v / nv
    E = _section_basis(n)
    sec_tmin = 1e-3
    u = np.zeros(2)

    def F(uu):
        q = p0 + uu @ E
        r = first_return(kf, q, n, p0, t_max, tol, sec_tmin, backend)
        if r is None:
            return None, None, None
        d = _wrap(r[0] - q, kf.periods)
        return d @ E.T, r[1], d

    res = None
    for _ in range(max_iter):
        Fu, T, d = F(u)
        if Fu is None:
            return None
        res = float(np.linalg.norm(d))
        if res < 1e-11:
            break
        J = np.empty((2, 2))
        for k in range(2):
            du = np.zeros(2)
            du[k] = fd
            Fk, _, _ = F(u + du)
            if Fk is None:
                return None
            J[:, k] = (Fk - Fu) / fd
        try:
            step = np.linalg.solve(J - np.eye(2) * 0.0, -Fu)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(step)):
            return None
        u = u + step
    Fu, T, d = F(u)
    if Fu is None:
        return None
    return p0 + u @ E, T, float(np.linalg.norm(d))


def _orbit_samples(kf: _KernelField, p: np.ndarray, T: float, n: int = 400, backend=None) -> np.ndarray:
    out = _run(kf, p, T, 1e-10, backend=backend)
    ys = out["y"]
    ts = out["t"]
    grid = np.linspace(0, ts[-1], n)
    return np.stack([np.interp(grid, ts, ys[:, i]) for i in range(3)], 1)


def _periodic_tree(pts: np.ndarray, periods: np.ndarray, lo: np.ndarray, box: np.ndarray) -> cKDTree:
    return cKDTree(_to_box(pts, periods, lo, box), boxsize=box)


def _to_box(pts, periods, lo, box):
    out = np.where(periods > 0, np.mod(pts, np.where(periods > 0, periods, 1.0)), pts - lo)
    return np.minimum(out, box - 1e-12)


def _hausdorff(a: np.ndarray, b: np.ndarray, periods: np.ndarray) -> float:
    """Symmetric Hausdorff distance between point sets, periodic in the given axes."""
    both = np.concatenate([a, b])
    lo = both.min(0) - 1.0
    span = both.max(0) - lo + 1.0
    box = np.where(periods > 0, periods, 4 * span)
    ta = _periodic_tree(a, periods, lo, box)
    tb = _periodic_tree(b, periods, lo, box)
    return max(float(tb.query(_to_box(a, periods, lo, box))[0].max()),
               float(ta.query(_to_box(b, periods, lo, box))[0].max()))


def _recurrence_candidates(rec_t, rec_y, kf: _KernelField, eps: float, min_gap: float, limit: int = 3):
    if len(rec_t) < 3:
        return []
    ys = rec_y
    per = kf.periods
    lo = ys.min(0)
    span = ys.max(0) - lo
    box = np.where(per > 0, per, 4 * span + 10.0)
    pts = np.where(per > 0, np.mod(ys, np.where(per > 0, per, 1.0)), ys - lo + span + 1.0)
    pts = np.minimum(pts, box - 1e-12)
    tree = cKDTree(pts, boxsize=box)
    vel = kf.value(ys)
    vn = vel / np.maximum(np.linalg.norm(vel, axis=1, keepdims=True), 1e-300)
    found = []
    pairs = tree.query_pairs(eps, output_type="ndarray")
    if len(pairs) == 0:
        return []
    gaps = rec_t[pairs[:, 1]] - rec_t[pairs[:, 0]]
    aligned = np.einsum("ij,ij->i", vn[pairs[:, 0]], vn[pairs[:, 1]]) > 0.9
    ok = (np.abs(gaps) > min_gap) & aligned
    for i, j in pairs[ok][np.argsort(pairs[ok][:, 0], kind="stable")]:
        found.append((ys[min(i, j)], abs(rec_t[j] - rec_t[i])))
        if len(found) >= limit:
            break
    return found


def default_seeds(domain_kind: str, n: int = 200, seed: int = 0, radius: float = 1.0) -> np.ndarray:
    """Scrambled Sobol points in the natural box of a domain."""
    m = int(math.ceil(math.log2(max(n, 2))))
    u = qmc.Sobol(3, scramble=True, seed=seed).random_base2(m)[:n]
    if domain_kind == "torus":
        return u * 2 * math.pi
    if domain_kind == "solid-torus":
        r = radius * np.sqrt(u[:, 0])
        a = 2 * math.pi * u[:, 1]
        return np.stack([r * np.cos(a), r * np.sin(a), 2 * math.pi * u[:, 2]], 1)
    return (2 * u - 1) * radius


def detect_periodic(field, seeds=None, t_max: float = 500.0, tol: float = 1e-10, eps: float = 1e-4,
                    loose_eps: float = 1e-2, shoot_all: bool = True, n_seeds: int = 200,
                    rng_seed: int = 0, threads: int = 1, backend=None,
                    bound: Optional[float] = None) -> list[OrbitRecord]:
    """Periodic orbits through (or near) the seeds, refined by shooting.

    Candidates come from trajectory recurrences (within ``eps`` and then
    ``loose_eps``) and, when ``shoot_all``, from each seed itself so that
    saddle-type orbits are reachable.  Each converged orbit is re-shot from
    a 1e-6 perturbation; if the periods disagree by more than 1e-3 relative
    it is reported as inconclusive.
    """
    kf = as_kernel_field(field, bound)
    if seeds is None:
        kind = getattr(getattr(field, "domain", None), "kind", "R3")
        seeds = default_seeds(kind, n_seeds, rng_seed)
    seeds = np.asarray(seeds, dtype=float).reshape(-1, 3)
    shoot_tmax = min(t_max, 200.0)

    def per_seed(idx):
        s = seeds[idx]
        out = _run(kf, s, t_max, tol, backend=backend)
        ts, ys = out["t"], out["y"]
        steps = np.diff(ts)
        h_typ = float(np.median(steps)) if len(steps) else 1e-2
        cands = _recurrence_candidates(ts, ys, kf, eps, 10 * h_typ)
        if not cands:
            cands = _recurrence_candidates(ts, ys, kf, loose_eps, 10 * h_typ)
        starts = [c[0] for c in cands]
        if shoot_all:
            starts.append(s)
        results = []
        for p in starts:
            r = shoot_periodic(kf, p, shoot_tmax, backend=backend)
            if r is None:
                continue
            q, T, res = r
            if res < 1e-6 and T > 10 * h_typ:
                results.append((q, T, res, h_typ))
                break
        return idx, results

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            raw = list(ex.map(per_seed, range(len(seeds))))
    else:
        raw = [per_seed(i) for i in range(len(seeds))]

    records: list[OrbitRecord] = []
    samples: list[np.ndarray] = []
    for idx, results in raw:
        for q, T, res, h_typ in results:
            orbit = _orbit_samples(kf, q, T, backend=backend)
            dense = _orbit_samples(kf, q, T, n=20000, backend=backend)
            if any(_hausdorff(dense, o, kf.periods) < 1e-3 for o in samples):
                continue
            verdict = "periodic"
            pert = shoot_periodic(kf, q + 1e-6, shoot_tmax, backend=backend)
            if pert is None or abs(pert[1] - T) > 1e-3 * T or pert[2] >= 1e-6:
                verdict = "inconclusive"
            samples.append(dense)
            rec = OrbitRecord(tuple(float(v) for v in q), float(T), orbit,
                              np.linspace(0, T, len(orbit)), verdict, period=float(T),
                              closure_residual=float(res),
                              stats={"seed_index": int(idx), "typical_step": h_typ})
            records.append(rec)
    return [r for r in records if r.verdict == "periodic"] + [r for r in records if r.verdict != "periodic"]


# ---------------------------------------------------------------------------
# connections between zeros

def _join(a: dict, b: dict, t_offset: float) -> dict:
    out = dict(b)
    out["t"] = np.concatenate([a["t"], b["t"][1:] + t_offset])
    out["y"] = np.concatenate([a["y"], b["y"][1:]])
    out["n_accepted"] = a["n_accepted"] + b["n_accepted"]
    out["n_rejected"] = a["n_rejected"] + b["n_rejected"]
    return out


def _unstable_left_vector(J: np.ndarray) -> Optional[np.ndarray]:
    """Left eigenvector for the (unique) unstable eigenvalue: normal to the stable manifold."""
    wl, vl = np.linalg.eig(J.T)
    pos = [k for k in range(3) if wl[k].real > 0]
    if len(pos) != 1 or abs(wl[pos[0]].imag) > 1e-12:
        return None
    return np.real(vl[:, pos[0]])


def plane_manifold_seeds(z, J, sign: int, delta: float, n_angles: int = 72, step: float = 0.25):
    """Seeds near a zero on its 2-D unstable (sign=+1) or stable (sign=-1) eigenplane.

    Returns (axis_seeds, curve, grid) or None when that eigenplane is not 2-D.
    ``curve`` is a closed loop meeting every orbit of the linearised flow
    once.  For a focus it is a round circle.  For a node the orbits are
    labelled by c = s / |w|^p (w weak, s strong, p the eigenvalue ratio),
    and the loop runs over log10 c through all four quadrants so that orbits
    hugging the weak direction are not swamped by the strong one.
    """
    z = np.asarray(z, dtype=float)
    w, v = np.linalg.eig(sign * np.asarray(J, dtype=float))
    idx = [k for k in range(3) if w[k].real > 1e-12]
    if len(idx) != 2:
        return None
    if abs(w[idx[0]].imag) > 1e-12:
        a = np.real(v[:, idx[0]])
        a /= np.linalg.norm(a)
        b = np.imag(v[:, idx[0]])
        b = b - (b @ a) * a
        b /= np.linalg.norm(b)

        def circle(th):
            return z + delta * (math.cos(th) * a + math.sin(th) * b)
        return [], circle, np.linspace(0, 2 * math.pi, n_angles + 1)

    ks = sorted(idx, key=lambda k: w[k].real)
    lam_w, lam_s = w[ks[0]].real, w[ks[1]].real
    e_w = np.real(v[:, ks[0]]) / np.linalg.norm(np.real(v[:, ks[0]]))
    e_s = np.real(v[:, ks[1]]) / np.linalg.norm(np.real(v[:, ks[1]]))
    axis = [z + sg * delta * e for e in (e_w, e_s) for sg in (1, -1)]
    pw = lam_s / lam_w
    floor = 1e-15 * (1 + float(np.max(np.abs(z))))
    u_lo = math.log10(max(floor / delta ** pw, 1e-300))
    u_hi = -u_lo + 2 * (1 - pw) * math.log10(delta)
    quads = ((1, 1, False), (-1, 1, True), (-1, -1, False), (1, -1, True))

    def loop(tau):
        # weak+ -> strong+ -> weak- -> strong- -> weak+
        k = min(int(tau), 3)
        sw, ss, rev = quads[k]
        u = u_lo + ((1 - (tau - k)) if rev else (tau - k)) * (u_hi - u_lo)
        c = 10.0 ** u
        if c * delta ** pw <= delta:
            ww, sv = delta, c * delta ** pw
        else:
            ww, sv = (delta / c) ** (1 / pw), delta
        return z + sw * ww * e_w + ss * sv * e_s

    n_u = int(math.ceil((u_hi - u_lo) / step))
    return axis, loop, np.linspace(0, 4, 4 * n_u + 1)


@dataclass
class _Probe:
    target: Optional[int]
    side: int
    distance: float
    stop: bool
    out: dict
    closest: int = -1


def detect_singular_connecting(field, zeros: Sequence[Sequence[float]], seeds=None, t_max: float = 200.0,
                               tol: float = 1e-11, delta: float = 5e-5, stop_radius: float = 1e-4,
                               capture: float = 0.3, n_angles: int = 72, bisect_iter: int = 60,
                               match_tol: float = 1e-7, backend=None,
                               bound: Optional[float] = None) -> list[OrbitRecord]:
    """Orbits leaving one zero and arriving at another (or the same) zero.

    One-dimensional unstable manifolds are followed directly from
    zero +/- delta * eigenvector.  Two-dimensional ones are scanned along
    a loop of seeds (see plane_manifold_seeds); where the side of a target's
    stable manifold on which the orbit passes flips between neighbours, the
    loop parameter is bisected.  If the bisected orbit does not itself enter
    the stop radius (slow approach along a weak stable direction), the
    connection is completed by shooting backwards from the target's stable
    eigenplane and matching on a section; the gap must be below
    ``match_tol``.  ``seeds`` are extra points traced forward as well.
    """
    kf = as_kernel_field(field, bound)
    Z = np.asarray(zeros, dtype=float).reshape(-1, 3)
    if not len(Z):
        return []
    jacs = [np.asarray(kf.jacobian(z[None, :])[0], dtype=float) for z in Z]
    left_unstable = [_unstable_left_vector(J) for J in jacs]
    records: list[OrbitRecord] = []

    def dist_to(j, ys):
        return np.linalg.norm(_wrap(np.atleast_2d(ys) - Z[j], kf.periods), axis=1)

    def probe(p, source):
        # leave the source's stop ball before it counts as a target
        others = np.delete(Z, source, axis=0) if source is not None else Z
        out = None
        t_used, chunk = 0.0, 1.0
        p_cur = np.asarray(p, dtype=float)
        while t_used < t_max:
            o = _run(kf, p_cur, min(chunk, t_max - t_used), tol,
                     stop_points=others if len(others) else None, stop_radius=stop_radius, backend=backend)
            out = o if out is None else _join(out, o, t_used)
            t_used += float(o["t"][-1])
            p_cur = o["y"][-1]
            if o["status"] != pk.STATUS_DONE:
                break
            if source is None or dist_to(source, p_cur)[0] > 100 * stop_radius:
                o = _run(kf, p_cur, t_max - t_used, tol, stop_points=Z, stop_radius=stop_radius,
                         backend=backend)
                out = _join(out, o, t_used)
                break
            chunk *= 2
        ys = out["y"]
        if out["status"] == pk.STATUS_STOP_POINT:
            k = int(np.argmin([dist_to(j, ys[-1])[0] for j in range(len(Z))]))
            return _Probe(k, 0, float(dist_to(k, ys[-1])[0]), True, out, len(ys) - 1)
        first, bj = len(ys), None
        for j in range(len(Z)):
            if left_unstable[j] is None:
                continue
            d = dist_to(j, ys)
            if j == source:
                away = np.nonzero(d > 100 * stop_radius)[0]
                d[: away[0] if len(away) else len(d)] = math.inf
            inside = np.nonzero(d < capture)[0]
            if len(inside) and inside[0] < first:
                first, bj, dj = int(inside[0]), j, d
        if bj is None:
            return _Probe(None, 0, math.inf, False, out)
        # side of the target's stable manifold at the closest point of the first visit
        leave = np.nonzero(dj[first:] >= capture)[0]
        end = first + (int(leave[0]) if len(leave) else len(dj) - first)
        bk = first + int(np.argmin(dj[first:end]))
        side = int(np.sign(_wrap(ys[bk] - Z[bj], kf.periods) @ left_unstable[bj]))
        return _Probe(bj, side, float(dj[bk]), False, out, bk)

    def backward_distance(i, p):
        out = _run(kf, p, min(t_max, 50.0), tol, direction=-1.0, stop_points=Z[i:i + 1],
                   stop_radius=1e-300, backend=backend)
        return float(out["min_dist"][0])

    def keep(rec):
        if rec.forward_distance <= stop_radius and rec.backward_distance <= stop_radius:
            records.append(rec)

    def record(i, p, pr: _Probe, how: str):
        out = pr.out
        keep(OrbitRecord(tuple(float(v) for v in p), float(out["t"][-1]), out["y"], out["t"],
                         "singular-connecting", forward_limit=pr.target, backward_limit=i,
                         forward_distance=pr.distance, backward_distance=backward_distance(i, p),
                         stats={"method": how, "n_accepted": int(out["n_accepted"])}))

    def match(i, p, pr: _Probe):
        """Join the forward orbit to a backward orbit from the target's stable eigenplane."""
        j = pr.target
        plane = plane_manifold_seeds(Z[j], jacs[j], -1, delta, n_angles)
        if plane is None:
            return
        _, curve, grid = plane
        # match well before the closest approach, where the unstable component is still tiny
        ys = pr.out["y"]
        r_sec = min(0.5 * capture, 100 * pr.distance)
        m = pr.closest
        while m > 0 and dist_to(j, ys[m - 1])[0] < r_sec:
            m -= 1
        q = ys[m]
        v = np.asarray(kf.value(q[None, :])[0], dtype=float)
        n = v / np.linalg.norm(v)
        reach = 0.5 * r_sec

        def gap(tau):
            out = _run(kf, curve(tau), t_max, tol, direction=-1.0, section=(q, -n), max_hits=8,
                       sec_radius=reach, backend=backend)
            if not len(out["hits_t"]):
                return math.inf, None
            d = np.linalg.norm(_wrap(out["hits_y"] - q, kf.periods), axis=1)
            k = int(np.argmin(d))
            return float(d[k]), (out, k)

        vals = np.array([gap(tau)[0] for tau in grid])
        if not np.isfinite(vals).any():
            return
        b = int(np.argmin(vals))
        lo, hi = grid[max(b - 1, 0)], grid[min(b + 1, len(grid) - 1)]
        opt = minimize_scalar(lambda x: gap(x)[0], bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-14 * max(1.0, abs(hi))})
        tau = float(opt.x) if opt.fun < vals[b] else float(grid[b])
        g, info = gap(tau)
        if info is None or g >= match_tol:
            return
        out_b, k = info
        t_hit = float(out_b["hits_t"][k])
        keep_b = out_b["t"] <= t_hit
        fwd_y = ys[: m + 1]
        fwd_t = pr.out["t"][: m + 1]
        # the stored backward samples run from the seed near the target up to the section
        back_y = out_b["y"][keep_b][::-1]
        back_t = fwd_t[-1] + (t_hit - out_b["t"][keep_b][::-1])
        seed_t = curve(tau)
        keep(OrbitRecord(tuple(float(v) for v in p), float(back_t[-1]),
                         np.concatenate([fwd_y, back_y]), np.concatenate([fwd_t, back_t]),
                         "singular-connecting", forward_limit=j, backward_limit=i,
                         forward_distance=float(dist_to(j, seed_t)[0]),
                         backward_distance=backward_distance(i, p),
                         closure_residual=g,
                         stats={"method": "two-sided", "match_gap": float(f"{g:.6g}"),
                                "closest_forward_approach": float(f"{pr.distance:.6g}")}))

    def scan(i, curve, params, method):
        probes = [probe(curve(u), i) for u in params]
        for u, pr in zip(params, probes):
            if pr.stop:
                record(i, curve(u), pr, method)
        for k in range(len(params) - 1):
            p1, p2 = probes[k], probes[k + 1]
            if p1.stop or p2.stop or p1.target is None or p1.target != p2.target:
                continue
            if p1.side * p2.side >= 0:
                continue
            lo, hi = float(params[k]), float(params[k + 1])
            best = (p1, lo) if p1.distance < p2.distance else (p2, hi)
            for _ in range(bisect_iter):
                mid = 0.5 * (lo + hi)
                if not lo < mid < hi:
                    break
                pr_mid = probe(curve(mid), i)
                if pr_mid.stop:
                    record(i, curve(mid), pr_mid, method + "-bisection")
                    best = None
                    break
                if pr_mid.target != p1.target or pr_mid.side == 0:
                    break
                if pr_mid.distance < best[0].distance:
                    best = (pr_mid, mid)
                if pr_mid.side == p1.side:
                    lo = mid
                else:
                    hi = mid
            if best is not None and best[0].target == p1.target:
                match(i, curve(best[1]), best[0])

    for i, (z, J) in enumerate(zip(Z, jacs)):
        w, v = np.linalg.eig(J)
        unstable = [k for k in range(3) if w[k].real > 1e-12]
        if len(unstable) == 1:
            d = np.real(v[:, unstable[0]])
            d /= np.linalg.norm(d)
            for sgn in (1, -1):
                p = z + sgn * delta * d
                pr = probe(p, i)
                if pr.stop:
                    record(i, p, pr, "unstable-branch")
        elif len(unstable) == 2:
            axis, curve, grid = plane_manifold_seeds(z, J, 1, delta, n_angles)
            for p in axis:
                pr = probe(p, i)
                if pr.stop:
                    record(i, p, pr, "unstable-eigendirection")
            scan(i, curve, grid, "unstable-surface")
    if seeds is not None:
        for p in np.asarray(seeds, dtype=float).reshape(-1, 3):
            pr = probe(p, None)
            if pr.stop:
                bd = _run(kf, p, t_max, tol, direction=-1.0, stop_points=Z, stop_radius=stop_radius,
                          backend=backend)
                if bd["stop_index"] >= 0:
                    keep(OrbitRecord(tuple(float(v) for v in p), float(pr.out["t"][-1]), pr.out["y"],
                                     pr.out["t"], "singular-connecting", forward_limit=pr.target,
                                     backward_limit=int(bd["stop_index"]), forward_distance=pr.distance,
                                     backward_distance=float(bd["min_dist"][bd["stop_index"]]),
                                     stats={"method": "seed"}))
    # deduplicate by endpoints and path
    unique: list[OrbitRecord] = []
    for r in records:
        dup = False
        for u in unique:
            if (u.backward_limit, u.forward_limit) != (r.backward_limit, r.forward_limit):
                continue
            a = r.trajectory[:: max(1, len(r.trajectory) // 200)]
            b = u.trajectory[:: max(1, len(u.trajectory) // 200)]
            if _hausdorff(a, b, kf.periods) < 1e-2:
                dup = True
                break
        if not dup:
            unique.append(r)
    return unique


def closure_residual_fixed_step(field, seed, period: float, n_steps: int, backend=None) -> float:
    """|x(T) - x(0)| (wrapped) after n fixed Dormand-Prince steps over one period."""
    kf = as_kernel_field(field)
    out = _run(kf, seed, period, 1.0, fixed_step=period / n_steps, max_steps=n_steps + 5, backend=backend)
    return float(np.linalg.norm(_wrap(out["y"][-1] - np.asarray(seed, dtype=float), kf.periods)))
