"""Level-set topology, dividing sets on spheres, and contact forms built
from a pair of planar vector fields.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .chirality import defect_polynomial
from .errors import NonRegularValue, TransversalityFailure, ZeroOnSphere
from .meshes import TriMesh, euler_characteristic, icosphere
from .polyform import (
    DifferentialForm,
    Polynomial,
    PolyVectorField,
    ext_d,
    wedge,
)

__all__ = [
    "TriMesh", "euler_characteristic", "icosphere", "level_set_mesh", "level_set_euler",
    "DividingSetReport", "dividing_set", "SurfaceConstruction", "surface_contact_construct",
    "TangencyReport", "reeb_tangency_check", "slab_semidefinite",
]

# Kuhn split of the unit cube into six tetrahedra sharing the 0-7 diagonal.
# Corner index = i + 2j + 4k.
_KUHN = np.array([
    (0, 1, 3, 7), (0, 1, 5, 7), (0, 2, 3, 7),
    (0, 2, 6, 7), (0, 4, 5, 7), (0, 4, 6, 7),
])
_CORNER = np.array([(i & 1, (i >> 1) & 1, (i >> 2) & 1) for i in range(8)])


def _tet_cases():
    """For each 4-bit inside mask: list of triangles as pairs of tet-local edges."""
    cases = {}
    for mask in range(16):
        inside = [v for v in range(4) if mask >> v & 1]
        outside = [v for v in range(4) if not mask >> v & 1]
        if len(inside) in (0, 4):
            cases[mask] = []
        elif len(inside) == 1 or len(outside) == 1:
            lone = inside[0] if len(inside) == 1 else outside[0]
            others = [v for v in range(4) if v != lone]
            cases[mask] = [[(lone, others[0]), (lone, others[1]), (lone, others[2])]]
        else:
            a, b = inside
            c, d = outside
            cases[mask] = [[(a, c), (a, d), (b, d)], [(a, c), (b, d), (b, c)]]
    return cases


_CASES = _tet_cases()


def _eval_grid(f, axis: np.ndarray, k0: int, k1: int) -> np.ndarray:
    gx, gy, gz = np.meshgrid(axis, axis, axis[k0:k1], indexing="ij")
    return f(gx, gy, gz)


def level_set_mesh(phi: Polynomial, c: float, ball_radius: float = 1.0, resolution: int = 128,
                   check_regular: bool = True, grad_tol: float = 1e-8) -> TriMesh:
    """{phi = c} inside the closed ball, by marching tetrahedra on a resolution^3 grid.

    Vertices are keyed by the grid edge they sit on, so neighbouring cells
    share them exactly; triangles crossing the sphere are cut along it.
    """
    n = int(resolution)
    R = float(ball_radius)
    f = phi.lambdify()
    axis = np.linspace(-R, R, n + 1)
    h = axis[1] - axis[0]
    stride = np.array([1, n + 1, (n + 1) ** 2], dtype=np.int64)
    nvert = (n + 1) ** 3

    tri_keys = []
    for k in range(n):  # slab by slab in z
        vals = _eval_grid(f, axis, k, k + 2) - c  # (n+1, n+1, 2)
        ins = vals >= 0
        corner_in = np.stack([ins[_CORNER[v, 0]:n + _CORNER[v, 0], _CORNER[v, 1]:n + _CORNER[v, 1], _CORNER[v, 2]]
                              for v in range(8)], axis=-1)  # (n, n, 8)
        mixed = corner_in.any(-1) & ~corner_in.all(-1)
        ii, jj = np.nonzero(mixed)
        if not len(ii):
            continue
        # drop cells entirely outside the ball
        lo = np.stack([axis[ii], axis[jj], np.full(len(ii), axis[k])], 1)
        nearest = np.clip(0.0, lo, lo + h)
        keep = np.einsum("ij,ij->i", nearest, nearest) <= R * R * (1 + 1e-12)
        ii, jj = ii[keep], jj[keep]
        if not len(ii):
            continue
        base = ii * stride[0] + jj * stride[1] + k * stride[2]
        cin = corner_in[ii, jj]  # (m, 8)
        cid = base[:, None] + (_CORNER @ stride)[None, :]  # grid ids of the 8 corners
        for tet in _KUHN:
            tin = cin[:, tet]
            mask = (tin * (1 << np.arange(4))).sum(1)
            tids = cid[:, tet]
            for m in range(1, 15):
                sel = mask == m
                if not sel.any():
                    continue
                ids = tids[sel]
                for tri in _CASES[m]:
                    keys = []
                    for a, b in tri:
                        u, w = ids[:, a], ids[:, b]
                        keys.append(np.minimum(u, w) * nvert + np.maximum(u, w))
                    tri_keys.append(np.stack(keys, 1))
    if not tri_keys:
        return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    tk = np.concatenate(tri_keys)
    ukeys, inv = np.unique(tk, return_inverse=True)
    faces = inv.reshape(-1, 3)
    u, w = ukeys // nvert, ukeys % nvert

    def grid_point(g):
        i = g % (n + 1)
        j = (g // (n + 1)) % (n + 1)
        kk = g // (n + 1) ** 2
        return np.stack([axis[i], axis[j], axis[kk]], 1)

    pu, pw = grid_point(u), grid_point(w)
    fu = f(pu[:, 0], pu[:, 1], pu[:, 2]) - c
    fw = f(pw[:, 0], pw[:, 1], pw[:, 2]) - c
    s = fu / (fu - fw)
    verts = pu + s[:, None] * (pw - pu)
    # drop degenerate triangles (two corners on the same grid edge cannot occur,
    # but guard against repeated keys anyway)
    good = (faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 0] != faces[:, 2])
    faces = faces[good]
    mesh = _clip_to_ball(verts, faces, R)
    if check_regular and mesh.n_vertices:
        g = phi.gradient().lambdify()(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.vertices[:, 2])
        gmin = float(np.linalg.norm(g, axis=1).min())
        if gmin <= grad_tol:
            raise NonRegularValue(f"|grad phi| = {gmin:.3g} on the level set phi = {c}")
    return mesh


def _clip_to_ball(verts: np.ndarray, faces: np.ndarray, R: float) -> TriMesh:
    g = np.einsum("ij,ij->i", verts, verts) - R * R
    inside = g < 0
    fin = inside[faces]
    full = fin.all(1)
    part = fin.any(1) & ~full
    out_faces = [faces[full]]
    new_verts = {}
    extra = []

    def cut(a, b):
        key = (min(a, b), max(a, b))
        if key not in new_verts:
            p, q = verts[key[0]], verts[key[1]]
            d = q - p
            A, B, C = d @ d, 2 * p @ d, p @ p - R * R
            disc = max(B * B - 4 * A * C, 0.0)
            roots = [(-B - disc ** 0.5) / (2 * A), (-B + disc ** 0.5) / (2 * A)]
            s = min((r for r in roots if -1e-12 <= r <= 1 + 1e-12), key=lambda r: abs(r - 0.5), default=0.5)
            new_verts[key] = len(verts) + len(extra)
            extra.append(p + s * d)
        return new_verts[key]

    clipped = []
    for tri in faces[part]:
        poly = []
        for i in range(3):
            a, b = int(tri[i]), int(tri[(i + 1) % 3])
            if inside[a]:
                poly.append(a)
            if inside[a] != inside[b]:
                poly.append(cut(a, b))
        for i in range(1, len(poly) - 1):
            clipped.append((poly[0], poly[i], poly[i + 1]))
    if clipped:
        out_faces.append(np.array(clipped, dtype=np.int64))
    all_verts = np.concatenate([verts, np.array(extra).reshape(-1, 3)])
    f = np.concatenate(out_faces) if out_faces else np.zeros((0, 3), dtype=np.int64)
    used, remap = np.unique(f, return_inverse=True)
    return TriMesh(all_verts[used], remap.reshape(-1, 3))


def level_set_euler(phi: Polynomial, c: float, ball_radius: float = 1.0, resolution: int = 128) -> int:
    return euler_characteristic(level_set_mesh(phi, c, ball_radius, resolution))


# ---------------------------------------------------------------------------
# dividing sets

@dataclass
class DividingSetReport:
    center: tuple[float, float, float]
    radius: float
    level: int
    n_vertices: int
    scalar_min: float
    scalar_max: float
    component_count: int
    component_sizes: list[int]
    giroux_verdict: str
    scalars: Optional[np.ndarray] = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {
            "center": [float(v) for v in self.center],
            "radius": self.radius,
            "level": self.level,
            "n_vertices": self.n_vertices,
            "scalar_min": float(f"{self.scalar_min:.12g}"),
            "scalar_max": float(f"{self.scalar_max:.12g}"),
            "component_count": self.component_count,
            "component_sizes": self.component_sizes,
            "giroux_verdict": self.giroux_verdict,
        }


def _normal_field(eta):
    """Euclidean dual vector of a 1-form, as a callable on (N, 3) points."""
    if isinstance(eta, DifferentialForm):
        if eta.degree != 1:
            raise ValueError("dividing_set needs a 1-form")
        fn = eta.lambdify()
        return lambda p: fn(p[:, 0], p[:, 1], p[:, 2])
    if isinstance(eta, PolyVectorField):
        fn = eta.lambdify()
        return lambda p: fn(p[:, 0], p[:, 1], p[:, 2])
    if hasattr(eta, "value"):
        return eta.value
    return eta


def crossing_components(mesh: TriMesh, scalar: np.ndarray) -> list[int]:
    """Sizes of the connected pieces of {scalar = 0} traced through sign-changing edges."""
    pos = scalar > 0
    edges = mesh.edges
    cross = pos[edges[:, 0]] != pos[edges[:, 1]]
    if not cross.any():
        return []
    edge_id = -np.ones(len(edges), dtype=np.int64)
    edge_id[cross] = np.arange(int(cross.sum()))
    # map each face edge to its index in the unique edge table
    f = mesh.faces
    fe = np.stack([np.sort(f[:, [0, 1]], 1), np.sort(f[:, [1, 2]], 1), np.sort(f[:, [2, 0]], 1)], 1)
    n = mesh.n_vertices
    codes = edges[:, 0] * n + edges[:, 1]
    order = np.argsort(codes)
    fcodes = fe[..., 0] * n + fe[..., 1]
    idx = order[np.searchsorted(codes[order], fcodes)]
    fid = edge_id[idx]  # (F, 3), -1 where not crossing
    rows, cols = [], []
    for a, b in ((0, 1), (1, 2), (0, 2)):
        m = (fid[:, a] >= 0) & (fid[:, b] >= 0)
        rows.append(fid[m, a])
        cols.append(fid[m, b])
    k = int(cross.sum())
    r = np.concatenate(rows)
    cidx = np.concatenate(cols)
    g = coo_matrix((np.ones(len(r)), (r, cidx)), shape=(k, k))
    _, labels = connected_components(g, directed=False)
    sizes = np.bincount(labels)
    return sorted((int(s) for s in sizes), reverse=True)


def dividing_set(eta, center=(0.0, 0.0, 0.0), radius: float = 0.5, level: int = 5,
                 max_level: int = 7, min_component: int = 8) -> DividingSetReport:
    """Tangency locus of the contact normal on a sphere, and the Giroux verdict."""
    normal = _normal_field(eta)
    c = np.asarray(center, dtype=float)
    while True:
        mesh = icosphere(level)
        pts = c + radius * mesh.vertices
        N = np.asarray(normal(pts), dtype=float)
        norms = np.linalg.norm(N, axis=1)
        if norms.min() <= 1e-12 * max(norms.max(), 1.0):
            raise ZeroOnSphere(f"the 1-form vanishes on the sphere of radius {radius}")
        scalar = np.einsum("ij,ij->i", N, mesh.vertices)
        sizes = crossing_components(mesh, scalar)
        if sizes and min(sizes) < min_component and level < max_level:
            level += 1
            continue
        break
    count = len(sizes)
    if count == 0:
        verdict = "undetermined"
    elif count == 1:
        verdict = "tight-neighborhood"
    else:
        verdict = "overtwisted"
    return DividingSetReport(tuple(float(v) for v in c), float(radius), level, mesh.n_vertices,
                             float(scalar.min()), float(scalar.max()), count, sizes, verdict, scalar)


# ---------------------------------------------------------------------------
# contact forms from a planar pair (X, Y)

@dataclass
class SurfaceConstruction:
    X: PolyVectorField
    Y: PolyVectorField
    eta: DifferentialForm
    u: Polynomial  # u_z = div(X - z Y)
    beta: DifferentialForm
    gamma: DifferentialForm
    defect_z0: Polynomial
    identity_holds: bool

    def to_json(self) -> dict:
        return {
            "eta": self.eta.to_json(),
            "eta_text": repr(self.eta),
            "u": str(self.u),
            "defect_z0": str(self.defect_z0),
            "identity_holds": self.identity_holds,
        }


def _planar(V: PolyVectorField) -> tuple[Polynomial, Polynomial]:
    if not V[2].is_zero() or any(e[2] for p in V.components[:2] for e in p.terms):
        raise ValueError("planar vector fields must not depend on z or have a z component")
    return V[0], V[1]


def _restrict_z0(p: Polynomial) -> Polynomial:
    return Polynomial({e: c for e, c in p.terms.items() if e[2] == 0})


def surface_contact_construct(X: PolyVectorField, Y: PolyVectorField, check: bool = True,
                              n_check: int = 81, tol: float = 1e-12) -> SurfaceConstruction:
    """eta = beta + z (du_z - gamma) + u_z dz on R^2 x [-1, 1].

    beta = i_X (dx^dy), gamma = i_Y (dx^dy), u_z = div(X - zY) and du_z is
    the differential along the surface only.
    """
    x1, x2 = _planar(X)
    y1, y2 = _planar(Y)
    _, _, z = Polynomial.variables()
    zero = Polynomial()
    beta = DifferentialForm.one_form(-x2, x1, zero)
    gamma = DifferentialForm.one_form(-y2, y1, zero)
    div_x = x1.diff(0) + x2.diff(1)
    div_y = y1.diff(0) + y2.diff(1)
    u = div_x - z * div_y
    du_surface = DifferentialForm.one_form(u.diff(0), u.diff(1), zero)
    eta = beta + (du_surface - gamma) * z + DifferentialForm.one_form(zero, zero, u)
    defect = defect_polynomial(eta)
    d0 = _restrict_z0(defect)
    u0 = div_x
    expected = u0 * u0 + wedge(beta, gamma)[2]
    ok = d0 == expected
    if check:
        g = np.linspace(-1, 1, n_check)
        gx, gy = np.meshgrid(g, g, indexing="ij")
        gz = np.zeros_like(gx)
        vals = d0.lambdify()(gx, gy, gz)
        sing = (x1 * x1 + x2 * x2 + div_x * div_x).lambdify()(gx, gy, gz)
        scale = max(1.0, float(np.abs(vals).max()))
        bad = (vals < -tol * scale) | ((vals <= tol * scale) & (sing > 1e-6))
        if bad.any():
            i = np.argwhere(bad)[0]
            raise TransversalityFailure(
                f"z = 0 defect not positive off the singular set, e.g. at "
                f"({gx[tuple(i)]:.3g}, {gy[tuple(i)]:.3g}): {vals[tuple(i)]:.3g}"
            )
    return SurfaceConstruction(X, Y, eta, u, beta, gamma, d0, ok)


@dataclass
class TangencyReport:
    z0: float
    n_samples: int
    max_normal_component: float
    field_scale: float
    worst_point: Optional[tuple[float, float, float]]
    plane_tangency: float
    passed: bool
    tolerance: float

    def to_json(self) -> dict:
        return {
            "z0": self.z0,
            "n_samples": self.n_samples,
            "max_normal_component": float(f"{self.max_normal_component:.6g}"),
            "field_scale": float(f"{self.field_scale:.6g}"),
            "worst_point": None if self.worst_point is None else [round(v, 9) for v in self.worst_point],
            "plane_tangency": float(f"{self.plane_tangency:.6g}"),
            "passed": self.passed,
            "tolerance": self.tolerance,
        }


def reeb_tangency_check(eta, z0: float = 0.0, extent: Sequence[tuple[float, float]] = ((-1, 1), (-1, 1)),
                        n: int = 101, tol: float = 1e-8, exclude: float = 1e-6) -> TangencyReport:
    """Max |<R, d/dz>| on the plane z = z0 for the Reeb-like direction R = curl(eta).

    ``plane_tangency`` is max |(eta_x, eta_y)| / |eta| on the same samples:
    zero when the plane field itself is tangent to the surface.
    """
    if isinstance(eta, DifferentialForm):
        fn = eta.lambdify()
        curl = ext_d(eta).lambdify()
        val = lambda p: fn(p[:, 0], p[:, 1], p[:, 2])  # noqa: E731
        rot = lambda p: curl(p[:, 0], p[:, 1], p[:, 2])  # noqa: E731
    else:
        val, rot = eta.value, eta.curl
    gx, gy = np.meshgrid(np.linspace(*extent[0], n), np.linspace(*extent[1], n), indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel(), np.full(gx.size, float(z0))], 1)
    e = val(pts)
    R = rot(pts)
    en = np.linalg.norm(e, axis=1)
    keep = en > exclude * max(1.0, float(en.max()))
    scale = float(np.linalg.norm(R, axis=1).max()) or 1.0
    comp = np.abs(R[keep, 2])
    worst = None
    mx = 0.0
    if comp.size:
        i = int(np.argmax(comp))
        mx = float(comp[i])
        worst = tuple(float(v) for v in pts[keep][i])
    tang = float(np.max(np.linalg.norm(e[keep, :2], axis=1) / en[keep])) if keep.any() else 0.0
    return TangencyReport(float(z0), int(keep.sum()), mx, scale, worst, tang,
                          mx < tol * scale, tol)


def slab_semidefinite(construction: SurfaceConstruction, half_width: float = 0.25, n: int = 25,
                      extent: float = 1.0) -> str:
    """Sign verdict of the defect sampled on [-extent, extent]^2 x [-w, w]."""
    g = np.linspace(-extent, extent, n)
    zz = np.linspace(-half_width, half_width, n)
    gx, gy, gz = np.meshgrid(g, g, zz, indexing="ij")
    vals = defect_polynomial(construction.eta).lambdify()(gx, gy, gz)
    if vals.min() >= -1e-12:
        return "positive-semidefinite"
    if vals.max() <= 1e-12:
        return "negative-semidefinite"
    return "indefinite"

