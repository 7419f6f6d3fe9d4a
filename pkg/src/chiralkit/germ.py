"""Function germs at the origin: Hessian data, index, Beltrami obstructions."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .errors import NonCriticalOrigin, NonIntegralDegree, ZeroOnSphere
from .polyform import DifferentialForm, Polynomial, PolyVectorField, laplacian, parse_polynomial

ORIGIN = (0, 0, 0)


# ---------------------------------------------------------------------------
# exact linear algebra over Q

def rational_rank(m: Sequence[Sequence[Fraction]]) -> int:
    rows = [list(map(Fraction, r)) for r in m]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    for col in range(ncols):
        pivot = next((i for i in range(rank, len(rows)) if rows[i][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i][col] != 0:
                k = rows[i][col] / rows[rank][col]
                rows[i] = [a - k * b for a, b in zip(rows[i], rows[rank])]
        rank += 1
    return rank


def rational_kernel(m: Sequence[Sequence[Fraction]]) -> list[list[Fraction]]:
    """Basis of the null space, exact."""
    rows = [list(map(Fraction, r)) for r in m]
    n = len(rows[0])
    pivots = []
    r = 0
    for col in range(n):
        piv = next((i for i in range(r, len(rows)) if rows[i][col] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        lead = rows[r][col]
        rows[r] = [a / lead for a in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][col] != 0:
                k = rows[i][col]
                rows[i] = [a - k * b for a, b in zip(rows[i], rows[r])]
        pivots.append(col)
        r += 1
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for fcol in free:
        v = [Fraction(0)] * n
        v[fcol] = Fraction(1)
        for i, pcol in enumerate(pivots):
            v[pcol] = -rows[i][fcol]
        basis.append(v)
    return basis


def _det3(m) -> Fraction:
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


def inertia(m) -> tuple[int, int, int]:
    """(n_positive, n_negative, n_zero) of a symmetric rational 3x3 matrix.

    The characteristic polynomial of a symmetric matrix is real-rooted, so
    Descartes' sign count is exact.
    """
    tr = m[0][0] + m[1][1] + m[2][2]
    c2 = (
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
        + m[0][0] * m[2][2] - m[0][2] * m[2][0]
        + m[1][1] * m[2][2] - m[1][2] * m[2][1]
    )
    det = _det3(m)
    coeffs = [Fraction(1), -tr, c2, -det]
    zeros = 0
    while coeffs and coeffs[-1] == 0:
        coeffs.pop()
        zeros += 1
    signs = [c > 0 for c in coeffs if c != 0]
    pos = sum(1 for a, b in zip(signs, signs[1:]) if a != b)
    return pos, 3 - zeros - pos, zeros


@dataclass(frozen=True)
class HessianData:
    matrix: tuple[tuple[Fraction, ...], ...]
    corank: int
    trace: Fraction
    n_positive: int
    n_negative: int

    @property
    def morse_index(self) -> Optional[int]:
        return self.n_negative if self.corank == 0 else None

    def as_float(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.matrix])


def gradient_at_origin(phi: Polynomial) -> tuple[Fraction, Fraction, Fraction]:
    return tuple(phi.diff(i).evaluate_exact(ORIGIN) for i in range(3))


def hessian_at_origin(phi: Polynomial) -> HessianData:
    if any(gradient_at_origin(phi)):
        raise NonCriticalOrigin(f"gradient of {phi} is nonzero at the origin")
    h = tuple(
        tuple(phi.diff(i).diff(j).evaluate_exact(ORIGIN) for j in range(3)) for i in range(3)
    )
    pos, neg, zero = inertia(h)
    corank = 3 - rational_rank(h)
    assert corank == zero
    return HessianData(h, corank, h[0][0] + h[1][1] + h[2][2], pos, neg)


# ---------------------------------------------------------------------------
# degree of the Gauss map

def _vector_functions(X) -> tuple[Callable, Callable]:
    """Return (value, jacobian) callables acting on (..., 3) point arrays."""
    if isinstance(X, Polynomial):
        X = X.gradient()
    if isinstance(X, DifferentialForm):
        X = PolyVectorField(*X.components)
    if isinstance(X, PolyVectorField):
        f = X.lambdify()
        j = X.lambdify_jacobian()
        return (lambda p: f(p[..., 0], p[..., 1], p[..., 2]),
                lambda p: j(p[..., 0], p[..., 1], p[..., 2]))
    if hasattr(X, "value") and hasattr(X, "jacobian"):
        return X.value, X.jacobian
    if callable(X):
        def jac(p, h=1e-6):
            cols = []
            for k in range(3):
                e = np.zeros(3)
                e[k] = h
                cols.append((X(p + e) - X(p - e)) / (2 * h))
            return np.stack(cols, axis=-1)
        return X, jac
    raise TypeError(f"cannot evaluate {type(X).__name__} as a vector field")


@dataclass(frozen=True)
class IndexResult:
    index: int
    residual: float
    raw: float
    grid: tuple[int, int]

    def __iter__(self):
        return iter((self.index, self.residual))


def degree_integral(X, center=ORIGIN, radius: float = 1.0, n_theta: int = 200,
                    n_phi: int = 400, zero_tol: float = 1e-9) -> float:
    value, jac = _vector_functions(X)
    c = np.asarray(center, dtype=float)
    th = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    ph = (np.arange(n_phi) + 0.5) * 2 * np.pi / n_phi
    cp, sp = np.cos(ph), np.sin(ph)
    total = 0.0
    vmin, vmax = np.inf, 0.0
    chunk = max(1, 200_000 // n_phi)
    for start in range(0, n_theta, chunk):
        t = th[start:start + chunk, None]
        ct, st = np.cos(t), np.sin(t)
        n = np.stack(np.broadcast_arrays(st * cp, st * sp, ct + 0 * cp), axis=-1)
        p = c + radius * n
        d_th = radius * np.stack(np.broadcast_arrays(ct * cp, ct * sp, -st + 0 * cp), axis=-1)
        d_ph = radius * np.stack(np.broadcast_arrays(-st * sp, st * cp, 0 * st * cp), axis=-1)
        v = value(p)
        J = jac(p)
        a = np.einsum("...ij,...j->...i", J, d_th)
        b = np.einsum("...ij,...j->...i", J, d_ph)
        norm = np.linalg.norm(v, axis=-1)
        vmin = min(vmin, float(norm.min()))
        vmax = max(vmax, float(norm.max()))
        with np.errstate(divide="ignore", invalid="ignore"):
            integrand = np.einsum("...i,...i->...", v, np.cross(a, b)) / norm ** 3
        total += float(np.sum(integrand))
    if not vmin > zero_tol * max(vmax, 1.0):
        raise ZeroOnSphere(
            f"field nearly vanishes on sphere r={radius} (min |X| = {vmin:.3g})"
        )
    return total * (np.pi / n_theta) * (2 * np.pi / n_phi) / (4 * np.pi)


def _min_norm_on_sphere(X, center, radius: float, n: int = 4000) -> float:
    """Local minimisation of |X| over the sphere from the best of n Fibonacci points."""
    from scipy.optimize import minimize

    value, _ = _vector_functions(X)
    c = np.asarray(center, dtype=float)
    k = np.arange(n) + 0.5
    th = np.arccos(1 - 2 * k / n)
    ph = np.pi * (1 + 5 ** 0.5) * k

    def pts(a, b):
        return c + radius * np.stack([np.sin(a) * np.cos(b), np.sin(a) * np.sin(b), np.cos(a)], -1)

    norms = np.linalg.norm(value(pts(th, ph)), axis=-1)
    best = np.argsort(norms)[:8]
    scale = max(float(norms.max()), 1.0)
    out = float(norms.min())
    for i in best:
        r = minimize(lambda v: float(np.linalg.norm(value(pts(v[0], v[1])[None])[0])),
                     [th[i], ph[i]], method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-14})
        out = min(out, float(r.fun))
    return out / scale


def numeric_index(X, center=ORIGIN, radius: float = 1.0, n_theta: int = 200,
                  n_phi: int = 400, max_theta: int = 1600, tol: float = 0.05) -> IndexResult:
    """Degree of X/|X| over a sphere by lat-long midpoint quadrature.

    Accepts a PolyVectorField, a Polynomial (its gradient is used), an
    evaluator exposing ``value``/``jacobian``, or a plain callable.
    """
    while True:
        raw = degree_integral(X, center, radius, n_theta, n_phi)
        k = int(round(raw))
        res = abs(raw - k)
        if res < tol:
            return IndexResult(k, res, raw, (n_theta, n_phi))
        if n_theta * 2 > max_theta:
            if _min_norm_on_sphere(X, center, radius) < 1e-8:
                raise ZeroOnSphere(f"field vanishes on the sphere r={radius}; degree integral {raw:.4f}")
            raise NonIntegralDegree(
                f"degree integral {raw:.4f} not within {tol} of an integer at "
                f"{n_theta}x{n_phi}; refine the grid or shrink the radius"
            )
        n_theta *= 2
        n_phi *= 2


def preimage_degree(X, center=ORIGIN, radius: float = 1.0, level: int = 6,
                    n_values: int = 5, seed: int = 0) -> list[int]:
    """Brute-force degree: signed count of sphere triangles covering regular values.

    Returns one count per sampled target direction; they agree when the mesh
    resolves the map.
    """
    from .meshes import icosphere

    value, _ = _vector_functions(X)
    mesh = icosphere(level)
    pts = np.asarray(center, dtype=float) + radius * mesh.vertices
    v = value(pts)
    v = v / np.linalg.norm(v, axis=1, keepdims=True)
    a, b, c = v[mesh.faces[:, 0]], v[mesh.faces[:, 1]], v[mesh.faces[:, 2]]
    orient = np.sign(np.einsum("ij,ij->i", a, np.cross(b, c)))
    rng = np.random.default_rng(seed)
    counts = []
    for _ in range(n_values):
        w = rng.normal(size=3)
        w /= np.linalg.norm(w)
        s1 = np.einsum("ij,j->i", np.cross(a, b), w)
        s2 = np.einsum("ij,j->i", np.cross(b, c), w)
        s3 = np.einsum("ij,j->i", np.cross(c, a), w)
        same = ((s1 > 0) & (s2 > 0) & (s3 > 0)) | ((s1 < 0) & (s2 < 0) & (s3 < 0))
        front = (a + b + c) @ w > 0
        hit = same & front
        counts.append(int(np.sum(orient[hit])))
    return counts


# ---------------------------------------------------------------------------
# obstructions

OBSTRUCTIONS = ("none-found", "corank2", "nonzero-trace", "spherical-level-sets")


def _has_spherical_level_sets(phi: Polynomial, h: HessianData) -> bool:
    if h.corank == 0:
        return h.n_negative in (0, 3)
    if h.corank != 1 or h.n_positive not in (0, 2):
        return False
    # A_k shape: definite in two directions, restriction to the kernel line
    # starts with an even power of the same sign.
    (v,) = rational_kernel(h.matrix)
    x, y, z = Polynomial.variables()
    line = [Polynomial.const(c) for c in v]
    # phi(s v) as a univariate polynomial in the first variable slot
    s = x
    restricted = Polynomial()
    for (a, b, c), coef in phi.terms.items():
        restricted = restricted + coef * (line[0] * s) ** a * (line[1] * s) ** b * (line[2] * s) ** c
    if restricted.is_zero():
        return False
    low = restricted.min_degree
    lead = restricted.coefficient((low, 0, 0))
    sign_ok = lead > 0 if h.n_positive == 2 else lead < 0
    return low % 2 == 0 and sign_ok


def beltrami_obstruction(phi: Polynomial) -> str:
    h = hessian_at_origin(phi)
    if h.corank == 2:
        return "corank2"
    if _has_spherical_level_sets(phi, h):
        return "spherical-level-sets"
    if h.trace != 0:
        return "nonzero-trace"
    return "none-found"


def is_harmonic(phi: Polynomial) -> bool:
    return laplacian(phi).is_zero()


# ---------------------------------------------------------------------------
# catalog and reports

@dataclass(frozen=True)
class GermCatalogEntry:
    name: str
    phi: Polynomial
    expected_index: Optional[int]
    notes: str = ""
    perturbation: Optional[DifferentialForm] = None
    index_radius: float = 1.0

    def to_json(self) -> dict:
        d = {
            "name": self.name,
            "phi": str(self.phi),
            "expected_index": self.expected_index,
            "notes": self.notes,
            "index_radius": self.index_radius,
        }
        if self.perturbation is not None:
            d["perturbation"] = self.perturbation.to_json()
        return d

    @classmethod
    def from_json(cls, d: dict) -> "GermCatalogEntry":
        pert = d.get("perturbation")
        if isinstance(pert, dict) and "degree" not in pert:
            pert = DifferentialForm.one_form(
                *(parse_polynomial(pert.get(k, "0")) for k in ("dx", "dy", "dz"))
            )
        elif isinstance(pert, dict):
            pert = DifferentialForm.from_json(pert)
        return cls(
            name=d["name"],
            phi=parse_polynomial(d["phi"]) if isinstance(d["phi"], str) else Polynomial.from_json(d["phi"]),
            expected_index=d.get("expected_index"),
            notes=d.get("notes", ""),
            perturbation=pert,
            index_radius=float(d.get("index_radius", 1.0)),
        )


@lru_cache(maxsize=1)
def load_catalog() -> dict[str, GermCatalogEntry]:
    text = resources.files("chiralkit").joinpath("catalog.json").read_text()
    return {d["name"]: GermCatalogEntry.from_json(d) for d in json.loads(text)["germs"]}


def catalog_entry(name: str) -> GermCatalogEntry:
    cat = load_catalog()
    if name not in cat:
        raise KeyError(f"unknown catalog germ {name!r}; known: {', '.join(sorted(cat))}")
    return cat[name]


@dataclass
class SingularityReport:
    location: tuple[float, float, float]
    hessian: tuple[tuple[Fraction, ...], ...]
    corank: int
    hessian_trace: Fraction
    morse_index: Optional[int]
    numeric_index: Optional[int]
    index_residual: Optional[float]
    laplacian: Polynomial
    harmonic: bool
    chirality_verdict: str
    beltrami_obstruction: str
    beltrami_verdict: str
    name: str = ""
    phi: Optional[Polynomial] = None
    extras: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict:
        fr = lambda v: f"{v.numerator}/{v.denominator}"  # noqa: E731
        return {
            "name": self.name,
            "phi": str(self.phi) if self.phi is not None else None,
            "location": list(self.location),
            "hessian": [[fr(v) for v in row] for row in self.hessian],
            "corank": self.corank,
            "hessian_trace": fr(self.hessian_trace),
            "morse_index": self.morse_index,
            "numeric_index": self.numeric_index,
            "index_residual": None if self.index_residual is None else round(self.index_residual, 10),
            "laplacian": str(self.laplacian),
            "harmonic": self.harmonic,
            "chirality_verdict": self.chirality_verdict,
            "beltrami_obstruction": self.beltrami_obstruction,
            "beltrami_verdict": self.beltrami_verdict,
            **self.extras,
        }


def analyze_germ(phi: Polynomial, name: str = "", radius: float | None = None,
                 perturbation: DifferentialForm | None = None) -> SingularityReport:
    """Full report for a critical point of phi at the origin."""
    from .chirality import chiral_perturb, contact_defect

    h = hessian_at_origin(phi)
    if radius is None:
        radius = 1.0
    try:
        idx = numeric_index(phi.gradient(), radius=radius)
        index, residual = idx.index, idx.residual
    except (ZeroOnSphere, NonIntegralDegree):
        index, residual = None, None
    obstruction = beltrami_obstruction(phi)
    harmonic = is_harmonic(phi)
    if obstruction == "spherical-level-sets":
        chir = "achiral-spherical"
    elif harmonic:
        chir = "chiral"  # the explicit perturbation certifies it
    elif perturbation is not None:
        dphi = phi.gradient()
        eta = DifferentialForm.one_form(*dphi.components) + perturbation * Fraction(1, 10)
        verdict = contact_defect(eta).sign_verdict
        chir = "chiral" if verdict in ("positive-semidefinite", "negative-semidefinite") else "undetermined"
    else:
        chir = "undetermined"
    if obstruction != "none-found":
        belt = "not-beltrami"
    elif harmonic:
        belt = "beltrami"
    else:
        belt = "undetermined"
    extras = {}
    if harmonic:
        nu = chiral_perturb(phi)
        extras["chiral_perturbation"] = nu.to_json()
    return SingularityReport(
        location=(0.0, 0.0, 0.0),
        hessian=h.matrix,
        corank=h.corank,
        hessian_trace=h.trace,
        morse_index=h.morse_index,
        numeric_index=index,
        index_residual=residual,
        laplacian=laplacian(phi),
        harmonic=harmonic,
        chirality_verdict=chir,
        beltrami_obstruction=obstruction,
        beltrami_verdict=belt,
        name=name,
        phi=phi,
        extras=extras,
    )


def analyze_catalog_entry(entry: GermCatalogEntry) -> SingularityReport:
    return analyze_germ(entry.phi, entry.name, entry.index_radius, entry.perturbation)
