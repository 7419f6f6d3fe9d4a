"""Closed-form field families: ABC flows, the singular Lutz family, and a
plane field tangent to a boundary torus.

Expressions are held as sympy trees and compiled to numpy once; derivatives
are symbolic, so Jacobians and curls are exact up to float evaluation.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import sympy as sp

from .germ import numeric_index

X, Y, Z = sp.symbols("x y z", real=True)
TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class Domain:
    """Where a field lives.  ``periods[i]`` is None for a non-periodic axis."""

    kind: str  # "torus", "solid-torus", "slab", "R3"
    periods: tuple[Optional[float], Optional[float], Optional[float]] = (None, None, None)
    disk_radius: Optional[float] = None
    z_range: Optional[tuple[float, float]] = None

    def wrap(self, p: np.ndarray) -> np.ndarray:
        p = np.array(p, dtype=float, copy=True)
        for i, per in enumerate(self.periods):
            if per:
                p[..., i] = np.mod(p[..., i], per)
        return p

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "periods": list(self.periods),
            "disk_radius": self.disk_radius,
            "z_range": list(self.z_range) if self.z_range else None,
        }


R3 = Domain("R3")
TORUS = Domain("torus", (TWO_PI, TWO_PI, TWO_PI))


def _compile(exprs):
    f = sp.lambdify((X, Y, Z), list(exprs), modules="numpy")

    def call(p):
        p = np.asarray(p, dtype=float)
        out = f(p[..., 0], p[..., 1], p[..., 2])
        return np.stack([np.broadcast_to(np.asarray(o, dtype=float), p.shape[:-1]) for o in out], axis=-1)

    return call


class FieldEvaluator:
    """Smooth vector field or 1-form on a region of R^3 with analytic derivatives.

    ``kind`` is "vector" or "form"; for a 1-form the components are
    coefficients of dx, dy, dz and ``curl`` gives d(eta) in the cyclic
    2-form basis.
    """

    def __init__(self, exprs: Sequence, kind: str = "vector", name: str = "",
                 params: Optional[dict] = None, domain: Domain = R3,
                 kernel: Optional[tuple[str, tuple[float, ...]]] = None):
        if kind not in ("vector", "form"):
            raise ValueError("kind must be 'vector' or 'form'")
        self.exprs = tuple(sp.sympify(e) for e in exprs)
        self.kind = kind
        self.name = name
        self.params = dict(params or {})
        self.domain = domain
        self.kernel = kernel
        jac = sp.Matrix([[sp.diff(e, v) for v in (X, Y, Z)] for e in self.exprs])
        self.jacobian_exprs = jac
        self.curl_exprs = (
            jac[2, 1] - jac[1, 2],
            jac[0, 2] - jac[2, 0],
            jac[1, 0] - jac[0, 1],
        )
        self._value = _compile(self.exprs)
        self._jac = _compile(list(jac))
        self._curl = _compile(self.curl_exprs)

    def __repr__(self):
        return f"FieldEvaluator({self.name or self.kind}, params={self.params})"

    def value(self, p) -> np.ndarray:
        return self._value(p)

    __call__ = value

    def jacobian(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return self._jac(p).reshape(p.shape[:-1] + (3, 3))

    def curl(self, p) -> np.ndarray:
        return self._curl(p)

    def divergence(self, p) -> np.ndarray:
        j = self.jacobian(p)
        return j[..., 0, 0] + j[..., 1, 1] + j[..., 2, 2]

    def defect(self, p) -> np.ndarray:
        """eta ^ d eta / volume = eta . curl eta."""
        return np.einsum("...i,...i->...", self.value(p), self.curl(p))

    def reeb_like(self, name: str = "") -> "FieldEvaluator":
        """Unnormalised kernel of d eta (its Euclidean dual)."""
        kernel = None
        if self.kernel and self.kernel[0] == "lutz_form":
            kernel = ("lutz", self.kernel[1])
        elif self.kernel and self.kernel[0] == "abc":
            kernel = self.kernel
        return FieldEvaluator(self.curl_exprs, "vector", name or f"reeb({self.name})",
                              self.params, self.domain, kernel)

    def as_vector(self) -> "FieldEvaluator":
        return FieldEvaluator(self.exprs, "vector", self.name, self.params, self.domain, self.kernel)

    def index_at(self, center, radius: float):
        return numeric_index(self, center=center, radius=radius)

    # -- export -----------------------------------------------------------
    def lattice(self, n: int | Sequence[int], bounds=None) -> np.ndarray:
        ns = (n, n, n) if isinstance(n, int) else tuple(n)
        if bounds is None:
            bounds = default_bounds(self.domain)
        axes = [np.linspace(lo, hi, k) for (lo, hi), k in zip(bounds, ns)]
        g = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        return g.reshape(-1, 3)

    def to_csv(self, n: int | Sequence[int], bounds=None, path: str | Path | None = None) -> str:
        pts = self.lattice(n, bounds)
        vals = self.value(pts)
        head = ["x", "y", "z"] + (["vx", "vy", "vz"] if self.kind == "vector" else ["ex", "ey", "ez"])
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(head)
        for p, v in zip(pts, vals):
            w.writerow([f"{c:.12g}" for c in (*p, *v)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text


def default_bounds(domain: Domain):
    if domain.kind == "torus":
        return [(0.0, TWO_PI)] * 3
    if domain.kind == "solid-torus":
        r = domain.disk_radius or 1.0
        return [(-r, r), (-r, r), (0.0, TWO_PI)]
    if domain.kind == "slab":
        lo, hi = domain.z_range or (0.0, 1.0)
        return [(0.0, TWO_PI), (0.0, TWO_PI), (lo, hi)]
    return [(-1.0, 1.0)] * 3


def fd_jacobian(f, p: np.ndarray, h: float = 1e-5) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    cols = []
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        cols.append((f(p + e) - f(p - e)) / (2 * h))
    return np.stack(cols, axis=-1)


# ---------------------------------------------------------------------------
# ABC

def abc_field(A: float = 1.0, B: float = 1.0, C: float = 1.0) -> FieldEvaluator:
    if min(A, B, C) < 0:
        raise ValueError("ABC parameters must be non-negative")
    exprs = (
        A * sp.sin(Z) + C * sp.cos(Y),
        B * sp.sin(X) + A * sp.cos(Z),
        C * sp.sin(Y) + B * sp.cos(X),
    )
    return FieldEvaluator(exprs, "vector", "abc", {"A": A, "B": B, "C": C}, TORUS,
                          ("abc", (float(A), float(B), float(C))))


@dataclass
class AbcZero:
    location: tuple[float, float, float]
    jacobian_eigenvalues: list[complex]
    morse_index: Optional[int]
    index: int  # sign det J, 0 when degenerate
    degenerate: bool

    def to_json(self) -> dict:
        return {
            "location": [round(v, 10) for v in self.location],
            "jacobian_eigenvalues": [[round(e.real, 10), round(e.imag, 10)] for e in self.jacobian_eigenvalues],
            "morse_index": self.morse_index,
            "index": self.index,
            "degenerate": self.degenerate,
        }


@dataclass
class AbcClassification:
    A: float
    B: float
    C: float
    zeros: list[AbcZero]
    regime: str
    tightness: str
    newton_failures: int = 0
    zero_line_detected: bool = False

    @property
    def index_sum(self) -> int:
        return sum(z.index for z in self.zeros)

    def to_json(self) -> dict:
        return {
            "A": self.A,
            "B": self.B,
            "C": self.C,
            "B2_plus_C2": round(self.B ** 2 + self.C ** 2, 12),
            "regime": self.regime,
            "tightness": self.tightness,
            "zero_count": len(self.zeros),
            "index_sum": self.index_sum,
            "zero_line_detected": self.zero_line_detected,
            "newton_failures": self.newton_failures,
            "zeros": [z.to_json() for z in self.zeros],
        }


def _newton_zeros(ev: FieldEvaluator, seeds: np.ndarray, tol: float = 1e-12, max_iter: int = 50,
                  accept: float = 1e-10):
    """Vectorised damped Gauss-Newton from every seed; returns (points, converged)."""
    p = seeds.copy()
    for _ in range(max_iter):
        v = ev.value(p)
        if np.all(np.linalg.norm(v, axis=1) < tol):
            break
        J = ev.jacobian(p)
        step = np.einsum("nij,nj->ni", np.linalg.pinv(J, rcond=1e-12), v)
        step = np.clip(step, -0.5, 0.5)
        p = p - step
    res = np.linalg.norm(ev.value(p), axis=1)
    return p, res < accept


def abc_classify(A: float = 1.0, B: float = 1.0, C: float = 1.0, grid: int = 16,
                 dedupe: float = 1e-6) -> AbcClassification:
    """Locate and classify the zeros of the ABC field in one periodic cell."""
    if not (A >= B >= C >= 0):
        raise ValueError("expected A >= B >= C >= 0")
    ev = abc_field(A, B, C)
    axis = (np.arange(grid) + 0.5) * TWO_PI / grid
    seeds = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
    pts, ok = _newton_zeros(ev, seeds)
    failures = int(np.sum(~ok))
    found: list[np.ndarray] = []
    for q in TORUS.wrap(pts[ok]):
        q = np.where(np.abs(q - TWO_PI) < 1e-9, 0.0, q)
        if not any(_torus_dist(q, r) < max(dedupe, 1e-5) for r in found):
            found.append(q)
    found.sort(key=lambda q: tuple(np.round(q, 6)))
    zeros = []
    for q in found:
        J = ev.jacobian(q)
        det = float(np.linalg.det(J))
        sym = (J + J.T) / 2
        eig_sym = np.linalg.eigvalsh(sym)
        degenerate = float(np.linalg.svd(J, compute_uv=False)[-1]) < 1e-6
        morse = None if degenerate else int(np.sum(eig_sym < 0))
        eig = sorted(np.linalg.eigvals(J).tolist(), key=lambda e: (round(e.real, 9), round(e.imag, 9)))
        zeros.append(AbcZero(tuple(float(v) for v in q), eig, morse,
                             0 if degenerate else int(np.sign(det)), degenerate))
    s = B * B + C * C
    boundary = abs(s - 1.0) <= 1e-9
    if not zeros:
        regime = "nonsingular"
    elif boundary or all(z.degenerate for z in zeros):
        regime = "degenerate-boundary"
    else:
        regime = "singular"
    tight = "tight" if s <= 1.0 + 1e-9 else "overtwisted"
    line = any(_on_zero_curve(ev, np.array(z.location)) for z in zeros if z.degenerate)
    return AbcClassification(A, B, C, zeros, regime, tight, failures, line)


def _on_zero_curve(ev: FieldEvaluator, q: np.ndarray, step: float = 0.05) -> bool:
    """True when Newton from q + step * (null direction of J) lands on a different zero."""
    _, _, vt = np.linalg.svd(ev.jacobian(q))
    p, ok = _newton_zeros(ev, (q + step * vt[-1])[None, :])
    return bool(ok[0]) and _torus_dist(p[0], q) > step / 2


def _torus_dist(p, q) -> float:
    d = np.abs(np.asarray(p) - np.asarray(q)) % TWO_PI
    d = np.minimum(d, TWO_PI - d)
    return float(np.linalg.norm(d))


# ---------------------------------------------------------------------------
# singular Lutz family

def lutz_family(s: float, t: float) -> FieldEvaluator:
    """eta_s = f dz + x dx - y dy + t (f (x dy - y dx) + 2xy dz), f = s - cos(z)/2."""
    if t == 0:
        raise ValueError("t must be nonzero")
    f = s - sp.cos(Z) / 2
    exprs = (X - t * f * Y, -Y + t * f * X, f + 2 * t * X * Y)
    dom = Domain("solid-torus", (None, None, TWO_PI), disk_radius=1.0)
    return FieldEvaluator(exprs, "form", "lutz", {"s": s, "t": t}, dom, ("lutz_form", (float(s), float(t))))


def lutz_defect_closed_form(s: float, t: float, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    f = s - 0.5 * np.cos(z)
    return 2 * t * (f ** 2 + (1 - 0.25 * np.sin(z)) * x ** 2 + (1 + 0.25 * np.sin(z)) * y ** 2)


def lutz_singular_points(s: float, tol: float = 1e-12) -> list[tuple[float, float, float]]:
    """Zeros on the core: x = y = 0, cos z = 2s (z in [0, 2 pi))."""
    c = 2 * s
    if abs(c) > 1 + tol:
        return []
    if abs(abs(c) - 1) <= tol:
        return [(0.0, 0.0, 0.0 if c > 0 else math.pi)]
    z0 = math.acos(c)
    return [(0.0, 0.0, z0), (0.0, 0.0, TWO_PI - z0)]


def _bump(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    m = u > 0
    out[m] = np.exp(-1.0 / u[m])
    return out


def _bump_d(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    m = u > 0
    out[m] = np.exp(-1.0 / u[m]) / u[m] ** 2
    return out


def smoothstep(r, a: float = 0.2, b: float = 0.8):
    """C-infinity step: 0 for r <= a, 1 for r >= b."""
    u = (np.asarray(r, dtype=float) - a) / (b - a)
    e0, e1 = _bump(u), _bump(1 - u)
    return e0 / (e0 + e1)


def smoothstep_d(r, a: float = 0.2, b: float = 0.8):
    u = (np.asarray(r, dtype=float) - a) / (b - a)
    e0, e1 = _bump(u), _bump(1 - u)
    d0, d1 = _bump_d(u), -_bump_d(1 - u)
    return (d0 * (e0 + e1) - e0 * (d0 + d1)) / (e0 + e1) ** 2 / (b - a)


def lutz_h_profile(r):
    """(h1, h2) = sqrt(1 + r^4) (cos psi, sin psi), psi = pi + atan(r^2) + pi * step(r).

    Equals (-1, -r^2) for r <= 0.2 and (1, r^2) for r >= 0.8; the winding
    angle psi is increasing, so h1 h2' - h2 h1' = 2r + pi (1 + r^4) step'(r) > 0.
    """
    r = np.asarray(r, dtype=float)
    rho = np.sqrt(1 + r ** 4)
    psi = math.pi + np.arctan(r ** 2) + math.pi * smoothstep(r)
    return rho * np.cos(psi), rho * np.sin(psi)


def lutz_h_profile_derivative(r):
    r = np.asarray(r, dtype=float)
    rho = np.sqrt(1 + r ** 4)
    drho = 2 * r ** 3 / rho
    psi = math.pi + np.arctan(r ** 2) + math.pi * smoothstep(r)
    dpsi = 2 * r / (1 + r ** 4) + math.pi * smoothstep_d(r)
    c, s = np.cos(psi), np.sin(psi)
    return drho * c - rho * s * dpsi, drho * s + rho * c * dpsi


def lutz_h_determinant(r):
    h1, h2 = lutz_h_profile(r)
    d1, d2 = lutz_h_profile_derivative(r)
    return h1 * d2 - h2 * d1


# ---------------------------------------------------------------------------
# tangent-boundary example on T^2 x [0, 1]

def tangent_boundary_example() -> FieldEvaluator:
    """cos(z) dz + sin(z) (cos(z) dx + sin(z) dy); tangent to the torus z = 0."""
    exprs = (sp.sin(Z) * sp.cos(Z), sp.sin(Z) ** 2, sp.cos(Z))
    dom = Domain("slab", (TWO_PI, TWO_PI, None), z_range=(0.0, 1.0))
    return FieldEvaluator(exprs, "form", "tangent-boundary", {}, dom)


__all__ = [
    "FieldEvaluator", "Domain", "abc_field", "abc_classify", "AbcClassification", "AbcZero",
    "lutz_family", "lutz_defect_closed_form", "lutz_singular_points", "lutz_h_profile",
    "lutz_h_profile_derivative", "lutz_h_determinant", "tangent_boundary_example",
    "smoothstep", "fd_jacobian", "TORUS", "R3",
]
