"""Pointwise star operators with *alpha = beta, and the explicit Morse metric.

Matrices act on component vectors: a 1-form (a1, a2, a3) in dx, dy, dz is
sent to a 2-form in dy^dz, dz^dx, dx^dy.  For a metric g on vectors the
star of 1-forms is sqrt(det g) g^{-1}; conversely a star matrix M comes
from the metric adj(M).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import WrongSign
from .polyform import DifferentialForm, Polynomial, PolyVectorField, ext_d

SIGN_TOL = 1e-12


def _components_at(form, p) -> np.ndarray:
    if isinstance(form, (DifferentialForm, PolyVectorField)):
        fns = [c.lambdify() for c in form.components]
        return np.array([float(f(*p)) for f in fns])
    if callable(form):
        return np.asarray(form(np.asarray(p, dtype=float)), dtype=float)
    return np.asarray(form, dtype=float)


def kernel_frame(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(X1, X2, Y): Y spans ker beta, X1, X2 an oriented orthonormal basis of ker alpha.

    X1, X2 come from Gram-Schmidt on the two coordinate axes least aligned
    with alpha's dual vector; they are oriented so X1 x X2 points along alpha.
    """
    n = a / np.linalg.norm(a)
    order = np.argsort(np.abs(n), kind="stable")
    frame = []
    for k in order[:2]:
        e = np.zeros(3)
        e[k] = 1.0
        v = e - (e @ n) * n
        for w in frame:
            v -= (v @ w) * w
        frame.append(v / np.linalg.norm(v))
    x1, x2 = frame
    if np.cross(x1, x2) @ n < 0:
        x2 = -x2
    return x1, x2, b.copy()


def sqrt_psd(m: np.ndarray) -> np.ndarray:
    """Symmetric square root with eigenvalues clamped at 0."""
    w, v = np.linalg.eigh((m + m.T) / 2)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


@dataclass
class StarAtPoint:
    point: tuple[float, float, float]
    star: np.ndarray
    metric: np.ndarray
    eigenvalues: np.ndarray
    residual: float
    degenerate: bool
    alpha: np.ndarray = field(repr=False, default=None)
    beta: np.ndarray = field(repr=False, default=None)

    def apply(self, a) -> np.ndarray:
        return self.star @ np.asarray(a, dtype=float)

    def to_json(self) -> dict:
        return {
            "point": [float(v) for v in self.point],
            "star": np.round(self.star, 12).tolist(),
            "eigenvalues": np.round(self.eigenvalues, 12).tolist(),
            "residual": float(f"{self.residual:.6g}"),
            "degenerate": self.degenerate,
        }


def star_from_vectors(a: np.ndarray, b: np.ndarray, tol: float = SIGN_TOL):
    """Core construction on component vectors; returns (star, metric, degenerate)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    kappa = float(a @ b)  # alpha ^ beta = kappa dx^dy^dz
    scale = max(na * nb, 1e-300)
    if kappa < -tol * scale:
        raise WrongSign(f"alpha ^ beta = {kappa:.3g} < 0")
    if na == 0.0 or nb == 0.0 or kappa <= tol * scale:
        if nb > tol and na == 0.0:
            raise WrongSign("beta is nonzero where alpha vanishes")
        z = np.zeros((3, 3))
        return z, z.copy(), True
    x1, x2, y = kernel_frame(a, b)
    # beta restricted to ker alpha, polar part G = sqrt(A^T A)
    bmat = np.array([[0.0, b[2], -b[1]], [-b[2], 0.0, b[0]], [b[1], -b[0], 0.0]])
    frame = np.stack([x1, x2])
    A = frame @ bmat @ frame.T
    G = sqrt_psd(A.T @ A)
    # metric: G on ker alpha, kappa^2 along Y, block orthogonal in (X1, X2, Y)
    B = np.stack([x1, x2, y], axis=1)
    D = np.zeros((3, 3))
    D[:2, :2] = G
    D[2, 2] = kappa ** 2
    Binv = np.linalg.inv(B)
    metric = Binv.T @ D @ Binv
    metric = (metric + metric.T) / 2
    # star = sqrt(det g) g^{-1}; closed form |a| P_{a-perp} + b b^T / kappa
    star = na * (np.eye(3) - np.outer(a, a) / na ** 2) + np.outer(b, b) / kappa
    return (star + star.T) / 2, metric, False


def polar_star(alpha, beta, p, tol: float = SIGN_TOL) -> StarAtPoint:
    """Star matrix at p with star @ alpha(p) = beta(p), positive semidefinite."""
    p = tuple(float(v) for v in p)
    a = _components_at(alpha, p)
    b = _components_at(beta, p)
    star, metric, degenerate = star_from_vectors(a, b, tol)
    nb = np.linalg.norm(b)
    res = np.linalg.norm(star @ a - b) / nb if nb else np.linalg.norm(star @ a)
    return StarAtPoint(p, star, metric, np.linalg.eigvalsh(star), float(res), degenerate, a, b)


def metric_from_star(star: np.ndarray) -> np.ndarray:
    """Inverse of g -> sqrt(det g) g^{-1}: the adjugate, continuous at degeneracy."""
    m = np.asarray(star, dtype=float)
    cof = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            minor = np.delete(np.delete(m, i, 0), j, 1)
            cof[i, j] = (-1) ** (i + j) * np.linalg.det(minor)
    return cof.T


def star_of_metric(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    return np.sqrt(np.linalg.det(g)) * np.linalg.inv(g)


def star_of_cometric(h: np.ndarray) -> np.ndarray:
    """Star on 1-forms for an inverse metric h = g^{-1}: h / sqrt(det h)."""
    h = np.asarray(h, dtype=float)
    return h / np.sqrt(np.linalg.det(h))


# ---------------------------------------------------------------------------
# explicit metric for the Morse normal form

def morse_eta(t) -> DifferentialForm:
    """(x + t yz) dx + (y - t xz) dy - 2z dz."""
    t = Fraction(t)
    x, y, z = Polynomial.variables()
    return DifferentialForm.one_form(x + y * z * t, y - x * z * t, z * -2)


def morse_cometric_matrix(t: float, p) -> np.ndarray:
    """Unscaled matrix [[1, 0, ty/2], [0, 1, -tx/2], [ty/2, -tx/2, 1 + t^2 (x^2+y^2)/4]].

    Read as a metric on covectors it has determinant 1 and sends eta_t to
    (x, y, -2z), the Euclidean dual of the unperturbed gradient.
    """
    x, y, _ = (float(v) for v in p)
    return np.array([
        [1.0, 0.0, t * y / 2],
        [0.0, 1.0, -t * x / 2],
        [t * y / 2, -t * x / 2, 1.0 + t * t * (x * x + y * y) / 4],
    ])


def morse_scale(t: float, scale: str = "corrected") -> float:
    """Conformal factor on the cometric.

    "corrected" uses t^-2, which makes the star relation hold for every t;
    "uncorrected" uses t^(2/5), which agrees only at t = 1.
    """
    if scale == "corrected":
        return t ** -2
    if scale == "uncorrected":
        return t ** 0.4
    raise ValueError(f"unknown scale {scale!r}")


@dataclass
class MorseMetricReport:
    t: float
    scale: str
    n_points: int
    max_relative_error: float
    min_eigenvalue: float
    failures: list[dict]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "scale": self.scale,
            "n_points": self.n_points,
            "max_relative_error": float(f"{self.max_relative_error:.6g}"),
            "min_eigenvalue": float(f"{self.min_eigenvalue:.12g}"),
            "passed": self.passed,
            "failures": self.failures[:20],
            "n_failures": len(self.failures),
        }


def verify_compatible_metric_morse(t, points: Iterable[Sequence[float]], rel_tol: float = 1e-8,
                                   scale: str = "corrected") -> MorseMetricReport:
    """Check *_{g_t} eta_t = d eta_t pointwise for the explicit metric."""
    tf = float(t)
    eta = morse_eta(Fraction(t).limit_denominator(10**12) if isinstance(t, float) else Fraction(t))
    deta = ext_d(eta)
    ef = eta.lambdify()
    df = deta.lambdify()
    failures = []
    worst = 0.0
    min_eig = np.inf
    pts = [tuple(float(v) for v in p) for p in points]
    for p in pts:
        h = morse_cometric_matrix(tf, p)
        eig = np.linalg.eigvalsh(h)
        min_eig = min(min_eig, float(eig.min()))
        lam = morse_scale(tf, scale) if tf > 0 else 1.0
        a = ef(*p)
        b = df(*p)
        lhs = star_of_cometric(lam * h) @ a
        err = np.linalg.norm(lhs - b)
        denom = max(np.linalg.norm(b), np.linalg.norm(lhs))
        rel = err / denom if denom > 0 else 0.0
        worst = max(worst, rel)
        bad = []
        if rel >= rel_tol:
            bad.append("star")
        if eig.min() <= 0:
            bad.append("not-positive-definite")
        if bad:
            failures.append({"point": list(p), "relative_error": float(f"{rel:.6g}"), "checks": bad})
    return MorseMetricReport(tf, scale, len(pts), float(worst), float(min_eig), failures)


def random_ball_points(n: int, seed: int = 0, radius: float = 1.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    return d * (radius * rng.random(n) ** (1 / 3))[:, None]


__all__ = [
    "polar_star", "star_from_vectors", "kernel_frame", "sqrt_psd", "metric_from_star",
    "star_of_metric", "star_of_cometric", "morse_eta", "morse_cometric_matrix", "morse_scale",
    "verify_compatible_metric_morse", "MorseMetricReport", "StarAtPoint", "random_ball_points",
]
