"""Contact defect, chiral perturbations and the Beltrami power series."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import IndefiniteDefect, NotHarmonic
from .meshes import icosphere
from .polyform import (
    DifferentialForm,
    Polynomial,
    PolyVectorField,
    codifferential_function,
    ext_d,
    hodge_euclid,
    laplacian,
    poincare_homotopy,
    solve_poisson,
    wedge,
)

SAMPLE_RADII = (0.25, 0.5, 1.0)
SAMPLE_LEVEL = 4  # 2562 vertices
SIGN_TOL = 1e-10

VERDICTS = ("positive-semidefinite", "negative-semidefinite", "indefinite", "zero")


def _even_square_sign(p: Polynomial) -> Optional[int]:
    """+1/-1 if p is a one-signed combination of even monomials, else None."""
    if not all(a % 2 == 0 and b % 2 == 0 and c % 2 == 0 for a, b, c in p.terms):
        return None
    signs = {c > 0 for c in p.terms.values()}
    if signs == {True}:
        return 1
    if signs == {False}:
        return -1
    return None


@dataclass
class ContactDefect:
    defect: Polynomial
    sign_verdict: str
    certified: bool
    zero_samples: list[tuple[float, float, float]] = field(default_factory=list)
    sample_min: Optional[float] = None
    sample_max: Optional[float] = None
    n_samples: int = 0

    @property
    def one_signed(self) -> bool:
        return self.sign_verdict in ("positive-semidefinite", "negative-semidefinite")

    @property
    def sign(self) -> int:
        return {"positive-semidefinite": 1, "negative-semidefinite": -1}.get(self.sign_verdict, 0)

    def to_json(self) -> dict:
        return {
            "defect": self.defect.to_json(),
            "defect_text": str(self.defect),
            "sign_verdict": self.sign_verdict,
            "certified": self.certified,
            "n_samples": self.n_samples,
            "sample_min": None if self.sample_min is None else float(f"{self.sample_min:.12g}"),
            "sample_max": None if self.sample_max is None else float(f"{self.sample_max:.12g}"),
            "zero_samples": [[float(f"{v:.12g}") for v in p] for p in self.zero_samples[:20]],
            "n_zero_samples": len(self.zero_samples),
        }


def defect_polynomial(eta: DifferentialForm) -> Polynomial:
    """The f with eta ^ d eta = f dx^dy^dz."""
    if eta.degree != 1:
        raise ValueError("contact defect needs a 1-form")
    return wedge(eta, ext_d(eta)).components[0]


def classify_sign(f: Polynomial, radii: Sequence[float] = SAMPLE_RADII,
                  level: int = SAMPLE_LEVEL, tol: float = SIGN_TOL) -> ContactDefect:
    if f.is_zero():
        return ContactDefect(f, "zero", True)
    s = _even_square_sign(f)
    if s is not None:
        verdict = "positive-semidefinite" if s > 0 else "negative-semidefinite"
        return ContactDefect(f, verdict, True)
    g = f.lambdify()
    pts = np.concatenate([icosphere(level, radius=r).vertices for r in radii])
    vals = g(pts[:, 0], pts[:, 1], pts[:, 2])
    lo, hi = float(vals.min()), float(vals.max())
    zeros = [tuple(p) for p in pts[np.abs(vals) <= tol]]
    if lo >= -tol and hi > tol:
        verdict = "positive-semidefinite"
    elif hi <= tol and lo < -tol:
        verdict = "negative-semidefinite"
    elif hi <= tol and lo >= -tol:
        verdict = "zero"
    else:
        verdict = "indefinite"
    return ContactDefect(f, verdict, False, zeros, lo, hi, len(pts))


def contact_defect(eta: DifferentialForm, **sampling) -> ContactDefect:
    return classify_sign(defect_polynomial(eta), **sampling)


def _require_harmonic(phi: Polynomial) -> None:
    lap = laplacian(phi)
    if not lap.is_zero():
        raise NotHarmonic(f"Laplacian of {phi} is {lap}, not zero")


def gradient_form(phi: Polynomial) -> DifferentialForm:
    return ext_d(DifferentialForm.function(phi))


def chiral_perturb(phi: Polynomial) -> DifferentialForm:
    """Return nu with d nu = *d phi, built by the origin-centred homotopy."""
    _require_harmonic(phi)
    return poincare_homotopy(hodge_euclid(gradient_form(phi)))


def perturbed_form(phi: Polynomial, nu: DifferentialForm, t) -> DifferentialForm:
    return gradient_form(phi) + nu * Fraction(t)


@dataclass
class BeltramiSeries:
    """eta = d phi + sum_j t^j nu_j with d nu_{j+1} = * nu_j.

    Intermediate terms are corrected by exact gradients d psi_j so that
    * nu_j stays closed; the last term is left as the homotopy returned it.
    """

    phi: Polynomial
    terms: list[DifferentialForm]
    t: Fraction
    K: int
    gauges: list[Polynomial] = field(default_factory=list)

    @property
    def eta(self) -> DifferentialForm:
        out = gradient_form(self.phi)
        tj = Fraction(1)
        for nu in self.terms:
            tj *= self.t
            out = out + nu * tj
        return out

    def residual(self) -> DifferentialForm:
        eta = self.eta
        return ext_d(eta) - hodge_euclid(eta) * self.t

    def check_recursion(self) -> bool:
        prev = gradient_form(self.phi)
        for nu in self.terms:
            if ext_d(nu) != hodge_euclid(prev):
                return False
            prev = nu
        return True

    def sup_residual(self, n_samples: int = 20000, seed: int = 0) -> float:
        return sup_norm_on_ball(self.residual(), n_samples, seed)

    def to_json(self) -> dict:
        return {
            "phi": str(self.phi),
            "t": f"{self.t.numerator}/{self.t.denominator}",
            "K": self.K,
            "terms": [nu.to_json() for nu in self.terms],
            "gauges": [str(g) for g in self.gauges],
            "eta": self.eta.to_json(),
        }


def ball_samples(n: int, seed: int = 0, radius: float = 1.0) -> np.ndarray:
    """Uniform samples in a ball plus its boundary sphere (where sups live)."""
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1 / 3)
    inner = d * r[:, None]
    shell = icosphere(4, radius=radius).vertices
    return np.concatenate([inner, shell])


def sup_norm_on_ball(form: DifferentialForm, n_samples: int = 20000, seed: int = 0,
                     radius: float = 1.0) -> float:
    pts = ball_samples(n_samples, seed, radius)
    vals = form.lambdify()(pts[:, 0], pts[:, 1], pts[:, 2])
    return float(np.max(np.linalg.norm(vals, axis=-1)))


def beltrami_series(phi: Polynomial, t=Fraction(1, 10), K: int = 4) -> BeltramiSeries:
    _require_harmonic(phi)
    t = Fraction(t)
    if K < 1:
        raise ValueError("K must be >= 1")
    if not 0 < t < 1:
        raise ValueError("t must lie in (0, 1)")
    terms: list[DifferentialForm] = []
    gauges: list[Polynomial] = []
    source = gradient_form(phi)  # harmonic: * d phi is closed
    for j in range(1, K + 1):
        nu = poincare_homotopy(hodge_euclid(source))
        if j < K:
            div = codifferential_function(nu)
            psi = solve_poisson(-div) if not div.is_zero() else Polynomial()
            if not psi.is_zero():
                nu = nu + ext_d(DifferentialForm.function(psi))
            gauges.append(psi)
        terms.append(nu)
        source = nu
    return BeltramiSeries(phi, terms, t, K, gauges)


def reeb_like(eta: DifferentialForm) -> PolyVectorField:
    """Unnormalised W with i_W d eta = 0 and i_W eta = defect."""
    cd = contact_defect(eta)
    if not cd.one_signed:
        raise IndefiniteDefect(f"defect is {cd.sign_verdict}; no Reeb-like orientation")
    return PolyVectorField(*ext_d(eta).components)


def curl_field(eta: DifferentialForm) -> PolyVectorField:
    """Euclidean dual of d eta, without the sign check of reeb_like."""
    return PolyVectorField(*ext_d(eta).components)
