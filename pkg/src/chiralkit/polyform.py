"""Exact exterior calculus for polynomial differential forms on R^3.

Coefficients are :class:`fractions.Fraction`; floats only appear when a
form is evaluated.  Forms use the cyclic basis

    degree 0: 1
    degree 1: dx, dy, dz
    degree 2: dy^dz, dz^dx, dx^dy
    degree 3: dx^dy^dz

so that the Euclidean Hodge star is a relabelling of components.
"""
from __future__ import annotations

import re
from fractions import Fraction
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import ContractViolation, NotClosed, ParseError

Exponent = tuple[int, int, int]
Scalar = Union[int, Fraction]

VARS = ("x", "y", "z")

BASIS: dict[int, tuple[tuple[int, ...], ...]] = {
    0: ((),),
    1: ((0,), (1,), (2,)),
    2: ((1, 2), (2, 0), (0, 1)),
    3: ((0, 1, 2),),
}

KEYS: dict[int, tuple[str, ...]] = {
    0: ("1",),
    1: ("dx", "dy", "dz"),
    2: ("dydz", "dzdx", "dxdy"),
    3: ("dxdydz",),
}


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (bool, np.bool_)):
        raise TypeError("boolean is not a coefficient")
    if isinstance(c, (int, np.integer)):
        return Fraction(int(c))
    if isinstance(c, str):
        return Fraction(c.strip())
    raise TypeError(f"exact coefficient required, got {type(c).__name__}")


def _grlex_key(e: Exponent):
    return (-(e[0] + e[1] + e[2]), -e[0], -e[1], -e[2])


class Polynomial:
    """Sparse polynomial in x, y, z with rational coefficients."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Mapping[Exponent, Scalar] | None = None):
        clean: dict[Exponent, Fraction] = {}
        if terms:
            for e, c in terms.items():
                e = tuple(int(v) for v in e)
                if len(e) != 3 or min(e) < 0:
                    raise ValueError(f"bad exponent {e}")
                c = _as_fraction(c)
                if c:
                    clean[e] = clean.get(e, Fraction(0)) + c
                    if not clean[e]:
                        del clean[e]
        self._terms = clean
        self._hash = None

    @classmethod
    def _raw(cls, terms: dict[Exponent, Fraction]) -> "Polynomial":
        p = cls.__new__(cls)
        p._terms = terms
        p._hash = None
        return p

    # -- constructors -----------------------------------------------------
    @classmethod
    def const(cls, c: Scalar) -> "Polynomial":
        return cls({(0, 0, 0): c})

    @classmethod
    def monomial(cls, exps: Sequence[int], c: Scalar = 1) -> "Polynomial":
        return cls({tuple(exps): c})

    @classmethod
    def variables(cls) -> tuple["Polynomial", "Polynomial", "Polynomial"]:
        return (cls.monomial((1, 0, 0)), cls.monomial((0, 1, 0)), cls.monomial((0, 0, 1)))

    @classmethod
    def parse(cls, text: str) -> "Polynomial":
        return parse_polynomial(text)

    # -- basic protocol ---------------------------------------------------
    @property
    def terms(self) -> Mapping[Exponent, Fraction]:
        return MappingProxyType(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def __eq__(self, other) -> bool:
        if isinstance(other, Polynomial):
            return self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self._terms == Polynomial.const(other)._terms
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __repr__(self) -> str:
        return f"Polynomial({str(self)!r})"

    def __str__(self) -> str:
        if not self._terms:
            return "0"
        out = []
        for e in self.sorted_exponents():
            c = self._terms[e]
            mono = "*".join(
                v if k == 1 else f"{v}^{k}" for v, k in zip(VARS, e) if k
            )
            mag = abs(c)
            sign = "-" if c < 0 else "+"
            if mono and mag == 1:
                body = mono
            elif mono:
                body = f"{mag}*{mono}"
            else:
                body = str(mag)
            out.append((sign, body))
        first_sign, first = out[0]
        s = ("-" if first_sign == "-" else "") + first
        for sign, body in out[1:]:
            s += f" {sign} {body}"
        return s

    def sorted_exponents(self) -> list[Exponent]:
        return sorted(self._terms, key=_grlex_key)

    @property
    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(e) for e in self._terms), default=-1)

    @property
    def min_degree(self) -> int:
        return min((sum(e) for e in self._terms), default=-1)

    def coefficient(self, exps: Sequence[int]) -> Fraction:
        return self._terms.get(tuple(exps), Fraction(0))

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return other
        return Polynomial.const(other)

    def __add__(self, other):
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        out = dict(self._terms)
        for e, c in other._terms.items():
            v = out.get(e, 0) + c
            if v:
                out[e] = v
            else:
                out.pop(e, None)
        return Polynomial._raw(out)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial._raw({e: -c for e, c in self._terms.items()})

    def __pos__(self):
        return self

    def __sub__(self, other):
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)) and not isinstance(other, bool):
            c = Fraction(other)
            if not c:
                return Polynomial()
            return Polynomial._raw({e: v * c for e, v in self._terms.items()})
        if not isinstance(other, Polynomial):
            return NotImplemented
        out: dict[Exponent, Fraction] = {}
        for (a0, a1, a2), ca in self._terms.items():
            for (b0, b1, b2), cb in other._terms.items():
                e = (a0 + b0, a1 + b1, a2 + b2)
                v = out.get(e, 0) + ca * cb
                if v:
                    out[e] = v
                else:
                    out.pop(e, None)
        return Polynomial._raw(out)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Polynomial):
            if other.degree != 0:
                raise ContractViolation("division only by nonzero constants")
            other = other.coefficient((0, 0, 0))
        other = _as_fraction(other)
        if not other:
            raise ZeroDivisionError("division by zero")
        return self * (1 / other)

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ContractViolation("non-negative integer powers only")
        result = Polynomial.const(1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    # -- calculus ---------------------------------------------------------
    def diff(self, var: int | str) -> "Polynomial":
        i = VARS.index(var) if isinstance(var, str) else int(var)
        out = {}
        for e, c in self._terms.items():
            if e[i]:
                ne = list(e)
                ne[i] -= 1
                out[tuple(ne)] = c * e[i]
        return Polynomial._raw(out)

    def gradient(self) -> "PolyVectorField":
        return PolyVectorField(self.diff(0), self.diff(1), self.diff(2))

    def truncate(self, k: int) -> "Polynomial":
        return Polynomial._raw({e: c for e, c in self._terms.items() if sum(e) <= k})

    def homogeneous_part(self, k: int) -> "Polynomial":
        return Polynomial._raw({e: c for e, c in self._terms.items() if sum(e) == k})

    def map_terms(self, fn: Callable[[Exponent, Fraction], Fraction]) -> "Polynomial":
        return Polynomial({e: fn(e, c) for e, c in self._terms.items()})

    # -- evaluation -------------------------------------------------------
    def evaluate_exact(self, point: Sequence) -> Fraction:
        px, py, pz = (Fraction(v) if not isinstance(v, Fraction) else v for v in point)
        total = Fraction(0)
        for (a, b, c), coef in self._terms.items():
            total += coef * px**a * py**b * pz**c
        return total

    def __call__(self, x, y, z):
        return self.lambdify()(x, y, z)

    def lambdify(self) -> Callable:
        """Vectorised float evaluator ``f(x, y, z)`` over numpy arrays."""
        if not self._terms:
            def zero(x, y, z):
                return np.zeros(np.broadcast(np.asarray(x), np.asarray(y), np.asarray(z)).shape)
            return zero
        exps = np.array(list(self._terms.keys()), dtype=np.int64)
        coefs = np.array([float(c) for c in self._terms.values()])
        dmax = exps.max(axis=0)

        def f(x, y, z):
            x = np.asarray(x, dtype=float)
            y = np.asarray(y, dtype=float)
            z = np.asarray(z, dtype=float)
            shape = np.broadcast(x, y, z).shape
            pows = []
            for v, d in zip((x, y, z), dmax):
                table = [np.ones(shape)]
                for _ in range(d):
                    table.append(table[-1] * v)
                pows.append(table)
            out = np.zeros(shape)
            for (a, b, c), k in zip(exps, coefs):
                out = out + k * (pows[0][a] * pows[1][b] * pows[2][c])
            return out

        return f

    # -- serialisation ----------------------------------------------------
    def to_json(self) -> list:
        return [[list(e), _frac_str(self._terms[e])] for e in self.sorted_exponents()]

    @classmethod
    def from_json(cls, data: Iterable) -> "Polynomial":
        terms: dict[Exponent, Fraction] = {}
        for item in data:
            e, c = item
            e = tuple(int(v) for v in e)
            terms[e] = terms.get(e, Fraction(0)) + _as_fraction(c if isinstance(c, (int, str)) else str(c))
        return cls(terms)


def _frac_str(c: Fraction) -> str:
    return f"{c.numerator}/{c.denominator}"


ZERO = Polynomial()
ONE = Polynomial.const(1)


# ---------------------------------------------------------------------------
# basis bookkeeping

def _perm_sign(seq: Sequence[int]) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def _basis_lookup(idx: tuple[int, ...]) -> tuple[int, int]:
    """Return (basis position, sign) for an ordered index tuple without repeats."""
    k = len(idx)
    for pos, b in enumerate(BASIS[k]):
        if sorted(b) == sorted(idx):
            return pos, _perm_sign(idx) * _perm_sign(b)
    raise KeyError(idx)


def _build_wedge_table():
    table = {}
    for p in range(4):
        for q in range(4 - p):
            rows = []
            for i, bi in enumerate(BASIS[p]):
                for j, bj in enumerate(BASIS[q]):
                    cat = bi + bj
                    if len(set(cat)) < len(cat):
                        continue
                    pos, sign = _basis_lookup(cat)
                    rows.append((i, j, pos, sign))
            table[(p, q)] = rows
    return table


def _build_interior_table():
    table = {}
    for k in range(1, 4):
        rows = []
        for i, b in enumerate(BASIS[k]):
            for j, var in enumerate(b):
                rest = b[:j] + b[j + 1:]
                pos, sign = _basis_lookup(rest)
                rows.append((i, var, pos, sign * (-1) ** j))
        table[k] = rows
    return table


_WEDGE = _build_wedge_table()
_INTERIOR = _build_interior_table()


# ---------------------------------------------------------------------------
# forms and vector fields

class DifferentialForm:
    """Degree-k polynomial form on R^3 (k = 0..3)."""

    __slots__ = ("degree", "components")

    def __init__(self, degree: int, components: Sequence):
        if degree not in BASIS:
            raise ContractViolation(f"degree must be 0..3, got {degree}")
        comps = tuple(p if isinstance(p, Polynomial) else Polynomial.const(p) for p in components)
        if len(comps) != len(BASIS[degree]):
            raise ContractViolation(
                f"degree {degree} form needs {len(BASIS[degree])} components, got {len(comps)}"
            )
        object.__setattr__(self, "degree", degree)
        object.__setattr__(self, "components", comps)

    def __setattr__(self, name, value):
        raise AttributeError("DifferentialForm is immutable")

    @classmethod
    def zero(cls, degree: int) -> "DifferentialForm":
        return cls(degree, [ZERO] * len(BASIS[degree]))

    @classmethod
    def function(cls, f) -> "DifferentialForm":
        return cls(0, [f])

    @classmethod
    def one_form(cls, a, b, c) -> "DifferentialForm":
        return cls(1, [a, b, c])

    @classmethod
    def two_form(cls, a, b, c) -> "DifferentialForm":
        return cls(2, [a, b, c])

    @classmethod
    def volume(cls, f=1) -> "DifferentialForm":
        return cls(3, [f])

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.components)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DifferentialForm):
            return NotImplemented
        return self.degree == other.degree and self.components == other.components

    def __hash__(self):
        return hash((self.degree, self.components))

    def __repr__(self) -> str:
        parts = [
            f"({p}) {k}" if k != "1" else f"({p})"
            for p, k in zip(self.components, KEYS[self.degree])
            if not p.is_zero()
        ]
        return f"<{self.degree}-form {' + '.join(parts) or '0'}>"

    def __getitem__(self, key: int | str) -> Polynomial:
        if isinstance(key, str):
            key = KEYS[self.degree].index(key)
        return self.components[key]

    def _check_same(self, other: "DifferentialForm"):
        if not isinstance(other, DifferentialForm):
            raise TypeError("expected a DifferentialForm")
        if other.degree != self.degree:
            raise ContractViolation(f"degree mismatch {self.degree} vs {other.degree}")

    def __add__(self, other):
        self._check_same(other)
        return DifferentialForm(self.degree, [a + b for a, b in zip(self.components, other.components)])

    def __sub__(self, other):
        self._check_same(other)
        return DifferentialForm(self.degree, [a - b for a, b in zip(self.components, other.components)])

    def __neg__(self):
        return DifferentialForm(self.degree, [-a for a in self.components])

    def __mul__(self, f):
        if isinstance(f, DifferentialForm):
            return NotImplemented
        if not isinstance(f, Polynomial):
            f = _as_fraction(f)
        return DifferentialForm(self.degree, [a * f for a in self.components])

    __rmul__ = __mul__

    def __truediv__(self, c):
        return DifferentialForm(self.degree, [a / c for a in self.components])

    def __xor__(self, other):
        return wedge(self, other)

    def map_components(self, fn: Callable[[Polynomial], Polynomial]) -> "DifferentialForm":
        return DifferentialForm(self.degree, [fn(p) for p in self.components])

    @property
    def poly_degree(self) -> int:
        return max(p.degree for p in self.components)

    def lambdify(self) -> Callable:
        fns = [p.lambdify() for p in self.components]

        def f(x, y, z):
            return np.stack([g(x, y, z) for g in fns], axis=-1)

        return f

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "components": {k: p.to_json() for k, p in zip(KEYS[self.degree], self.components)},
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "DifferentialForm":
        degree = int(data["degree"])
        comps = data.get("components", {})
        unknown = set(comps) - set(KEYS[degree])
        if unknown:
            raise ParseError(f"unknown component keys {sorted(unknown)} for degree {degree}")
        return cls(degree, [Polynomial.from_json(comps.get(k, [])) for k in KEYS[degree]])


class PolyVectorField:
    """Polynomial vector field X = X1 d/dx + X2 d/dy + X3 d/dz."""

    __slots__ = ("components",)

    def __init__(self, *components):
        if len(components) == 1 and not isinstance(components[0], (Polynomial, int, Fraction)):
            components = tuple(components[0])
        if len(components) != 3:
            raise ContractViolation("vector field needs 3 components")
        object.__setattr__(
            self,
            "components",
            tuple(p if isinstance(p, Polynomial) else Polynomial.const(p) for p in components),
        )

    def __setattr__(self, name, value):
        raise AttributeError("PolyVectorField is immutable")

    def __eq__(self, other):
        if not isinstance(other, PolyVectorField):
            return NotImplemented
        return self.components == other.components

    def __hash__(self):
        return hash(self.components)

    def __repr__(self):
        return "PolyVectorField(" + ", ".join(str(p) for p in self.components) + ")"

    def __getitem__(self, i):
        return self.components[i]

    def __add__(self, other):
        return PolyVectorField(*(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other):
        return PolyVectorField(*(a - b for a, b in zip(self.components, other.components)))

    def __neg__(self):
        return PolyVectorField(*(-a for a in self.components))

    def __mul__(self, f):
        return PolyVectorField(*(a * f for a in self.components))

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.components)

    def divergence(self) -> Polynomial:
        return self[0].diff(0) + self[1].diff(1) + self[2].diff(2)

    def jacobian(self) -> tuple[tuple[Polynomial, ...], ...]:
        return tuple(tuple(p.diff(j) for j in range(3)) for p in self.components)

    def lambdify(self) -> Callable:
        fns = [p.lambdify() for p in self.components]

        def f(x, y, z):
            return np.stack([g(x, y, z) for g in fns], axis=-1)

        return f

    def lambdify_jacobian(self) -> Callable:
        fns = [[q.lambdify() for q in row] for row in self.jacobian()]

        def jac(x, y, z):
            return np.stack([np.stack([g(x, y, z) for g in row], axis=-1) for row in fns], axis=-2)

        return jac

    def to_json(self) -> dict:
        return {"vector": {v: p.to_json() for v, p in zip(VARS, self.components)}}

    @classmethod
    def from_json(cls, data: Mapping) -> "PolyVectorField":
        comps = data["vector"]
        return cls(*(Polynomial.from_json(comps.get(v, [])) for v in VARS))


EULER = PolyVectorField(*Polynomial.variables())

_x, _y, _z = Polynomial.variables()
dx = DifferentialForm.one_form(ONE, ZERO, ZERO)
dy = DifferentialForm.one_form(ZERO, ONE, ZERO)
dz = DifferentialForm.one_form(ZERO, ZERO, ONE)


# ---------------------------------------------------------------------------
# operations

def wedge(a: DifferentialForm, b: DifferentialForm) -> DifferentialForm:
    if a.degree + b.degree > 3:
        raise ContractViolation(f"wedge degree overflow: {a.degree} + {b.degree} > 3")
    k = a.degree + b.degree
    out = [ZERO] * len(BASIS[k])
    for i, j, pos, sign in _WEDGE[(a.degree, b.degree)]:
        ai, bj = a.components[i], b.components[j]
        if ai.is_zero() or bj.is_zero():
            continue
        prod = ai * bj
        out[pos] = out[pos] + prod if sign > 0 else out[pos] - prod
    return DifferentialForm(k, out)


def ext_d(a: DifferentialForm) -> DifferentialForm:
    """Exterior derivative.  Calling it on a 3-form is a contract violation."""
    if a.degree >= 3:
        raise ContractViolation("exterior derivative of a 3-form is not representable")
    k = a.degree + 1
    out = [ZERO] * len(BASIS[k])
    for v, i, pos, sign in _WEDGE[(1, a.degree)]:
        part = a.components[i].diff(v)
        if part.is_zero():
            continue
        out[pos] = out[pos] + part if sign > 0 else out[pos] - part
    return DifferentialForm(k, out)


def interior(X: PolyVectorField, a: DifferentialForm) -> DifferentialForm:
    if a.degree < 1:
        raise ContractViolation("interior product of a 0-form")
    k = a.degree - 1
    out = [ZERO] * len(BASIS[k])
    for i, var, pos, sign in _INTERIOR[a.degree]:
        ai, xv = a.components[i], X.components[var]
        if ai.is_zero() or xv.is_zero():
            continue
        prod = xv * ai
        out[pos] = out[pos] + prod if sign > 0 else out[pos] - prod
    return DifferentialForm(k, out)


def hodge_euclid(a: DifferentialForm) -> DifferentialForm:
    """Euclidean Hodge star; with the cyclic basis it is a relabelling."""
    return DifferentialForm(3 - a.degree, a.components)


def poincare_homotopy(b: DifferentialForm, check: bool = True) -> DifferentialForm:
    """Origin-centred homotopy operator: d(H b) = b for closed b of degree >= 1."""
    if b.degree < 1:
        raise ContractViolation("homotopy operator needs degree >= 1")
    if check and b.degree < 3 and not ext_d(b).is_zero():
        raise NotClosed("poincare_homotopy called on a form with db != 0")
    k = b.degree
    scaled = b.map_components(
        lambda p: Polynomial._raw({e: c / (sum(e) + k) for e, c in p.terms.items()})
    )
    return interior(EULER, scaled)


def truncate_jet(a: DifferentialForm, k: int) -> DifferentialForm:
    if k < 0:
        raise ContractViolation("jet order must be >= 0")
    return a.map_components(lambda p: p.truncate(k))


def evaluate(a: DifferentialForm | PolyVectorField | Polynomial, p: Sequence) -> np.ndarray:
    """Exact-rational evaluation at ``p`` followed by conversion to float."""
    pt = tuple(Fraction(v) for v in p)
    if isinstance(a, Polynomial):
        return np.array([float(a.evaluate_exact(pt))])
    return np.array([float(c.evaluate_exact(pt)) for c in a.components])


def codifferential_function(a: DifferentialForm) -> Polynomial:
    """Euclidean divergence of a 1-form (d * d * up to sign conventions)."""
    if a.degree != 1:
        raise ContractViolation("divergence defined for 1-forms")
    return a[0].diff(0) + a[1].diff(1) + a[2].diff(2)


def euclidean_dual(a: DifferentialForm | PolyVectorField):
    """Index raising/lowering with the flat metric (1-form <-> vector field)."""
    if isinstance(a, PolyVectorField):
        return DifferentialForm(1, a.components)
    if a.degree == 1:
        return PolyVectorField(*a.components)
    if a.degree == 2:
        return PolyVectorField(*a.components)
    raise ContractViolation("euclidean_dual defined for 1-forms, 2-forms and vector fields")


def solve_poisson(f: Polynomial) -> Polynomial:
    """Return a polynomial u with Laplacian(u) = f exactly.

    Works homogeneous piece by piece with the ansatz
    u = sum_j a_j r^(2j+2) Lap^j f, using
    Lap(r^(2k) g) = 2k(2k + 2 deg g + 1) r^(2k-2) g + r^(2k) Lap g.
    """
    r2 = _x * _x + _y * _y + _z * _z
    total = ZERO
    for n in sorted({sum(e) for e in f.terms}):
        g = f.homogeneous_part(n)
        coef = Fraction(1, 2 * (2 * n + 3))
        r_pow = r2
        j = 0
        while not g.is_zero():
            total = total + r_pow * g * coef
            g = laplacian(g)
            j += 1
            coef = -coef / ((2 * j + 2) * (2 * n - 2 * j + 3))
            r_pow = r_pow * r2
    return total


def laplacian(phi: Polynomial) -> Polynomial:
    return phi.diff(0).diff(0) + phi.diff(1).diff(1) + phi.diff(2).diff(2)


# ---------------------------------------------------------------------------
# inline grammar:  ^ powers, optional *, rational literals p/q

_TOKEN = re.compile(r"\s*(?:(\d+(?:\.\d+)?)|([xyz])|(\*\*|[-+*/^()]))")


def _tokenize(text: str):
    pos = 0
    toks = []
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", text, pos)
        start = m.start(m.lastindex)
        if m.group(1):
            toks.append(("num", m.group(1), start))
        elif m.group(2):
            toks.append(("var", m.group(2), start))
        else:
            op = "^" if m.group(3) == "**" else m.group(3)
            toks.append(("op", op, start))
        pos = m.end()
    toks.append(("end", "", n))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, self.text, tok[2])

    def parse(self) -> Polynomial:
        if self.peek()[0] == "end":
            self.fail("empty expression")
        p = self.expr()
        if self.peek()[0] != "end":
            self.fail(f"unexpected token {self.peek()[1]!r}")
        return p

    def expr(self):
        p = self.term()
        while self.peek()[:2] in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            q = self.term()
            p = p + q if op == "+" else p - q
        return p

    def term(self):
        p = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val == "*":
                self.take()
                p = p * self.unary()
            elif kind == "op" and val == "/":
                tok = self.take()
                q = self.unary()
                if q.degree > 0:
                    self.fail("division by a non-constant", tok)
                if q.is_zero():
                    self.fail("division by zero", tok)
                p = p / q
            elif kind in ("num", "var") or (kind == "op" and val == "("):
                p = p * self.power()
            else:
                return p

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in "+-":
            self.take()
            p = self.unary()
            return -p if val == "-" else p
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            self.take()
            tok = self.take()
            if tok[0] != "num" or not tok[1].isdigit():
                self.fail("exponent must be a non-negative integer", tok)
            base = base ** int(tok[1])
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            return Polynomial.const(Fraction(val))
        if kind == "var":
            return Polynomial.monomial(tuple(int(v == val) for v in VARS))
        if kind == "op" and val == "(":
            p = self.expr()
            if self.peek()[:2] != ("op", ")"):
                self.fail("expected ')'")
            self.take()
            return p
        self.fail(f"unexpected token {val!r}" if val else "unexpected end of input", (kind, val, pos))


def parse_polynomial(text: str) -> Polynomial:
    """Parse e.g. ``"x^2/2 + y^2/2 - z^2"`` or ``"2xy - 3/4 z^3"``."""
    return _Parser(text).parse()


def random_polynomial(rng: np.random.Generator, max_degree: int = 5, max_terms: int = 6,
                      max_coef: int = 1000, min_degree: int = 0) -> Polynomial:
    """Sparse random polynomial with integer/rational coefficients (test helper)."""
    n = int(rng.integers(0, max_terms + 1))
    terms = {}
    for _ in range(n):
        deg = int(rng.integers(min_degree, max_degree + 1))
        cut = sorted(rng.integers(0, deg + 1, size=2))
        e = (int(cut[0]), int(cut[1] - cut[0]), int(deg - cut[1]))
        num = int(rng.integers(-max_coef, max_coef + 1))
        den = int(rng.integers(1, 4))
        terms[e] = Fraction(num, den)
    return Polynomial(terms)


def random_form(rng: np.random.Generator, degree: int, **kw) -> DifferentialForm:
    return DifferentialForm(degree, [random_polynomial(rng, **kw) for _ in BASIS[degree]])


def monomials(max_degree: int) -> list[Exponent]:
    out = []
    for d in range(max_degree + 1):
        for a in range(d, -1, -1):
            for b in range(d - a, -1, -1):
                out.append((a, b, d - a - b))
    return out


__all__ = [
    "Polynomial", "DifferentialForm", "PolyVectorField", "EULER", "BASIS", "KEYS",
    "dx", "dy", "dz", "ZERO", "ONE",
    "wedge", "ext_d", "interior", "hodge_euclid", "poincare_homotopy", "truncate_jet",
    "evaluate", "laplacian", "solve_poisson", "euclidean_dual", "codifferential_function",
    "parse_polynomial", "random_polynomial", "random_form", "monomials",
]
