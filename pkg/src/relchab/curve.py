"""Curve models, reduction, point enumeration, local expansions, differentials,
involutions and Riemann-Roch spaces over finite fields.

Two model kinds are supported:

* ``ci``: a canonical complete intersection in P^n (genus n+1), given by forms
  whose degrees sum to n+2;
* ``hyperelliptic``: y^2 + h(x) y = f(x) in the weighted projective plane with
  weights (1, g+1, 1); elliptic curves in Weierstrass form are the case g = 1.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .algebra import (QQ, BudgetExceeded, Field, FieldMatrix, GF, ext_field_build, int_mat_mul,
                      kernel_modp, mat_rank_kernel, poly_gcd, poly_roots, poly_trim, rref_generic,
                      rref_modp)
from .poly import MPoly, monomials
from .series import SeriesError, TruncatedSeries


class CurveError(ValueError):
    """Raised for invalid curve data or unsupported configurations."""


class BadReduction(CurveError):
    """Raised when a model is singular modulo a prime."""


# ---------------------------------------------------------------------------
# models and points

@dataclass
class CurveModel:
    kind: str  # "ci" or "hyperelliptic"
    genus: int
    forms: list = field(default_factory=list)  # MPoly, for ci
    f: tuple = ()  # hyperelliptic right-hand side, low degree first
    h: tuple = ()
    field: Field = QQ
    name: str = ""
    ainvs: tuple | None = None

    @property
    def nvars(self) -> int:
        return self.forms[0].nvars if self.kind == "ci" else 3

    @property
    def is_elliptic(self) -> bool:
        return self.kind == "hyperelliptic" and self.genus == 1

    @property
    def p(self) -> int:
        return self.field.characteristic

    @classmethod
    def complete_intersection(cls, forms: Sequence[MPoly], name: str = "") -> "CurveModel":
        forms = list(forms)
        if not forms:
            raise CurveError("no defining forms")
        n = forms[0].nvars - 1
        if any(F.nvars != n + 1 for F in forms):
            raise CurveError("forms live in different ambient spaces")
        if len(forms) != n - 1:
            raise CurveError(f"a curve in P^{n} needs {n - 1} forms, got {len(forms)}")
        if any(not F.is_homogeneous() or F.is_zero() for F in forms):
            raise CurveError("defining forms must be nonzero and homogeneous")
        if sum(F.degree() for F in forms) != n + 2:
            raise CurveError("only canonical complete intersections are supported")
        return cls("ci", n + 1, forms, name=name)

    @classmethod
    def hyperelliptic(cls, f: Sequence, h: Sequence = (), name: str = "") -> "CurveModel":
        f = _trim_frac(f)
        h = _trim_frac(h)
        df = len(f) - 1
        if df < 3:
            raise CurveError("f must have degree at least 3")
        g = (df - 1) // 2
        if len(h) - 1 > g + 1:
            raise CurveError("h has too large degree")
        return cls("hyperelliptic", g, f=tuple(f), h=tuple(h), name=name)

    @classmethod
    def elliptic(cls, ainvs: Sequence[int], name: str = "") -> "CurveModel":
        a1, a2, a3, a4, a6 = [Fraction(a) for a in ainvs]
        m = cls.hyperelliptic([a6, a4, a2, 1], [a3, a1], name=name)
        m.ainvs = tuple(ainvs)
        return m

    def field_elt(self, F: Field, c):
        c = Fraction(c)
        if F.characteristic == 0:
            return c
        p = F.characteristic
        if c.denominator % p == 0:
            raise BadReduction(f"coefficient {c} is not {p}-integral")
        return F.from_int(c.numerator * pow(c.denominator, -1, p) % p)

    def contains(self, P: "CurvePoint") -> bool:
        F = P.field
        if self.kind == "ci":
            return all(F.is_zero(G.eval(F, P.coords)) for G in self.forms)
        X, Y, Z = P.coords
        g = self.genus
        fh = [self.field_elt(F, c) for c in self.f] + [F.zero] * (2 * g + 3 - len(self.f))
        hh = [self.field_elt(F, c) for c in self.h] + [F.zero] * (g + 2 - len(self.h))
        Fv = _binary_eval(F, fh[:2 * g + 3], X, Z, 2 * g + 2)
        Hv = _binary_eval(F, hh[:g + 2], X, Z, g + 1)
        return F.is_zero(F.sub(F.add(F.mul(Y, Y), F.mul(Hv, Y)), Fv))

    def describe(self) -> str:
        if self.kind == "ci":
            names = [f"x{i}" for i in range(self.nvars)]
            return "; ".join(F.to_string(names) for F in self.forms)
        return f"y^2 + ({_upoly_str(self.h)})*y = {_upoly_str(self.f)}"


def _trim_frac(a):
    a = [Fraction(x) for x in a]
    while a and a[-1] == 0:
        a.pop()
    return a


def _upoly_str(a):
    terms = []
    for i, c in enumerate(a):
        if c:
            terms.append(f"{c}" if i == 0 else (f"{c}*x" if i == 1 else f"{c}*x^{i}"))
    return " + ".join(terms) or "0"


def _binary_eval(F, coeffs, X, Z, deg):
    """sum c_i X^i Z^(deg-i)."""
    acc = F.zero
    for i, c in enumerate(coeffs[:deg + 1]):
        if not F.is_zero(c):
            acc = F.add(acc, F.mul(c, F.mul(F.pow(X, i), F.pow(Z, deg - i))))
    return acc


@dataclass(frozen=True)
class CurvePoint:
    """Projective point; for hyperelliptic models coordinates are weighted (X, Y, Z)."""

    coords: tuple
    field: Field

    @classmethod
    def make(cls, model: CurveModel, coords: Sequence, F: Field) -> "CurvePoint":
        c = list(coords)
        if model.kind == "ci":
            i = next((j for j, x in enumerate(c) if not F.is_zero(x)), None)
            if i is None:
                raise CurveError("zero vector is not a projective point")
            inv = F.inv(c[i])
            c = [F.mul(x, inv) for x in c]
        else:
            X, Y, Z = c
            g = model.genus
            if not F.is_zero(Z):
                iz = F.inv(Z)
                c = [F.mul(X, iz), F.mul(Y, F.pow(iz, g + 1)), F.one]
            else:
                if F.is_zero(X):
                    raise CurveError("invalid weighted point")
                ix = F.inv(X)
                c = [F.one, F.mul(Y, F.pow(ix, g + 1)), F.zero]
        return cls(tuple(c), F)

    @property
    def degree(self) -> int:
        """Degree of the closed point (size of the Frobenius orbit)."""
        F = self.field
        if not isinstance(F, GF) or F.k == 1:
            return 1
        for d in range(1, F.k + 1):
            if F.k % d == 0 and all(F.frobenius(x, d) == x for x in self.coords):
                return d
        return F.k

    def frobenius(self, i: int = 1) -> "CurvePoint":
        F = self.field
        return CurvePoint(tuple(F.frobenius(x, i) for x in self.coords), F)

    def orbit(self) -> list["CurvePoint"]:
        return [self.frobenius(i) for i in range(self.degree)]

    def orbit_key(self) -> tuple:
        return min(P.coords for P in self.orbit())

    def __str__(self):
        return "(" + ":".join(str(x) for x in self.coords) + ")"


@dataclass(frozen=True)
class EffDivisor:
    """Effective divisor over F_p: closed points (orbit representatives) with multiplicities."""

    places: tuple  # tuple of (CurvePoint, multiplicity)

    @classmethod
    def from_points(cls, pts: Sequence[tuple]) -> "EffDivisor":
        acc: dict = {}
        rep: dict = {}
        for P, m in pts:
            if m < 0:
                raise CurveError("effective divisors need nonnegative multiplicities")
            if m == 0:
                continue
            key = (P.field.q if isinstance(P.field, GF) else 0, P.orbit_key())
            acc[key] = acc.get(key, 0) + m
            rep.setdefault(key, P)
        places = tuple((rep[k], acc[k]) for k in sorted(acc))
        return cls(places)

    @property
    def degree(self) -> int:
        return sum(P.degree * m for P, m in self.places)

    def __add__(self, o: "EffDivisor") -> "EffDivisor":
        return EffDivisor.from_points(list(self.places) + list(o.places))

    def support(self):
        return [P for P, _ in self.places]


@dataclass(frozen=True)
class Differential:
    """Regular differential: linear form L (ci) or polynomial P with P(x) dx/(2y+h)."""

    coeffs: tuple

    @classmethod
    def basis(cls, model: CurveModel) -> list["Differential"]:
        n = model.nvars if model.kind == "ci" else model.genus
        return [cls(tuple(int(i == j) for j in range(n))) for i in range(n)]


@dataclass
class CurveMap:
    """Quotient map described by an involution matrix W acting linearly on coordinates."""

    source: CurveModel
    target: CurveModel | None
    W: list
    degree: int = 2
    explicit: list | None = None  # optional coordinate polynomials


# ---------------------------------------------------------------------------
# reduction

def reduce_mod_p(model: CurveModel, p: int, check_degree: int = 2, budget: int = 10 ** 7) -> CurveModel:
    """Reduce an integral model mod p, checking smoothness."""
    F = ext_field_build(p, 1)
    if model.kind == "ci":
        forms = []
        for G in model.forms:
            try:
                red = G.reduce_coefficients(p)
            except ValueError as exc:
                raise BadReduction(str(exc)) from None
            R = MPoly(G.nvars, red)
            if R.is_zero() or R.degree() != G.degree():
                raise BadReduction(f"a defining form degenerates mod {p}")
            forms.append(R)
        red_model = CurveModel("ci", model.genus, forms, field=F, name=model.name)
        for k in range(1, check_degree + 1):
            pts = enumerate_points(red_model, k, budget)
            bad = singular_points(red_model, pts, ext_field_build(p, k))
            if bad:
                raise BadReduction(f"singular point {bad[0]} over F_{p}^{k}")
        return red_model
    if p == 2:
        raise BadReduction("characteristic 2 hyperelliptic reduction is not supported")
    try:
        f = [Fraction(model.field_elt(F, c)) for c in model.f]
        h = [Fraction(model.field_elt(F, c)) for c in model.h]
    except BadReduction:
        raise
    g = model.genus
    # smooth iff 4f + h^2 is squarefree of degree >= 2g+1 as a binary form of degree 2g+2
    disc_poly = [0] * (2 * g + 3)
    for i, c in enumerate(f):
        disc_poly[i] = (disc_poly[i] + 4 * int(c)) % p
    for i, a in enumerate(h):
        for j, b in enumerate(h):
            disc_poly[i + j] = (disc_poly[i + j] + int(a) * int(b)) % p
    D = poly_trim(disc_poly)
    if len(D) - 1 < 2 * g + 1:
        raise BadReduction(f"repeated root at infinity mod {p}")
    from .algebra import poly_deriv
    if len(poly_gcd(D, poly_deriv(D, F), F)) > 1:
        raise BadReduction(f"4f + h^2 has a repeated root mod {p}")
    out = CurveModel("hyperelliptic", g, f=tuple(f), h=tuple(h), field=F, name=model.name)
    out.ainvs = model.ainvs
    return out


def singular_points(model: CurveModel, pts: Sequence[CurvePoint], F: GF) -> list[CurvePoint]:
    """Points where the Jacobian matrix of the forms has rank below n-1."""
    if model.kind != "ci" or not pts:
        return []
    n = model.nvars
    grads = [[G.partial(j) for j in range(n)] for G in model.forms]
    bad = []
    for P in pts:
        M = [[g.eval(F, P.coords) for g in row] for row in grads]
        rank, _ = mat_rank_kernel(FieldMatrix(F, M))
        if rank < len(model.forms):
            bad.append(P)
    return bad


# ---------------------------------------------------------------------------
# vectorised evaluation helpers over F_q

class _VF:
    """Vectorised arithmetic on int64 arrays of field elements."""

    def __init__(self, F: GF):
        self.F = F
        self.p = F.p
        self.prime = F.k == 1

    def add(self, a, b):
        return (a + b) % self.p if self.prime else self.F.vadd(a, b)

    def sub(self, a, b):
        return (a - b) % self.p if self.prime else self.F.vadd(a, self.F.vneg(b))

    def neg(self, a):
        return (-a) % self.p if self.prime else self.F.vneg(a)

    def mul(self, a, b):
        return (np.asarray(a, dtype=np.int64) * b) % self.p if self.prime else self.F.vmul(a, b)

    def const(self, c, shape):
        return np.full(shape, c, dtype=np.int64)

    def pow(self, a, k):
        out = np.ones_like(a)
        for _ in range(k):
            out = self.mul(out, a)
        return out


def _coef(F, c: Fraction):
    p = F.characteristic
    return F.from_int(c.numerator * pow(c.denominator, -1, p) % p)


def _vec_eval(VF: _VF, terms: dict, arrays: Sequence, shape) -> np.ndarray:
    acc = np.zeros(shape, dtype=np.int64)
    cache = {}
    for e, c in terms.items():
        if c == 0:
            continue
        term = VF.const(c, shape)
        for i, k in enumerate(e):
            if k:
                if (i, k) not in cache:
                    cache[(i, k)] = VF.pow(arrays[i], k)
                term = VF.mul(term, cache[(i, k)])
        acc = VF.add(acc, term)
    return acc


def _projective_rows(F: GF, m: int) -> np.ndarray:
    """All normalised points of P^(m-1)(F_q) as rows (first nonzero coordinate 1)."""
    q = F.q
    blocks = []
    for lead in range(m):
        tail = m - lead - 1
        count = q ** tail
        if count > 5 * 10 ** 7:
            raise BudgetExceeded("projective scan too large")
        idx = np.arange(count, dtype=np.int64)
        rows = np.zeros((count, m), dtype=np.int64)
        rows[:, lead] = 1
        for j in range(tail):
            rows[:, m - 1 - j] = idx % q
            idx //= q
        blocks.append(rows)
    return np.concatenate(blocks, axis=0)


def _vec_sqrt(F: GF, a: np.ndarray):
    """(has_root, root) arrays."""
    exp, log, _ = F.tables
    ok = np.zeros(a.shape, dtype=bool)
    root = np.zeros(a.shape, dtype=np.int64)
    zero = a == 0
    ok[zero] = True
    nz = ~zero
    la = log[a[nz]]
    if F.p == 2:
        ok[nz] = True
        root[nz] = exp[(la * ((F.q) // 2)) % (F.q - 1)]
        return ok, root
    even = la % 2 == 0
    sub_ok = np.zeros(la.shape, dtype=bool)
    sub_ok[even] = True
    sub_root = np.zeros(la.shape, dtype=np.int64)
    sub_root[even] = exp[la[even] // 2]
    ok[nz] = sub_ok
    root[nz] = sub_root
    return ok, root


# ---------------------------------------------------------------------------
# point enumeration

def enumerate_points(model: CurveModel, k: int = 1, budget: int = 10 ** 7) -> list[CurvePoint]:
    """All points over F_{p^k}, sorted and duplicate free."""
    if model.field.characteristic == 0:
        raise CurveError("enumerate_points needs a model over a finite field")
    F = ext_field_build(model.p, k)
    if model.kind == "hyperelliptic":
        if F.q > budget:
            raise BudgetExceeded(f"enumeration cost {F.q} exceeds budget {budget}")
        pts = _enum_hyperelliptic(model, F)
    else:
        pts = _enum_ci(model, F, budget)
    return sorted(set(pts), key=lambda P: P.coords)


def _enum_hyperelliptic(model, F):
    VF = _VF(F)
    g = model.genus
    f = [_coef(F, c) for c in model.f]
    h = [_coef(F, c) for c in model.h]
    xs = np.arange(F.q, dtype=np.int64)

    def upoly(cs, x):
        acc = np.zeros_like(x)
        for c in reversed(cs):
            acc = VF.add(VF.mul(acc, x), VF.const(c, x.shape))
        return acc

    fx = upoly(f, xs)
    hx = upoly(h, xs) if h else np.zeros_like(xs)
    pts = []
    if F.p == 2:
        for x in range(F.q):
            for y in range(F.q):
                if F.add(F.add(F.mul(y, y), F.mul(int(hx[x]), y)), int(fx[x])) == 0:
                    pts.append(CurvePoint((x, y, 1), F))
    else:
        disc = VF.add(VF.mul(VF.const(F.from_int(4), xs.shape), fx), VF.mul(hx, hx))
        ok, r = _vec_sqrt(F, disc)
        inv2 = F.inv(F.from_int(2))
        for x in np.nonzero(ok)[0]:
            rr = int(r[x])
            for s in {rr, F.neg(rr)}:
                y = F.mul(F.sub(s, int(hx[x])), inv2)
                pts.append(CurvePoint((int(x), y, 1), F))
    # points at infinity: Y^2 + h_{g+1} Y = f_{2g+2}
    ftop = f[2 * g + 2] if len(f) > 2 * g + 2 else 0
    htop = h[g + 1] if len(h) > g + 1 else 0
    for v in poly_roots([F.neg(ftop), htop, 1], F) if (ftop or htop) else [0]:
        pts.append(CurvePoint((1, v, 0), F))
    return pts


def _bivariate_restriction(VF, terms, v0, v1, scan_vars, scan_arrays, shape):
    """Coefficient arrays of a form as a polynomial in (x_v0, x_v1) after fixing scan variables."""
    out = {}
    for e, c in terms.items():
        term = VF.const(c, shape)
        for s, arr in zip(scan_vars, scan_arrays):
            if e[s]:
                term = VF.mul(term, VF.pow(arr, e[s]))
        key = (e[v0], e[v1])
        out[key] = VF.add(out[key], term) if key in out else term
    return out


def _upoly_mul(VF, a, b):
    out = [None] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            t = VF.mul(x, y)
            out[i + j] = t if out[i + j] is None else VF.add(out[i + j], t)
    return out


def _upoly_add(VF, a, b):
    n = max(len(a), len(b))
    out = []
    for i in range(n):
        if i < len(a) and i < len(b):
            out.append(VF.add(a[i], b[i]))
        else:
            out.append(a[i] if i < len(a) else b[i])
    return out


def _choose_elimination(model, terms_list):
    n = model.nvars
    for v0 in range(n):
        for i0, terms in enumerate(terms_list):
            if max(e[v0] for e in terms) != 1:
                continue
            for v1 in range(n):
                if v1 == v0:
                    continue
                if all(e[v1] == 0 for e in terms if e[v0] == 1):
                    return v0, v1, i0
    return None


def _enum_ci(model, F, budget):
    n = model.nvars
    VF = _VF(F)
    terms_list = [{e: _coef(F, c) for e, c in G.terms.items()} for G in model.forms]
    choice = _choose_elimination(model, terms_list)
    pts = []
    if choice is None:
        rows = F.q ** (n - 1)
        if rows > budget:
            raise BudgetExceeded(f"enumeration cost {rows} exceeds budget {budget}")
        allp = _projective_rows(F, n)
        vals = [_vec_eval(VF, t, [allp[:, j] for j in range(n)], (allp.shape[0],)) for t in terms_list]
        mask = np.all(np.stack(vals) == 0, axis=0)
        return [CurvePoint(tuple(int(x) for x in r), F) for r in allp[mask]]
    v0, v1, i0 = choice
    scan_vars = [j for j in range(n) if j not in (v0, v1)]
    m = len(scan_vars)
    est = (F.q ** (m - 1)) * max(1, int(math.log2(F.q)))
    if est > budget:
        raise BudgetExceeded(f"enumeration cost {est} exceeds budget {budget}")

    def full_point(x0, x1, scan):
        c = [0] * n
        c[v0], c[v1] = x0, x1
        for s, val in zip(scan_vars, scan):
            c[s] = val
        return c

    # points on the line where every scan coordinate vanishes
    pts.extend(_line_points(model, F, v0, v1))

    scan = _projective_rows(F, m)
    R = scan.shape[0]
    scan_arrays = [scan[:, j] for j in range(m)]
    shape = (R,)
    biv = [_bivariate_restriction(VF, t, v0, v1, scan_vars, scan_arrays, shape) for t in terms_list]
    ell = biv[i0].get((1, 0), np.zeros(shape, dtype=np.int64))
    Q = [biv[i0].get((0, j), np.zeros(shape, dtype=np.int64)) for j in range(max(e1 for (_, e1) in biv[i0]) + 1)]
    negQ = [VF.neg(c) for c in Q]
    # eliminated polynomials in x_v1
    G = []
    for i, b in enumerate(biv):
        if i == i0:
            continue
        d0 = max(e0 for (e0, _) in b)
        acc = [np.zeros(shape, dtype=np.int64)]
        pw_negQ = {0: [np.ones(shape, dtype=np.int64)]}
        for e in range(1, d0 + 1):
            pw_negQ[e] = _upoly_mul(VF, pw_negQ[e - 1], negQ)
        for (e0, e1), c in b.items():
            coeff = VF.mul(c, VF.pow(ell, d0 - e0))
            poly = [VF.mul(coeff, x) for x in pw_negQ[e0]]
            poly = [np.zeros(shape, dtype=np.int64)] * e1 + poly
            acc = _upoly_add(VF, acc, poly)
        G.append(acc)
    good = ell != 0
    cand_rows, cand_x1 = _common_roots(F, VF, G, good, budget)
    if len(cand_rows):
        l_inv = np.array([F.inv(int(x)) for x in ell[cand_rows]], dtype=np.int64) if not VF.prime else \
            np.array([pow(int(x), -1, F.p) for x in ell[cand_rows]], dtype=np.int64)
        qv = np.zeros(len(cand_rows), dtype=np.int64)
        for j in reversed(range(len(Q))):
            qv = VF.add(VF.mul(qv, cand_x1), Q[j][cand_rows])
        x0s = VF.neg(VF.mul(qv, l_inv))
        coords = np.zeros((len(cand_rows), n), dtype=np.int64)
        coords[:, v0] = x0s
        coords[:, v1] = cand_x1
        for s, j in zip(scan_vars, range(m)):
            coords[:, s] = scan[cand_rows, j]
        vals = [_vec_eval(VF, t, [coords[:, j] for j in range(n)], (coords.shape[0],)) for t in terms_list]
        ok = np.all(np.stack(vals) == 0, axis=0)
        for r in coords[ok]:
            pts.append(CurvePoint.make(model, [int(x) for x in r], F))
    # rows where the eliminating coefficient vanishes
    for r in np.nonzero(~good)[0]:
        sv = [int(scan[r, j]) for j in range(m)]
        pts.extend(_solve_row_scalar(model, F, v0, v1, scan_vars, sv))
    return pts


def _restrict_bivariate(model, F, v0, v1, scan_vars, sv):
    """Forms as dicts (e0, e1) -> coefficient after fixing the scan coordinates."""
    out = []
    for G in model.forms:
        d = {}
        for e, c in G.terms.items():
            t = _coef(F, c)
            for s, val in zip(scan_vars, sv):
                if e[s]:
                    t = F.mul(t, F.pow(val, e[s]))
            if t:
                key = (e[v0], e[v1])
                d[key] = F.add(d.get(key, 0), t)
        out.append({k: v for k, v in d.items() if v})
    return out


def _gcd_roots(polys, F):
    """Common roots of univariate polynomials; None if all vanish identically."""
    nz = [pp for pp in (poly_trim(x) for x in polys) if pp]
    if not nz:
        return None
    g = nz[0]
    for pp in nz[1:]:
        g = poly_gcd(g, pp, F)
        if len(g) <= 1:
            return []
    return poly_roots(g, F) if len(g) > 1 else []


def _uni(d, var, F, other=None):
    """Univariate polynomial in coordinate `var` (0 or 1) of a bivariate dict, other one fixed."""
    deg = max((k[var] for k in d), default=0)
    out = [0] * (deg + 1)
    for k, c in d.items():
        t = c if other is None else F.mul(c, F.pow(other, k[1 - var]))
        out[k[var]] = F.add(out[k[var]], t)
    return out


def _solve_row_scalar(model, F, v0, v1, scan_vars, sv):
    """Affine points (x_v0, x_v1) over fixed scan coordinates, by univariate root finding."""
    n = model.nvars
    biv = _restrict_bivariate(model, F, v0, v1, scan_vars, sv)
    pure = [_uni(d, 1, F) for d in biv if all(k[0] == 0 for k in d)]
    x1s = _gcd_roots(pure, F) if pure else None
    if x1s is None:
        x1s = list(F.elements())
    out = []
    for x1 in x1s:
        x0s = _gcd_roots([_uni(d, 0, F, x1) for d in biv], F)
        if x0s is None:
            x0s = list(F.elements())
        for x0 in x0s:
            c = [0] * n
            c[v0], c[v1] = x0, x1
            for s, val in zip(scan_vars, sv):
                c[s] = val
            out.append(CurvePoint.make(model, c, F))
    return out


def _line_points(model, F, v0, v1):
    """Points with all coordinates other than x_v0, x_v1 zero."""
    n = model.nvars
    out = []
    biv = [{(e[v0], e[v1]): _coef(F, c) for e, c in G.terms.items()
            if all(e[j] == 0 for j in range(n) if j not in (v0, v1))} for G in model.forms]
    c = [0] * n
    c[v0] = 1
    if all(G.eval(F, c) == 0 for G in model.forms):
        out.append(CurvePoint.make(model, c, F))
    roots = _gcd_roots([_uni(d, 0, F, F.one) for d in biv], F)
    for x0 in (roots if roots is not None else list(F.elements())):
        c = [0] * n
        c[v0], c[v1] = x0, 1
        out.append(CurvePoint.make(model, c, F))
    return out


def _common_roots(F, VF, G, rows_mask, budget):
    """Common roots in x of the polynomial arrays G on the masked rows."""
    idx = np.nonzero(rows_mask)[0]
    if not len(idx):
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    Gs = [[c[idx] for c in g] for g in G]
    deg = max(len(g) for g in Gs) - 1
    R = len(idx)
    out_rows, out_x = [], []
    if deg <= 2 and F.p != 2:
        # roots of the first polynomial that does not vanish identically on the row
        chosen = np.full(R, -1)
        for gi, g in enumerate(Gs):
            nzrow = np.zeros(R, dtype=bool)
            for c in g:
                nzrow |= c != 0
            chosen[(chosen < 0) & nzrow] = gi
        for gi, g in enumerate(Gs):
            sel = np.nonzero(chosen == gi)[0]
            if not len(sel):
                continue
            g = g + [np.zeros(R, dtype=np.int64)] * (3 - len(g))
            a, b, c = g[2][sel], g[1][sel], g[0][sel]
            quad = a != 0
            lin = (~quad) & (b != 0)
            # linear rows
            ls = sel[lin]
            if len(ls):
                binv = np.array([F.inv(int(x)) for x in b[lin]], dtype=np.int64)
                out_rows.append(ls)
                out_x.append(VF.neg(VF.mul(c[lin], binv)))
            qs = np.nonzero(quad)[0]
            if len(qs):
                aa, bb, cc = a[qs], b[qs], c[qs]
                four = F.from_int(4)
                disc = VF.sub(VF.mul(bb, bb), VF.mul(VF.const(four, aa.shape), VF.mul(aa, cc)))
                ok, r = _vec_sqrt(F, disc)
                inv2a = np.array([F.inv(F.mul(2, int(x))) for x in aa], dtype=np.int64)
                for sgn in (1, -1):
                    rr = r if sgn == 1 else VF.neg(r)
                    x = VF.mul(VF.sub(rr, bb), inv2a)
                    out_rows.append(sel[qs][ok])
                    out_x.append(x[ok])
        all_zero = np.nonzero(chosen < 0)[0]
        for r in all_zero:
            out_rows.append(np.full(F.q, r))
            out_x.append(np.arange(F.q, dtype=np.int64))
    elif F.q * R <= 3 * 10 ** 7:
        chunk = max(1, 2 * 10 ** 6 // F.q)
        xs = np.arange(F.q, dtype=np.int64)
        for start in range(0, R, chunk):
            sl = slice(start, min(R, start + chunk))
            mask = None
            for g in Gs:
                coeffs = [c[sl][:, None] for c in g]
                X = np.broadcast_to(xs[None, :], (coeffs[0].shape[0], F.q))
                acc = np.zeros(X.shape, dtype=np.int64)
                for c in reversed(coeffs):
                    acc = VF.add(VF.mul(acc, X), np.broadcast_to(c, X.shape))
                m = acc == 0
                mask = m if mask is None else (mask & m)
            rr, xx = np.nonzero(mask)
            out_rows.append(rr + start)
            out_x.append(xx.astype(np.int64))
    else:
        if R > budget:
            raise BudgetExceeded("scalar root scan exceeds budget")
        for r in range(R):
            polys = [poly_trim([int(c[r]) for c in g]) for g in Gs]
            nz = [pp for pp in polys if pp]
            if not nz:
                roots = list(range(F.q))
            else:
                gg = nz[0]
                for pp in nz[1:]:
                    gg = poly_gcd(gg, pp, F)
                    if len(gg) <= 1:
                        break
                roots = poly_roots(gg, F) if len(gg) > 1 else []
            if roots:
                out_rows.append(np.full(len(roots), r))
                out_x.append(np.array(roots, dtype=np.int64))
    if not out_rows:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    rows = np.concatenate(out_rows).astype(np.int64)
    xs = np.concatenate(out_x).astype(np.int64)
    return idx[rows], xs


def count_points(model: CurveModel, k: int, budget: int = 10 ** 7) -> int:
    return len(enumerate_points(model, k, budget))


def places(model: CurveModel, d: int, budget: int = 10 ** 7) -> list[CurvePoint]:
    """One representative per closed point of exact degree d."""
    pts = enumerate_points(model, d, budget)
    seen = set()
    out = []
    for P in pts:
        if P.degree != d:
            continue
        key = P.orbit_key()
        if key in seen:
            continue
        seen.add(key)
        out.append(CurvePoint(key, P.field))
    return out


# ---------------------------------------------------------------------------
# local expansions

@dataclass
class LocalExpansion:
    """Coordinate series at a point in terms of a uniformiser t.

    For ci models ``series`` holds x_j/x_b for every j (with x_b = 1).  For
    hyperelliptic models it holds (x, y) in the affine chart or (u, v) with
    u = 1/x, v = y/x^(g+1) at infinity.
    """

    model: CurveModel
    point: CurvePoint
    chart: int  # ci: index b; hyperelliptic: 0 affine, 1 infinity
    uvar: int  # index of the coordinate whose shift is t
    centre: object
    series: list
    prec: int

    @property
    def field(self):
        return self.point.field

    def uniformiser_label(self) -> str:
        if self.model.kind == "ci":
            return f"x{self.uvar}/x{self.chart} - {self.centre}"
        names = ("x", "y") if self.chart == 0 else ("u", "v")
        return f"{names[self.uvar]} - {self.centre}"


def _dehomogenise(G: MPoly, b: int) -> MPoly:
    t = {}
    for e, c in G.terms.items():
        e2 = list(e)
        e2[b] = 0
        t[tuple(e2)] = t.get(tuple(e2), 0) + c
    return MPoly(G.nvars, t)


def expand_coordinates(model: CurveModel, P: CurvePoint, prec: int, chart: int | None = None,
                       uvar: int | None = None) -> LocalExpansion:
    """Series for all affine coordinates in a coordinate-ratio uniformiser t = x_a/x_b - c."""
    if prec < 1:
        raise CurveError("precision must be positive")
    if model.kind == "hyperelliptic":
        return _expand_hyperelliptic(model, P, prec, chart, uvar)
    F = P.field
    n = model.nvars
    coords = P.coords
    if chart is None:
        chart = next(j for j, x in enumerate(coords) if not F.is_zero(x))
    elif F.is_zero(coords[chart]):
        raise CurveError("chart coordinate vanishes at the point")
    inv = F.inv(coords[chart])
    y0 = [F.mul(x, inv) for x in coords]
    fs = [_dehomogenise(G, chart) for G in model.forms]
    affine = [j for j in range(n) if j != chart]
    J = [[fi.partial(j).eval(F, y0) for j in affine] for fi in fs]
    candidates = [uvar] if uvar is not None else affine
    chosen = None
    for a in candidates:
        cols = [i for i, j in enumerate(affine) if j != a]
        sub = [[row[c] for c in cols] for row in J]
        rank, _ = mat_rank_kernel(FieldMatrix(F, sub))
        if rank == len(fs):
            chosen = a
            break
    if chosen is None:
        raise CurveError("no coordinate ratio is a uniformiser (singular point?)")
    a = chosen
    others = [j for j in affine if j != a]
    sub = [[fi.partial(j).eval(F, y0) for j in others] for fi in fs]
    Jinv = _mat_inverse(F, sub)
    ser = []
    for j in range(n):
        if j == chart:
            ser.append(TruncatedSeries.const(F, F.one, prec))
        elif j == a:
            ser.append(TruncatedSeries(F, [y0[j], F.one], prec))
        else:
            ser.append(TruncatedSeries.const(F, y0[j], prec))
    # linear-convergence Newton: each pass fixes at least one more coefficient
    for _ in range(prec + 1):
        res = [fi.eval_series(F, ser) for fi in fs]
        if all(r.is_zero() for r in res):
            break
        for k, j in enumerate(others):
            corr = TruncatedSeries.zero(F, prec)
            for i, r in enumerate(res):
                if not F.is_zero(Jinv[k][i]):
                    corr = corr + r.scale(Jinv[k][i])
            ser[j] = ser[j] - corr
    else:
        raise CurveError("series solution did not converge")
    return LocalExpansion(model, P, chart, a, y0[a], ser, prec)


def _mat_inverse(F, M):
    n = len(M)
    A = [list(r) + [F.one if i == j else F.zero for j in range(n)] for i, r in enumerate(M)]
    R, piv = rref_generic(FieldMatrix(F, A))
    if piv[:n] != list(range(n)):
        raise CurveError("singular matrix")
    return [row[n:] for row in R[:n]]


def _hyp_chart_polys(model, F, chart):
    g = model.genus
    f = [model.field_elt(F, c) for c in model.f] + [F.zero] * (2 * g + 3 - len(model.f))
    h = [model.field_elt(F, c) for c in model.h] + [F.zero] * (g + 2 - len(model.h))
    f = f[:2 * g + 3]
    h = h[:g + 2]
    if chart == 0:
        return f, h
    # u = 1/x, v = y u^(g+1): v^2 + h~(u) v = f~(u)
    return list(reversed(f)), list(reversed(h))


def _expand_hyperelliptic(model, P, prec, chart, uvar):
    F = P.field
    X, Y, Z = P.coords
    if chart is None:
        chart = 0 if not F.is_zero(Z) else 1
    if chart == 0:
        if F.is_zero(Z):
            raise CurveError("affine chart needs Z != 0")
        x0, y0 = F.div(X, Z), F.mul(Y, F.inv(F.pow(Z, model.genus + 1)))
    else:
        if F.is_zero(X):
            raise CurveError("infinity chart needs X != 0")
        x0, y0 = F.div(Z, X), F.mul(Y, F.inv(F.pow(X, model.genus + 1)))
    f, h = _hyp_chart_polys(model, F, chart)

    def upoly_eval_s(cs, s):
        acc = TruncatedSeries.zero(F, prec)
        for c in reversed(cs):
            acc = acc * s + c
        return acc

    def upoly_eval(cs, x):
        acc = F.zero
        for c in reversed(cs):
            acc = F.add(F.mul(acc, x), c)
        return acc

    def deriv(cs):
        return [F.mul(F.from_int(i), cs[i]) for i in range(1, len(cs))]

    dy = F.add(F.mul(F.from_int(2), y0), upoly_eval(h, x0))
    dx = F.sub(F.mul(y0, upoly_eval(deriv(h), x0)) if len(h) > 1 else F.zero, upoly_eval(deriv(f), x0))
    if uvar is None:
        uvar = 0 if not F.is_zero(dy) else 1
    if uvar == 0 and F.is_zero(dy):
        raise CurveError("x is not a uniformiser here")
    if uvar == 1 and F.is_zero(dx):
        raise CurveError("y is not a uniformiser here")
    if uvar == 0:
        xs = TruncatedSeries(F, [x0, F.one], prec)
        ys = TruncatedSeries.const(F, y0, prec)
        inv = F.inv(dy)
        for _ in range(prec + 1):
            res = ys * ys + upoly_eval_s(h, xs) * ys - upoly_eval_s(f, xs)
            if res.is_zero():
                break
            ys = ys - res.scale(inv)
        series = [xs, ys]
        centre = x0
    else:
        ys = TruncatedSeries(F, [y0, F.one], prec)
        xs = TruncatedSeries.const(F, x0, prec)
        inv = F.inv(dx)
        for _ in range(prec + 1):
            res = ys * ys + upoly_eval_s(h, xs) * ys - upoly_eval_s(f, xs)
            if res.is_zero():
                break
            xs = xs - res.scale(inv)
        series = [xs, ys]
        centre = y0
    return LocalExpansion(model, P, chart, uvar, centre, series, prec)


def differential_expand(model: CurveModel, omega: Differential, exp: LocalExpansion) -> TruncatedSeries:
    """Coefficients a_j with omega = sum a_j t^j dt in the expansion's uniformiser."""
    F = exp.field
    if model.kind == "hyperelliptic":
        return _hyp_differential(model, omega, exp)
    n = model.nvars
    b, a = exp.chart, exp.uvar
    affine = [j for j in range(n) if j != b]
    others = [j for j in affine if j != a]
    fs = [_dehomogenise(G, b) for G in model.forms]
    Jser = [[fi.partial(j).eval_series(F, exp.series) for j in others] for fi in fs]
    det = _series_det(F, Jser, exp.prec)
    L = TruncatedSeries.zero(F, exp.prec)
    for j, c in enumerate(omega.coeffs):
        c = model.field_elt(F, c) if F.characteristic else Fraction(c)
        if not F.is_zero(c):
            L = L + exp.series[j].scale(c)
    sign = (-1) ** (b + affine.index(a))
    out = L / det
    if sign < 0:
        out = -out
    if out.valuation() < 0:
        raise CurveError("differential is not regular at the point")
    return out


def _series_det(F, M, prec):
    n = len(M)
    if n == 0:
        return TruncatedSeries.const(F, F.one, prec)
    if n == 1:
        return M[0][0]
    total = TruncatedSeries.zero(F, prec)
    for perm in itertools.permutations(range(n)):
        sgn = _perm_sign(perm)
        term = TruncatedSeries.const(F, F.one, prec)
        for i, j in enumerate(perm):
            term = term * M[i][j]
        total = total + term if sgn > 0 else total - term
    return total


def _perm_sign(perm):
    s = 1
    p = list(perm)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            s = -s
    return s


def _hyp_differential(model, omega, exp):
    F = exp.field
    g = model.genus
    f, h = _hyp_chart_polys(model, F, exp.chart)
    xs, ys = exp.series
    prec = exp.prec

    def upoly_eval_s(cs, s):
        acc = TruncatedSeries.zero(F, prec)
        for c in reversed(cs):
            acc = acc * s + c
        return acc

    P = [model.field_elt(F, c) if F.characteristic else Fraction(c) for c in omega.coeffs]
    if exp.chart == 0:
        num = upoly_eval_s(P, xs)
    else:
        # x^i dx/(2y+h) = -u^(g-1-i) du/(2v + h~(u))
        num = TruncatedSeries.zero(F, prec)
        for i, c in enumerate(P):
            if not F.is_zero(c):
                num = num - (xs ** (g - 1 - i)).scale(c)
    den = ys.scale(F.from_int(2)) + upoly_eval_s(h, xs)
    dxdt = xs.derivative()
    # derivative loses one order; re-pad to keep the working precision bookkeeping simple
    num = (num.truncate(dxdt.prec) * dxdt)
    out = num / den.truncate(dxdt.prec)
    if out.valuation() < 0:
        raise CurveError("differential is not regular at the point")
    return out


def uniformiser_series(exp_from: LocalExpansion, chart: int, uvar: int, centre) -> TruncatedSeries:
    """Express the coordinate-ratio uniformiser (chart, uvar, centre) as a series in exp_from's t."""
    F = exp_from.field
    model = exp_from.model
    if model.kind == "ci":
        num = exp_from.series[uvar]
        den = exp_from.series[chart]
        return num / den - centre
    xs, ys = exp_from.series
    g = model.genus
    if chart == exp_from.chart:
        return exp_from.series[uvar] - centre
    # switch between affine (x, y) and infinity (u, v)
    u = TruncatedSeries.const(F, F.one, xs.prec) / xs
    v = ys * (u ** (g + 1))
    return (u if uvar == 0 else v) - centre


def change_uniformiser(omega_t: TruncatedSeries, t_in_s: TruncatedSeries) -> TruncatedSeries:
    """Given omega = a(t) dt and t = T(s), return b(s) with omega = b(s) ds."""
    comp = omega_t.compose(t_in_s)
    d = t_in_s.derivative()
    n = min(comp.prec, d.prec)
    return (comp.truncate(n) * d.truncate(n)).truncate(n)


# ---------------------------------------------------------------------------
# involutions, ramification and divisor transport

def apply_matrix(F: Field, W, P: CurvePoint, model: CurveModel) -> CurvePoint:
    Wf = [[model.field_elt(F, c) if F.characteristic else Fraction(c) for c in row] for row in W]
    c = [F.zero] * len(P.coords)
    for i, row in enumerate(Wf):
        acc = F.zero
        for wij, xj in zip(row, P.coords):
            acc = F.add(acc, F.mul(wij, xj))
        c[i] = acc
    return CurvePoint.make(model, c, F)


def hyperelliptic_involution(model: CurveModel):
    """The map (x, y) -> (x, -y - h(x)) as a callable on points."""
    def act(P: CurvePoint) -> CurvePoint:
        F = P.field
        X, Y, Z = P.coords
        g = model.genus
        hh = [model.field_elt(F, c) for c in model.h] + [F.zero] * (g + 2 - len(model.h))
        Hv = _binary_eval(F, hh[:g + 2], X, Z, g + 1)
        return CurvePoint.make(model, [X, F.neg(F.add(Y, Hv)), Z], F)
    return act


def derive_involution(model: CurveModel, pairs: Sequence[tuple], F: Field = QQ):
    """Matrix W (unique up to scalar) with W P = lambda P' for every pair, normalised W^2 = I.

    On hyperelliptic models W is the 2x2 matrix acting on the affine (x, y) chart.
    """
    if model.kind != "ci":
        return _derive_affine_involution(pairs, F)
    n = model.nvars
    if len(pairs) < n + 3:
        raise CurveError(f"need at least {n + 3} point pairs")
    nunk = n * n + len(pairs)
    rows = []
    for k, (P, P2) in enumerate(pairs):
        for i in range(n):
            r = [F.zero] * nunk
            for j in range(n):
                r[i * n + j] = P.coords[j]
            r[n * n + k] = F.neg(P2.coords[i])
            rows.append(r)
    rank, ker = mat_rank_kernel(FieldMatrix(F, rows))
    if len(ker) != 1:
        raise CurveError("point pairs are insufficient or inconsistent")
    v = ker[0]
    W = [[v[i * n + j] for j in range(n)] for i in range(n)]
    W2 = [[_dot(F, W[i], [W[k][j] for k in range(n)]) for j in range(n)] for i in range(n)]
    lam = W2[0][0]
    if any(not F.is_zero(F.sub(W2[i][j], lam if i == j else F.zero)) for i in range(n) for j in range(n)):
        raise CurveError("derived matrix does not square to a scalar")
    if F.characteristic == 0:
        s = Fraction(lam)
        root = _rational_sqrt(s)
        if root is not None:
            W = [[x / root for x in row] for row in W]
    return W


def _derive_affine_involution(pairs: Sequence[tuple], F: Field):
    if len(pairs) < 3:
        raise CurveError("need at least 3 point pairs")
    rows = []
    for P, P2 in pairs:
        if F.is_zero(P.coords[2]) or F.is_zero(P2.coords[2]):
            raise CurveError("point pairs must lie in the affine chart")
        x, y = P.coords[:2]
        for i in range(2):
            r = [F.zero] * 5
            r[2 * i], r[2 * i + 1] = x, y
            r[4] = F.neg(P2.coords[i])
            rows.append(r)
    _, ker = mat_rank_kernel(FieldMatrix(F, rows))
    ker = [v for v in ker if not F.is_zero(v[4])]
    if len(ker) != 1 or mat_rank_kernel(FieldMatrix(F, rows))[0] != 4:
        raise CurveError("point pairs are insufficient or inconsistent")
    v = ker[0]
    s = F.inv(v[4])
    W = [[F.mul(v[0], s), F.mul(v[1], s)], [F.mul(v[2], s), F.mul(v[3], s)]]
    W2 = [[_dot(F, W[i], [W[0][j], W[1][j]]) for j in range(2)] for i in range(2)]
    if W2 != [[F.one, F.zero], [F.zero, F.one]]:
        raise CurveError("derived matrix is not an involution")
    return W


def _rational_sqrt(x: Fraction):
    if x <= 0:
        return None
    a, b = math.isqrt(x.numerator), math.isqrt(x.denominator)
    if a * a == x.numerator and b * b == x.denominator:
        return Fraction(a, b)
    return None


def _dot(F, a, b):
    acc = F.zero
    for x, y in zip(a, b):
        acc = F.add(acc, F.mul(x, y))
    return acc


def involution_preserves_ideal(model: CurveModel, W) -> bool:
    """Each transformed form lies in the span of monomial multiples of the forms (same degree)."""
    n = model.nvars
    for G in model.forms:
        H = G.linear_transform(W)
        if not _in_ideal_degree(model, H):
            return False
    return True


def _in_ideal_degree(model, H: MPoly) -> bool:
    d = H.degree()
    if H.is_zero():
        return True
    n = model.nvars
    mons = monomials(n, d)
    idx = {m: i for i, m in enumerate(mons)}
    gens = []
    for G in model.forms:
        dg = G.degree()
        if dg > d:
            continue
        for m in monomials(n, d - dg):
            row = [Fraction(0)] * len(mons)
            for e, c in G.terms.items():
                row[idx[tuple(a + b for a, b in zip(e, m))]] += c
            gens.append(row)
    target = [Fraction(0)] * len(mons)
    for e, c in H.terms.items():
        target[idx[e]] += c
    r1, _ = mat_rank_kernel(FieldMatrix(QQ, gens)) if gens else (0, None)
    r2, _ = mat_rank_kernel(FieldMatrix(QQ, gens + [target]))
    return r1 == r2


def is_fixed(model: CurveModel, W, P: CurvePoint) -> bool:
    return apply_matrix(P.field, W, P, model) == P


def pullback_uniformiser(model: CurveModel, W, exp: LocalExpansion) -> TruncatedSeries:
    """Series (in exp's t) of u = t * (t o W), a W-invariant function; it is rho^* of a
    uniformiser at the image point when the fibre is {P} ramified or {P, W(P)} with
    t finite and nonzero at W(P)."""
    F = exp.field
    b, a, c = exp.chart, exp.uvar, exp.centre
    Wf = [[model.field_elt(F, x) if F.characteristic else Fraction(x) for x in row] for row in W]
    lin = []
    for row in (Wf[a], Wf[b]):
        acc = TruncatedSeries.zero(F, exp.prec)
        for wij, s in zip(row, exp.series):
            if not F.is_zero(wij):
                acc = acc + s.scale(wij)
        lin.append(acc)
    t = exp.series[a] / exp.series[b] - c
    tw = lin[0] / lin[1] - c
    return t * tw


def _separating_chart(model: CurveModel, W, P: CurvePoint, fixed: bool) -> tuple:
    """(chart, uvar) whose uniformiser t is finite and nonzero at W(P) when W(P) != P."""
    if fixed or model.kind != "ci":
        return (None, None)
    F = P.field
    Q = apply_matrix(F, W, P, model)
    for ch in range(model.nvars):
        if F.is_zero(P.coords[ch]) or F.is_zero(Q.coords[ch]):
            continue
        for uv in range(model.nvars):
            if uv == ch or F.div(Q.coords[uv], Q.coords[ch]) == F.div(P.coords[uv], P.coords[ch]):
                continue
            try:
                expand_coordinates(model, P, 2, chart=ch, uvar=uv)
            except CurveError:
                continue
            return (ch, uv)
    raise CurveError("no coordinate uniformiser separates the fibre")


def ramification_data(model: CurveModel, W, P: CurvePoint, prec: int, exp: LocalExpansion | None = None):
    """Ramification index of the quotient by W at P and the root uniformiser s with s^e = rho^* t_R.

    Returns (e, s_series_in_t, t_series_in_s, u_series_in_t) where u = rho^* t_R.
    """
    F = P.field
    fixed = is_fixed(model, W, P)
    if exp is None:
        exp = expand_coordinates(model, P, prec + 2, *_separating_chart(model, W, P, fixed))
    u = pullback_uniformiser(model, W, exp)
    e = u.valuation() if fixed else 1
    if fixed and e != 2:
        raise CurveError("fixed point of an involution must have ramification index 2")
    if F.characteristic and e % F.characteristic == 0:
        raise CurveError("residue characteristic divides the ramification index")
    if e == 1:
        # unramified: rho^* t_R is itself a uniformiser at P (after unit normalisation)
        if u.valuation() != 1:
            raise CurveError("pullback uniformiser has unexpected valuation")
        lead = u.coeffs[1]
        s = u.scale(F.inv(lead))
        return 1, s, s.reversion(), s
    lead = u.coeffs[e]
    un = u.scale(F.inv(lead))
    s, _ = un.nth_root(e)
    return e, s, s.reversion(), un


def transport_divisor(model: CurveModel, W, D: EffDivisor, direction: str) -> EffDivisor:
    """Pullback or pushforward along the quotient by W, with divisors on the quotient
    represented by orbit representatives on X."""
    if direction not in ("pullback", "pushforward"):
        raise CurveError("direction must be pullback or pushforward")
    act = (lambda P: apply_matrix(P.field, W, P, model)) if model.kind == "ci" else W
    out = []
    for P, m in D.places:
        Q = act(P)
        fixed = Q.orbit_key() == P.orbit_key()
        if direction == "pullback":
            if fixed:
                out.append((P, 2 * m))
            else:
                out.append((P, m))
                out.append((Q, m))
        else:
            out.append((min(P, Q, key=lambda R: R.orbit_key()), m))
    return EffDivisor.from_points(out)


# ---------------------------------------------------------------------------
# section ring over F_p and Riemann-Roch spaces

class SectionRing:
    """R_m = H^0(m H) for the hyperplane class H (ci) or the polar divisor of x (hyperelliptic).

    Elements of R_m are coefficient vectors over F_p in a fixed basis.
    """

    def __init__(self, model: CurveModel):
        if model.field.characteristic == 0 or not isinstance(model.field, GF) or model.field.k != 1:
            raise CurveError("section rings are built over prime fields")
        self.model = model
        self.p = model.p
        self.F = model.field
        self.g = model.genus
        self.h = 2 * self.g - 2 if model.kind == "ci" else 2
        self._basis: dict = {}
        self._red: dict = {}
        self._tensor: dict = {}
        self._exp_cache: dict = {}
        if model.kind == "ci":
            self.n = model.nvars
            self.forms = [{e: _coef(self.F, c) for e, c in G.terms.items()} for G in model.forms]
        else:
            self.f = [int(_coef(self.F, c)) for c in model.f]
            self.hh = [int(_coef(self.F, c)) for c in model.h]

    # bases
    def basis(self, m: int) -> list:
        if m not in self._basis:
            if self.model.kind == "ci":
                self._build_ci(m)
            else:
                g = self.g
                self._basis[m] = [("x", i) for i in range(m + 1)] + [("y", j) for j in range(m - g)]
        return self._basis[m]

    def dim(self, m: int) -> int:
        return len(self.basis(m))

    def _build_ci(self, m):
        p = self.p
        mons = monomials(self.n, m)
        idx = {e: i for i, e in enumerate(mons)}
        rows = []
        for G in self.forms:
            dg = max(sum(e) for e in G)
            if dg > m:
                continue
            for mm in monomials(self.n, m - dg):
                r = np.zeros(len(mons), dtype=np.int64)
                for e, c in G.items():
                    r[idx[tuple(a + b for a, b in zip(e, mm))]] += c
                rows.append(r % p)
        if rows:
            R, piv = rref_modp(np.array(rows), p)
        else:
            R, piv = np.zeros((0, len(mons)), dtype=np.int64), np.zeros(0, dtype=np.int64)
        pivset = set(int(c) for c in piv)
        nonpiv = [c for c in range(len(mons)) if c not in pivset]
        # reduction matrix: monomial index -> coordinates in the standard-monomial basis
        red = np.zeros((len(mons), len(nonpiv)), dtype=np.int64)
        for j, c in enumerate(nonpiv):
            red[c, j] = 1
        for i, c in enumerate(piv):
            red[int(c), :] = (-R[i, nonpiv]) % p
        self._basis[m] = [mons[c] for c in nonpiv]
        self._red[m] = (idx, red)

    def reduce_monomial(self, e) -> np.ndarray:
        m = sum(e)
        self.basis(m)
        idx, red = self._red[m]
        return red[idx[tuple(e)]]

    def tensor(self, a: int, b: int) -> np.ndarray:
        key = (a, b)
        if key not in self._tensor:
            Ba, Bb = self.basis(a), self.basis(b)
            nc = self.dim(a + b)
            T = np.zeros((len(Ba), len(Bb), nc), dtype=np.int64)
            if self.model.kind == "ci":
                for i, ea in enumerate(Ba):
                    for j, eb in enumerate(Bb):
                        T[i, j] = self.reduce_monomial(tuple(x + y for x, y in zip(ea, eb)))
            else:
                for i, ea in enumerate(Ba):
                    for j, eb in enumerate(Bb):
                        T[i, j] = self._hyp_product(ea, eb, a + b)
            self._tensor[key] = T
        return self._tensor[key]

    def _hyp_product(self, ea, eb, m):
        p, g = self.p, self.g
        out = np.zeros(self.dim(m), dtype=np.int64)
        bas = {b: i for i, b in enumerate(self.basis(m))}
        (ka, ia), (kb, ib) = ea, eb
        if ka == "x" and kb == "x":
            out[bas[("x", ia + ib)]] = 1
        elif ka != kb:
            out[bas[("y", ia + ib)]] = 1
        else:
            # x^(ia+ib) y^2 = x^(ia+ib) (f - h y)
            s = ia + ib
            for k, c in enumerate(self.f):
                if c:
                    out[bas[("x", s + k)]] = (out[bas[("x", s + k)]] + c) % p
            for k, c in enumerate(self.hh):
                if c:
                    out[bas[("y", s + k)]] = (out[bas[("y", s + k)]] - c) % p
        return out % p

    # products and division of subspaces
    def mul_spaces(self, A: np.ndarray, a: int, B: np.ndarray, b: int) -> np.ndarray:
        p = self.p
        if A.shape[0] == 0 or B.shape[0] == 0:
            return np.zeros((0, self.dim(a + b)), dtype=np.int64)
        T = self.tensor(a, b)
        AT = np.einsum("ik,klm->ilm", A, T) % p
        P = np.einsum("jl,ilm->ijm", B, AT) % p
        P = P.reshape(-1, T.shape[2])
        R, _ = rref_modp(P, p)
        return R

    def mul_element(self, s: np.ndarray, a: int, B: np.ndarray, b: int) -> np.ndarray:
        """s * B row by row (no echelon step)."""
        T = self.tensor(a, b)
        sT = np.einsum("k,klm->lm", s, T) % self.p
        return (B @ sT) % self.p

    def residual(self, a: int, M: np.ndarray, b: int, V: np.ndarray) -> np.ndarray:
        """{s in R_a : s * M subset V} with M in R_b and V in R_(a+b) (V in echelon form)."""
        p = self.p
        na, nab = self.dim(a), self.dim(a + b)
        if M.shape[0] == 0:
            return np.eye(na, dtype=np.int64)
        V = np.asarray(V, dtype=np.int64)
        if V.shape[0]:
            V, piv = rref_modp(V, p)
        else:
            piv = np.zeros(0, dtype=np.int64)
        pivset = set(int(c) for c in piv)
        nonpiv = [c for c in range(nab) if c not in pivset]
        if not nonpiv:
            return np.eye(na, dtype=np.int64)
        Qm = np.zeros((nab, len(nonpiv)), dtype=np.int64)
        for j, c in enumerate(nonpiv):
            Qm[c, j] = 1
        for i, c in enumerate(piv):
            Qm[int(c), :] = (-V[i, nonpiv]) % p
        T = self.tensor(a, b)
        MT = np.einsum("jl,klm->jkm", M, T) % p  # (rM, na, nab)
        C = np.einsum("jkm,mq->kjq", MT, Qm) % p  # (na, rM, q)
        C = C.reshape(na, -1)
        K = kernel_modp(C.T.copy(), p)
        if K.shape[0] == 0:
            return K.reshape(0, na)
        R, _ = rref_modp(K, p)
        return R

    # local expansions of basis elements
    def basis_expansion(self, P: CurvePoint, m: int, order: int):
        """Matrix (dim R_m x order) over P's field: expansions of basis sections at P."""
        key = (P.coords, P.field.q, m, order)
        if key in self._exp_cache:
            return self._exp_cache[key]
        F = P.field
        exp = self._expansion(P, order)
        rows = []
        if self.model.kind == "ci":
            pw: dict = {}
            for e in self.basis(m):
                s = TruncatedSeries.const(F, F.one, order)
                for j, k in enumerate(e):
                    if k:
                        if (j, k) not in pw:
                            pw[(j, k)] = (exp.series[j] ** k).truncate(order)
                        s = s * pw[(j, k)]
                rows.append(list(s.truncate(order).coeffs))
        else:
            xs, ys = exp.series
            g = self.g
            for kind, i in self.basis(m):
                if exp.chart == 0:
                    s = xs ** i if kind == "x" else (xs ** i) * ys
                else:
                    s = xs ** (m - i) if kind == "x" else (xs ** (m - i - g - 1)) * ys
                rows.append(list(s.truncate(order).coeffs))
        self._exp_cache[key] = rows
        return rows

    def _expansion(self, P, order):
        key = ("exp", P.coords, P.field.q)
        ex = self._exp_cache.get(key)
        if ex is None or ex.prec < order:
            ex = expand_coordinates(self.model, P, max(order, 4))
            self._exp_cache[key] = ex
        return ex

    def vanishing_conditions(self, D: EffDivisor, m: int) -> np.ndarray:
        """F_p-linear conditions (columns) whose common kernel is W_D(m)."""
        cols = []
        for P, mult in D.places:
            rows = self.basis_expansion(P, m, mult)
            F = P.field
            for j in range(mult):
                vals = [r[j] for r in rows]
                if isinstance(F, GF) and F.k > 1:
                    digits = np.array([F.to_vec(v) for v in vals], dtype=np.int64)
                    for d in range(F.k):
                        cols.append(digits[:, d])
                else:
                    cols.append(np.array([int(v) for v in vals], dtype=np.int64))
        if not cols:
            return np.zeros((self.dim(m), 0), dtype=np.int64)
        return np.stack(cols, axis=1) % self.p

    def W(self, D: EffDivisor, m: int) -> np.ndarray:
        """Echelon basis of sections of R_m vanishing on D."""
        C = self.vanishing_conditions(D, m)
        n = self.dim(m)
        if C.shape[1] == 0:
            return np.eye(n, dtype=np.int64)
        K = kernel_modp(C.T.copy(), self.p)
        if K.shape[0] == 0:
            return K.reshape(0, n)
        return rref_modp(K, self.p)[0]

    def order_at(self, s: np.ndarray, m: int, P: CurvePoint, cap: int) -> int:
        """Vanishing order (capped) of the section s of R_m at P."""
        rows = self.basis_expansion(P, m, cap)
        F = P.field
        for j in range(cap):
            acc = F.zero
            for c, r in zip(s, rows):
                if c:
                    acc = F.add(acc, F.mul(F.from_int(int(c)), r[j]))
            if not F.is_zero(acc):
                return j
        return cap

    def level_for(self, degree: int, slack: int) -> int:
        """Least m with m*h - degree >= slack."""
        return max(0, -(-(degree + slack) // self.h))


@dataclass
class RRSpace:
    """Basis of L(D) as quotients num_i / den of sections of R_level."""

    level: int
    numerators: np.ndarray
    denominator: np.ndarray

    @property
    def dimension(self) -> int:
        return self.numerators.shape[0]


def rr_basis(model: CurveModel, Dplus: EffDivisor, Dminus: EffDivisor | None = None,
             cap: int | None = None, ring: SectionRing | None = None) -> RRSpace:
    """Basis of L(D+ - D-) for effective D+ and D- over F_p."""
    Dminus = Dminus or EffDivisor(())
    g = model.genus
    cap = 4 * g if cap is None else cap
    if Dplus.degree > cap or Dminus.degree > cap:
        raise BudgetExceeded(f"divisor degree exceeds cap {cap}")
    R = ring or SectionRing(model)
    dp, dm = Dplus.degree, Dminus.degree
    if dp - dm < 0:
        return RRSpace(0, np.zeros((0, 1), dtype=np.int64), np.zeros(1, dtype=np.int64))
    # phi in W_{D+}(m), nonzero; W_{D+}(b) generates away from D+ when b*h - dp >= 2g
    m = R.level_for(dp, 2 * g)
    Wp = R.W(Dplus, m)
    phi = Wp[0]
    b = R.level_for(dp, 2 * g)
    Mb = R.W(Dplus, b)
    Vm = R.mul_element(phi, m, R.W(Dminus, b), b)
    space = R.residual(m, Mb, b, Vm)
    return RRSpace(m, space, phi)
