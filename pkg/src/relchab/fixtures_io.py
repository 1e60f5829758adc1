"""Fixture files for curve data and plain-text run reports.

The fixture grammar is documented in docs/fixture_grammar.md.  A fixture is a
sequence of ``[section]`` headers followed by ``key = value`` lines; ``#`` starts
a comment.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .algebra import FinAbGroup, NumberField, QQ
from .curve import CurveModel, CurvePoint, reduce_mod_p
from .poly import MPoly, PolyParseError


class FixtureError(ValueError):
    """Syntax or validation error in a fixture, with the offending line when known."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


# ---------------------------------------------------------------------------
# object graph

@dataclass(frozen=True)
class PointSpec:
    """A named point: coordinates are polynomials in the root ``a`` of ``minpoly`` (empty when rational)."""

    name: str
    coords: tuple  # tuple of MPoly in one variable
    minpoly: tuple = ()
    line: int | None = field(default=None, compare=False)

    @property
    def degree(self) -> int:
        return len(self.minpoly) - 1 if self.minpoly else 1

    def algebraic(self):
        from .sieve import AlgebraicPoint
        coords = []
        d = self.degree
        for c in self.coords:
            coeffs = [Fraction(0)] * max(d, 1)
            for e, v in c.terms.items():
                coeffs[e[0]] += v
            coords.append(tuple(coeffs))
        return AlgebraicPoint(tuple(coords), self.minpoly, self.name)

    def field(self):
        return NumberField(self.minpoly) if self.minpoly else QQ

    def values(self, K):
        if not self.minpoly:
            return [c.constant_value() for c in self.coords]
        return [K.element([c.terms.get((i,), 0) for i in range(K.degree)]) for c in self.coords]


@dataclass(frozen=True)
class QuotientSpec:
    involution: str
    genus: int
    kind: str  # "elliptic" or "hyperelliptic"
    coeffs: tuple  # ainvs, or (f, h)
    points: tuple = ()  # (name, coords) on the quotient model
    base: tuple = ()  # divisor expression: pullback of the quotient base point
    generators: tuple = ()  # divisor expressions: pullbacks of generators minus the base

    def model(self) -> CurveModel:
        if self.kind == "elliptic":
            return CurveModel.elliptic(list(self.coeffs), name="quotient")
        f, h = self.coeffs
        return CurveModel.hyperelliptic(list(f), list(h), name="quotient")


@dataclass(frozen=True)
class GeneratorSpec:
    name: str
    divisor: tuple  # ((point name, multiplicity), ...)
    order: int = 0  # 0 for free generators


@dataclass(frozen=True)
class MWSpec:
    rank: int
    free: tuple = ()
    torsion: tuple = ()
    index: int = 1
    check_prime: int = 0

    @property
    def complete(self) -> bool:
        return len(self.free) == self.rank

    def group(self) -> FinAbGroup:
        return FinAbGroup(self.rank, tuple(g.order for g in self.torsion))


@dataclass(frozen=True)
class KnownSpec:
    kind: str  # "isolated" or "family"
    label: str
    divisor: tuple
    ell: int = 0
    N: int | None = None


@dataclass(frozen=True)
class ConfigSpec:
    name: str
    involution: str
    fixed: tuple
    pulled: tuple = ()
    ell: int = 0
    N: int | None = None
    prime: int = 0


@dataclass(frozen=True)
class SieveSpec:
    involution: str
    degree: int
    base: tuple
    primes: tuple


@dataclass
class Fixture:
    name: str
    genus: int
    variables: tuple
    forms: tuple
    points: dict  # name -> PointSpec, in file order
    cusps: tuple  # names
    involutions: dict  # name -> matrix of Fractions
    quotient: QuotientSpec | None = None
    mw: MWSpec | None = None
    known: tuple = ()
    configs: dict = field(default_factory=dict)
    sieve: SieveSpec | None = None
    notes: tuple = ()
    path: str | None = field(default=None, compare=False)

    def __eq__(self, other):
        if not isinstance(other, Fixture):
            return NotImplemented
        keys = ("name", "genus", "variables", "forms", "cusps", "involutions", "quotient", "mw", "known",
                "configs", "sieve", "notes")
        return (all(getattr(self, k) == getattr(other, k) for k in keys)
                and list(self.points.items()) == list(other.points.items()))

    def model(self) -> CurveModel:
        return CurveModel.complete_intersection(list(self.forms), name=self.name)

    def involution(self, name: str | None = None):
        if name is None:
            if len(self.involutions) != 1:
                raise FixtureError("fixture declares several involutions; name one")
            name = next(iter(self.involutions))
        if name not in self.involutions:
            raise FixtureError(f"unknown involution '{name}'")
        return [list(r) for r in self.involutions[name]]

    def divisor_parts(self, expr: Sequence) -> tuple[list, list]:
        """(positive, negative) lists of (AlgebraicPoint, multiplicity)."""
        plus, minus = [], []
        for name, m in expr:
            ap = self.points[name].algebraic()
            (plus if m > 0 else minus).append((ap, abs(m)))
        return plus, minus


# ---------------------------------------------------------------------------
# parsing

_SECTION = re.compile(r"^\[\s*([a-z_]+)(?:\s+(\S+))?\s*\]$")
_KV = re.compile(r"^([A-Za-z_][\w]*)(?:\s+([^=\s]+))?\s*=\s*(.*)$")
_TERM = re.compile(r"\s*([+-]?)\s*(?:(\d+)\s*\*\s*)?([A-Za-z_][\w]*)\s*")
_SINGLE = {"curve", "cusps", "points", "quotient", "mw_group", "known_points", "sieve", "notes"}
_NAMED = {"involution", "config"}


def _strip(line: str) -> str:
    i = line.find("#")
    return (line if i < 0 else line[:i]).strip()


def _int(text: str, ln: int, what: str) -> int:
    try:
        return int(text.strip())
    except ValueError:
        raise FixtureError(f"{what} must be an integer, got '{text.strip()}'", ln) from None


def _ints(text: str, ln: int, what: str) -> list[int]:
    return [_int(t, ln, what) for t in text.split()]


def _fractions(text: str, ln: int, what: str) -> list[Fraction]:
    try:
        return [Fraction(t) for t in text.split()]
    except ValueError:
        raise FixtureError(f"{what} must be rational numbers", ln) from None


def _parse_tuple(text: str, ln: int) -> list[str]:
    t = text.strip()
    if not (t.startswith("(") and t.endswith(")")):
        raise FixtureError(f"expected a projective tuple '( c0 : c1 : ... )', got '{t}'", ln)
    parts = [x.strip() for x in t[1:-1].split(":")]
    if len(parts) < 2 or any(not x for x in parts):
        raise FixtureError("projective tuple needs at least two nonempty coordinates", ln)
    return parts


def _parse_divisor(text: str, ln: int) -> tuple:
    s = text.strip()
    if not s:
        raise FixtureError("empty divisor expression", ln)
    out: dict = {}
    order = []
    pos = 0
    first = True
    while pos < len(s):
        m = _TERM.match(s, pos)
        if not m or m.end() == pos or (not first and not m.group(1)):
            raise FixtureError(f"cannot parse divisor expression '{s}'", ln)
        sign = -1 if m.group(1) == "-" else 1
        k = int(m.group(2)) if m.group(2) else 1
        name = m.group(3)
        if name not in out:
            order.append(name)
            out[name] = 0
        out[name] += sign * k
        pos = m.end()
        first = False
    return tuple((n, out[n]) for n in order if out[n])


def _options(text: str, ln: int) -> tuple[str, dict]:
    """'expr ; key = value ; ...' -> (expr, {key: value})."""
    parts = [p.strip() for p in text.split(";")]
    opts = {}
    for p in parts[1:]:
        if "=" not in p:
            raise FixtureError(f"expected 'key = value' option, got '{p}'", ln)
        k, v = (x.strip() for x in p.split("=", 1))
        opts[k] = v
    return parts[0], opts


def _poly_a(text: str, ln: int) -> MPoly:
    try:
        return MPoly.parse(text, ["a"])
    except PolyParseError as exc:
        raise FixtureError(str(exc), ln) from None


def _clear_denominators(vals: list[Fraction]) -> list[Fraction]:
    d = 1
    for v in vals:
        d = math.lcm(d, v.denominator)
    ints = [v * d for v in vals]
    g = 0
    for v in ints:
        g = math.gcd(g, int(v))
    return [Fraction(int(v) // g) for v in ints] if g else ints


class _Parser:
    def __init__(self, text: str, path: str | None):
        self.lines = text.splitlines()
        self.path = path
        self.sections: list = []  # (kind, name, line, [(line, key, arg, value)])

    def err(self, msg, ln=None):
        return FixtureError(msg, ln, self.path)

    def split(self):
        cur = None
        seen = set()
        for i, raw in enumerate(self.lines, start=1):
            line = _strip(raw)
            if not line:
                continue
            m = _SECTION.match(line)
            if m:
                kind, name = m.group(1), m.group(2)
                if kind in _SINGLE and name is None:
                    if kind in seen:
                        raise self.err(f"duplicate section [{kind}]", i)
                elif kind in _NAMED and name is not None:
                    if (kind, name) in seen:
                        raise self.err(f"duplicate section [{kind} {name}]", i)
                else:
                    raise self.err(f"unknown section header '{line}'", i)
                seen.add((kind, name) if name else kind)
                cur = (kind, name, i, [])
                self.sections.append(cur)
                continue
            if cur is None:
                raise self.err("content before the first section header", i)
            if cur[0] == "notes":
                cur[3].append((i, "text", None, raw.strip()))
                continue
            m = _KV.match(line)
            if not m:
                raise self.err(f"expected 'key = value', got '{line}'", i)
            cur[3].append((i, m.group(1), m.group(2), m.group(3).strip()))

    def parse(self) -> Fixture:
        self.split()
        kinds = [s[0] for s in self.sections]
        if "curve" not in kinds:
            raise self.err("missing [curve] section")
        fx = Fixture("", 0, (), (), {}, (), {})
        fx.path = self.path
        self.line_of: dict = {}
        for kind, name, ln, items in self.sections:
            getattr(self, "_sec_" + kind)(fx, name, ln, items)
        return fx

    def _sec_curve(self, fx, _, ln, items):
        forms_txt = []
        for i, k, _, v in items:
            if k == "name":
                fx.name = v
            elif k == "genus":
                fx.genus = _int(v, i, "genus")
            elif k == "vars":
                fx.variables = tuple(v.split())
            elif k == "form":
                forms_txt.append((i, v))
            else:
                raise self.err(f"unknown key '{k}' in [curve]", i)
        if not fx.variables:
            raise self.err("[curve] needs 'vars'", ln)
        forms = []
        for i, v in forms_txt:
            try:
                F = MPoly.parse(v, fx.variables)
            except PolyParseError as exc:
                raise self.err(str(exc), i) from None
            if not F.is_integral():
                raise self.err("defining forms need integer coefficients", i)
            forms.append(F)
            self.line_of[("form", len(forms) - 1)] = i
        fx.forms = tuple(forms)

    def _point(self, fx, name, text, minpoly, i):
        if name in fx.points:
            raise self.err(f"point '{name}' defined twice", i)
        parts = _parse_tuple(text, i)
        coords = [_poly_a(c, i) for c in parts]
        if not minpoly:
            if any(c.degree() > 0 for c in coords):
                raise self.err(f"point '{name}' uses 'a' but no field is declared", i)
            vals = _clear_denominators([c.constant_value() for c in coords])
            coords = [MPoly.const(1, v) for v in vals]
        else:
            d = len(minpoly) - 1
            K = NumberField(minpoly)
            reduced = []
            for c in coords:
                coeffs = [Fraction(0)] * (c.degree() + 1)
                for e, v in c.terms.items():
                    coeffs[e[0]] += v
                red = K.element(coeffs)
                reduced.append(MPoly(1, {(j,): red[j] for j in range(d)}))
            coords = reduced
        fx.points[name] = PointSpec(name, tuple(coords), tuple(minpoly), i)

    def _sec_cusps(self, fx, _, ln, items):
        names = []
        for i, k, arg, v in items:
            if arg is not None:
                raise self.err("cusp lines have the form 'name = (..)'", i)
            self._point(fx, k, v, (), i)
            names.append(k)
        fx.cusps = tuple(names)

    def _sec_points(self, fx, _, ln, items):
        minpoly: tuple = ()
        for i, k, arg, v in items:
            if k == "field" and arg is None:
                if v.strip() == "rational":
                    minpoly = ()
                    continue
                f = _poly_a(v, i)
                if f.degree() < 2 or not f.is_integral():
                    raise self.err("field polynomial must be an integer polynomial of degree at least 2", i)
                coeffs = [0] * (f.degree() + 1)
                for e, c in f.terms.items():
                    coeffs[e[0]] = int(c)
                if coeffs[-1] != 1:
                    raise self.err("field polynomial must be monic", i)
                minpoly = tuple(coeffs)
                self.line_of[("field", minpoly)] = i
            elif arg is None:
                self._point(fx, k, v, minpoly, i)
            else:
                raise self.err(f"unexpected '{k} {arg}' in [points]", i)

    def _sec_involution(self, fx, name, ln, items):
        rows = []
        scale = Fraction(1)
        for i, k, _, v in items:
            if k == "row":
                rows.append(_fractions(v, i, "matrix entries"))
            elif k == "scale":
                scale = Fraction(v.strip())
            else:
                raise self.err(f"unknown key '{k}' in [involution]", i)
        if not rows or any(len(r) != len(rows) for r in rows):
            raise self.err("involution matrix must be square", ln)
        fx.involutions[name] = tuple(tuple(x * scale for x in r) for r in rows)
        self.line_of[("involution", name)] = ln

    def _sec_quotient(self, fx, _, ln, items):
        inv, genus, kind, coeffs = "", 0, "", None
        f = h = ()
        pts, gens, base = [], [], ()
        for i, k, arg, v in items:
            if k == "involution":
                inv = v
            elif k == "genus":
                genus = _int(v, i, "genus")
            elif k == "ainvs":
                kind, coeffs = "elliptic", tuple(_ints(v, i, "a-invariants"))
                if len(coeffs) != 5:
                    raise self.err("ainvs needs five integers", i)
            elif k == "f":
                kind, f = "hyperelliptic", tuple(_ints(v, i, "coefficients"))
            elif k == "h":
                h = tuple(_ints(v, i, "coefficients"))
            elif k == "point" and arg:
                pts.append((arg, tuple(_fractions(" ".join(_parse_tuple(v, i)), i, "coordinates"))))
            elif k == "base":
                base = _parse_divisor(v, i)
            elif k == "generator":
                gens.append(_parse_divisor(v, i))
            else:
                raise self.err(f"unknown key '{k}' in [quotient]", i)
        if not kind:
            raise self.err("[quotient] needs 'ainvs' or 'f'", ln)
        if kind == "hyperelliptic":
            coeffs = (f, h)
        fx.quotient = QuotientSpec(inv, genus, kind, coeffs, tuple(pts), base, tuple(gens))
        self.line_of["quotient"] = ln

    def _sec_mw_group(self, fx, _, ln, items):
        rank, index, prime = 0, 1, 0
        free, tors = [], []
        for i, k, arg, v in items:
            if k == "rank":
                rank = _int(v, i, "rank")
            elif k == "index":
                index = _int(v, i, "index")
            elif k == "check_prime":
                prime = _int(v, i, "check_prime")
            elif k == "free" and arg:
                free.append(GeneratorSpec(arg, _parse_divisor(v, i)))
            elif k == "torsion" and arg:
                expr, opts = _options(v, i)
                if "order" not in opts:
                    raise self.err("torsion generators need '; order = d'", i)
                tors.append(GeneratorSpec(arg, _parse_divisor(expr, i), _int(opts["order"], i, "order")))
            else:
                raise self.err(f"unknown key '{k}' in [mw_group]", i)
        if len(free) > rank:
            raise self.err("more free generators than the declared rank", ln)
        fx.mw = MWSpec(rank, tuple(free), tuple(tors), index, prime)
        self.line_of["mw"] = ln

    def _sec_known_points(self, fx, _, ln, items):
        out = []
        for i, k, arg, v in items:
            if k not in ("isolated", "family") or not arg:
                raise self.err("known points are 'isolated LABEL = ...' or 'family LABEL = ...'", i)
            expr, opts = _options(v, i)
            ell = _int(opts.get("ell", "0"), i, "ell")
            N = _int(opts["N"], i, "N") if "N" in opts else None
            if (k == "family") != (ell > 0):
                raise self.err("families need ell > 0 and isolated points ell = 0", i)
            out.append(KnownSpec(k, arg, _parse_divisor(expr, i), ell, N))
            self.line_of[("known", arg)] = i
        fx.known = tuple(out)

    def _sec_config(self, fx, name, ln, items):
        vals = {"involution": "", "fixed": (), "pulled": (), "ell": 0, "N": None, "prime": 0}
        for i, k, _, v in items:
            if k in ("fixed", "pulled"):
                vals[k] = _parse_divisor(v, i)
            elif k in ("ell", "N", "prime"):
                vals[k] = _int(v, i, k)
            elif k == "involution":
                vals[k] = v
            else:
                raise self.err(f"unknown key '{k}' in [config]", i)
        fx.configs[name] = ConfigSpec(name, vals["involution"], vals["fixed"], vals["pulled"], vals["ell"],
                                      vals["N"], vals["prime"])
        self.line_of[("config", name)] = ln

    def _sec_sieve(self, fx, _, ln, items):
        vals = {"involution": "", "degree": 0, "base": (), "primes": ()}
        for i, k, _, v in items:
            if k == "degree":
                vals[k] = _int(v, i, k)
            elif k == "base":
                vals[k] = _parse_divisor(v, i)
            elif k == "primes":
                vals[k] = tuple(_ints(v, i, "primes"))
            elif k == "involution":
                vals[k] = v
            else:
                raise self.err(f"unknown key '{k}' in [sieve]", i)
        fx.sieve = SieveSpec(vals["involution"], vals["degree"], vals["base"], vals["primes"])
        self.line_of["sieve"] = ln

    def _sec_notes(self, fx, _, ln, items):
        fx.notes = tuple(v for _, _, _, v in items)


def parse_fixture_text(text: str, path: str | None = None, deep: bool = True) -> Fixture:
    p = _Parser(text, path)
    fx = p.parse()
    validate_fixture(fx, p.line_of, deep=deep)
    return fx


def parse_fixture(path, deep: bool = True) -> Fixture:
    """Parse and validate a fixture file.

    ``deep`` adds the checks that need arithmetic modulo the declared check prime
    (torsion orders, pullback structure of the quotient data).
    """
    path = str(path)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FixtureError(f"cannot read fixture: {exc.strerror}", None, path) from None
    return parse_fixture_text(text, path, deep)


# ---------------------------------------------------------------------------
# validation

def _is_irreducible(minpoly: Sequence[int]) -> bool:
    import sympy
    a = sympy.Symbol("a")
    return sympy.Poly([int(c) for c in reversed(minpoly)], a, domain="ZZ").is_irreducible


def validate_fixture(fx: Fixture, line_of: dict | None = None, deep: bool = True) -> None:
    line_of = line_of or {}

    def err(msg, key=None, ln=None):
        return FixtureError(msg, ln if ln is not None else line_of.get(key), fx.path)

    if not fx.forms:
        raise err("[curve] declares no forms")
    try:
        X = fx.model()
    except Exception as exc:
        raise err(f"invalid curve model: {exc}", ("form", 0)) from None
    if fx.genus and X.genus != fx.genus:
        raise err(f"declared genus {fx.genus} differs from the model's {X.genus}", ("form", 0))
    fx.genus = X.genus
    n = len(fx.variables)
    checked_fields = set()
    for P in fx.points.values():
        if len(P.coords) != n:
            raise err(f"point '{P.name}' has {len(P.coords)} coordinates, expected {n}", ln=P.line)
        if P.minpoly and P.minpoly not in checked_fields:
            if not _is_irreducible(P.minpoly):
                raise err("minimal polynomial is not irreducible", ln=line_of.get(("field", P.minpoly), P.line))
            checked_fields.add(P.minpoly)
        K = P.field()
        vals = P.values(K)
        if all(K.is_zero(x) for x in vals):
            raise err(f"point '{P.name}' is the zero vector", ln=P.line)
        for G in fx.forms:
            if not K.is_zero(G.eval(K, vals)):
                raise err(f"point not on curve: '{P.name}'", ln=P.line)
    for c in fx.cusps:
        if fx.points[c].minpoly:
            raise err(f"cusp '{c}' must be rational", ln=fx.points[c].line)
    for name, W in fx.involutions.items():
        _check_involution(fx, X, name, W, err)

    def check_names(expr, key):
        for nm, _ in expr:
            if nm not in fx.points:
                raise err(f"unknown point '{nm}'", key)

    def degree(expr):
        return sum(fx.points[nm].degree * m for nm, m in expr)

    if fx.quotient:
        q = fx.quotient
        if q.involution not in fx.involutions:
            raise err(f"quotient refers to unknown involution '{q.involution}'", "quotient")
        Y = q.model()
        if q.genus and Y.genus != q.genus:
            raise err(f"quotient genus {q.genus} differs from its model's {Y.genus}", "quotient")
        for nm, coords in q.points:
            P = CurvePoint.make(Y, list(coords), QQ)
            if not Y.contains(P):
                raise err(f"point not on quotient curve: '{nm}'", "quotient")
        for expr in (q.base,) + q.generators:
            check_names(expr, "quotient")
        if q.base and degree(q.base) != 2:
            raise err("pullback of the quotient base point must have degree 2", "quotient")
        for g in q.generators:
            if degree(g) != 0:
                raise err("quotient generators must have degree 0", "quotient")
    if fx.mw:
        for g in fx.mw.free + fx.mw.torsion:
            check_names(g.divisor, "mw")
            if degree(g.divisor) != 0:
                raise err(f"generator '{g.name}' must have degree 0", "mw")
    for k in fx.known:
        check_names(k.divisor, ("known", k.label))
        if any(m < 0 for _, m in k.divisor):
            raise err(f"known point '{k.label}' must be effective", ("known", k.label))
        if k.kind == "family" and not (fx.quotient and fx.quotient.generators):
            raise err("families need quotient generators", ("known", k.label))
    for c in fx.configs.values():
        check_names(c.fixed + c.pulled, ("config", c.name))
        if c.involution and c.involution not in fx.involutions:
            raise err(f"unknown involution '{c.involution}'", ("config", c.name))
    if fx.sieve:
        s = fx.sieve
        check_names(s.base, "sieve")
        if degree(s.base) != s.degree:
            raise err("sieve base divisor has the wrong degree", "sieve")
        for k in fx.known:
            if degree(k.divisor) + 2 * k.ell != s.degree:
                raise err(f"known point '{k.label}' does not have degree {s.degree}", ("known", k.label))
    if deep:
        _deep_checks(fx, X, err)


def _check_involution(fx, X, name, W, err):
    n = len(fx.variables)
    if len(W) != n:
        raise err(f"involution '{name}' has the wrong size", ("involution", name))
    W2 = [[sum(W[i][k] * W[k][j] for k in range(n)) for j in range(n)] for i in range(n)]
    c = W2[0][0]
    if c == 0 or any(W2[i][j] != (c if i == j else 0) for i in range(n) for j in range(n)):
        raise err(f"involution '{name}' does not square to a scalar", ("involution", name))
    # pulled-back forms must lie in the span of the forms of equal degree (ideal membership for
    # quadrics; cubics are checked pointwise on the known points below)
    for P in fx.points.values():
        K = P.field()
        vals = P.values(K)
        img = [K.zero] * n
        for i in range(n):
            for j in range(n):
                if W[i][j]:
                    img[i] = K.add(img[i], K.mul(K.from_fraction(W[i][j]), vals[j]))
        for G in fx.forms:
            if not K.is_zero(G.eval(K, img)):
                raise err(f"involution '{name}' maps '{P.name}' off the curve", ("involution", name))


def _deep_checks(fx: Fixture, X: CurveModel, err) -> None:
    mw = fx.mw
    if mw is None or not mw.check_prime:
        return
    from .picard import Jacobian
    from .sieve import divisor_class, reduce_divisor
    p = mw.check_prime
    Xp = reduce_mod_p(X, p)
    jac = Jacobian(Xp)
    for g in mw.torsion:
        plus, minus = fx.divisor_parts(g.divisor)
        x = divisor_class(jac, Xp, plus, minus)
        if not jac.is_zero(jac.mul(g.order, x)):
            raise err(f"torsion generator '{g.name}' does not have order {g.order} mod {p}", "mw")
        for ell in _prime_factors(g.order):
            if jac.is_zero(jac.mul(g.order // ell, x)):
                raise err(f"torsion generator '{g.name}' has order smaller than {g.order} mod {p}", "mw")
    q = fx.quotient
    if q and q.generators:
        W = fx.involution(q.involution)
        for expr in q.generators + ((q.base,) if q.base else ()):
            plus, _ = fx.divisor_parts(expr)
            D = reduce_divisor(Xp, plus)
            if not _is_pullback_divisor(Xp, W, D):
                raise err("quotient generator is not a pullback of a quotient divisor", "quotient")


def _is_pullback_divisor(Xp, W, D) -> bool:
    from .curve import apply_matrix, is_fixed
    from .sieve import place_key
    mult = {place_key(P): m for P, m in D.places}
    for P, m in D.places:
        if is_fixed(Xp, W, P):
            if m % 2:
                return False
        elif mult.get(place_key(apply_matrix(P.field, W, P, Xp))) != m:
            return False
    return True


def _prime_factors(n: int) -> list[int]:
    out, d = [], 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


# ---------------------------------------------------------------------------
# serialisation of fixtures

def _frac(x: Fraction) -> str:
    return str(Fraction(x))


def _divisor_text(expr) -> str:
    parts = []
    for nm, m in expr:
        term = nm if abs(m) == 1 else f"{abs(m)}*{nm}"
        if not parts:
            parts.append(term if m > 0 else "-" + term)
        else:
            parts.append(("+ " if m > 0 else "- ") + term)
    return " ".join(parts)


def _poly_a_text(minpoly: Sequence[int]) -> str:
    return MPoly(1, {(i,): c for i, c in enumerate(minpoly)}).to_string(["a"])


def _point_text(P: PointSpec) -> str:
    return "(" + " : ".join(c.to_string(["a"]) for c in P.coords) + ")"


def serialize_fixture(fx: Fixture) -> str:
    out = ["[curve]", f"name = {fx.name}", f"genus = {fx.genus}", "vars = " + " ".join(fx.variables)]
    out += [f"form = {F.to_string(fx.variables)}" for F in fx.forms]
    out += ["", "[cusps]"]
    out += [f"{c} = {_point_text(fx.points[c])}" for c in fx.cusps]
    others = [P for nm, P in fx.points.items() if nm not in fx.cusps]
    if others:
        out += ["", "[points]"]
        cur = None
        for P in others:
            if P.minpoly != cur:
                out.append("field = " + (_poly_a_text(P.minpoly) if P.minpoly else "rational"))
                cur = P.minpoly
            out.append(f"{P.name} = {_point_text(P)}")
    for name, W in fx.involutions.items():
        out += ["", f"[involution {name}]"]
        out += ["row = " + " ".join(_frac(x) for x in r) for r in W]
    if fx.quotient:
        q = fx.quotient
        out += ["", "[quotient]", f"involution = {q.involution}", f"genus = {q.genus}"]
        if q.kind == "elliptic":
            out.append("ainvs = " + " ".join(str(a) for a in q.coeffs))
        else:
            out.append("f = " + " ".join(str(a) for a in q.coeffs[0]))
            if q.coeffs[1]:
                out.append("h = " + " ".join(str(a) for a in q.coeffs[1]))
        out += [f"point {nm} = (" + " : ".join(_frac(x) for x in c) + ")" for nm, c in q.points]
        if q.base:
            out.append(f"base = {_divisor_text(q.base)}")
        out += [f"generator = {_divisor_text(g)}" for g in q.generators]
    if fx.mw:
        m = fx.mw
        out += ["", "[mw_group]", f"rank = {m.rank}"]
        out += [f"free {g.name} = {_divisor_text(g.divisor)}" for g in m.free]
        out += [f"torsion {g.name} = {_divisor_text(g.divisor)} ; order = {g.order}" for g in m.torsion]
        out += [f"index = {m.index}"]
        if m.check_prime:
            out.append(f"check_prime = {m.check_prime}")
    if fx.known:
        out += ["", "[known_points]"]
        for k in fx.known:
            opts = ""
            if k.ell:
                opts += f" ; ell = {k.ell}"
            if k.N is not None:
                opts += f" ; N = {k.N}"
            out.append(f"{k.kind} {k.label} = {_divisor_text(k.divisor)}{opts}")
    for c in fx.configs.values():
        out += ["", f"[config {c.name}]"]
        if c.involution:
            out.append(f"involution = {c.involution}")
        out.append(f"fixed = {_divisor_text(c.fixed)}")
        if c.pulled:
            out.append(f"pulled = {_divisor_text(c.pulled)}")
        out.append(f"ell = {c.ell}")
        if c.N is not None:
            out.append(f"N = {c.N}")
        if c.prime:
            out.append(f"prime = {c.prime}")
    if fx.sieve:
        s = fx.sieve
        out += ["", "[sieve]", f"involution = {s.involution}", f"degree = {s.degree}",
                f"base = {_divisor_text(s.base)}", "primes = " + " ".join(str(p) for p in s.primes)]
    if fx.notes:
        out += ["", "[notes]"] + list(fx.notes)
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# builders

def sieve_problem(fx: Fixture, primes: Sequence[int] | None = None, drop: Sequence[str] = ()):
    """The sieve problem described by the fixture, optionally without some known points."""
    from .sieve import KnownPoint, SieveProblem
    if fx.sieve is None or fx.mw is None:
        raise FixtureError("fixture has no sieve data", None, fx.path)
    if not fx.mw.complete:
        raise FixtureError("free Mordell-Weil generators are missing", None, fx.path)
    known = []
    for k in fx.known:
        if k.label in drop:
            continue
        plus, _ = fx.divisor_parts(k.divisor)
        known.append(KnownPoint(k.label, plus, k.ell, N=k.N))
    gens = [fx.divisor_parts(g.divisor) for g in fx.mw.free + fx.mw.torsion]
    q = fx.quotient
    qgens = [fx.divisor_parts(g) for g in q.generators] if q else []
    base = fx.divisor_parts(q.base)[0] if q and q.base else []
    return SieveProblem(fx.model(), fx.involution(fx.sieve.involution or None), fx.sieve.degree,
                        fx.divisor_parts(fx.sieve.base)[0], fx.mw.group(), gens, fx.mw.index, known,
                        list(primes if primes is not None else fx.sieve.primes),
                        quotient_generators=qgens, pullback_base=base, name=fx.name)


def residue_configuration(fx: Fixture, name: str, p: int | None = None):
    """(ResidueConfiguration, prime, involution matrix) for a named configuration."""
    from .algebra import ext_field_build
    from .chabauty import ResidueConfiguration
    from .sieve import embed_point
    if name not in fx.configs:
        raise FixtureError(f"unknown configuration '{name}'", None, fx.path)
    c = fx.configs[name]
    p = p or c.prime
    if not p:
        raise FixtureError("no prime given for the configuration", None, fx.path)
    X = fx.model()
    Xp = reduce_mod_p(X, p)
    W = fx.involution(c.involution or None)
    red = {}
    k = 1
    for nm, _ in c.fixed + c.pulled:
        pts = fx.points[nm].algebraic().reduce(Xp)
        red[nm] = pts
        for P, _ in pts:
            k = math.lcm(k, P.degree)
    F = ext_field_build(p, k)

    def expand(expr):
        out = []
        for nm, m in expr:
            for P, mult in red[nm]:
                for Q in embed_point(Xp, P, F).orbit():
                    out.append((Q, m * mult))
        return out

    rational = None
    if all(fx.points[nm].degree == 1 for nm, _ in c.fixed + c.pulled) and not c.pulled:
        rational = (X, [(fx.points[nm].algebraic().rational_point(X), m) for nm, m in c.fixed])
    cfg = ResidueConfiguration(Xp, W, fixed=expand(c.fixed), pulled=expand(c.pulled), ell=c.ell, N=c.N,
                               rational_support=rational, label=name)
    return cfg, p, W


# ---------------------------------------------------------------------------
# reports

def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt_value(x) for x in v) if v else "-"
    if v is None:
        return "none"
    return str(v).replace("\n", " ")


def _field_header(p: int, modulus: Sequence[int]) -> str:
    if not modulus or len(modulus) <= 2:
        return f"field=F_{p}"
    return f"field=F_{p}^{len(modulus) - 1} modulus=" + ",".join(str(c) for c in modulus)


def serialize_criterion(rep, prefix: str = "") -> list[str]:
    out = [f"{prefix}report=criterion", f"{prefix}kind={rep.kind}",
           f"{prefix}verdict={rep.verdict} rank={_fmt_value(rep.rank)} target={_fmt_value(rep.target)}",
           f"{prefix}prime={rep.p}"]
    for k in sorted(rep.conditions):
        out.append(f"{prefix}condition.{k}={_fmt_value(rep.conditions[k])}")
    if rep.witness is not None:
        out.append(f"{prefix}witness={_fmt_value(list(rep.witness))}")
    if rep.scanned:
        out.append(f"{prefix}scanned={rep.scanned}")
    for name in sorted(rep.matrices):
        M = rep.matrices[name]
        if not (isinstance(M, (list, tuple)) and M and all(isinstance(r, (list, tuple)) for r in M)):
            out.append(f"{prefix}data.{name}={_fmt_value(M)}")
            continue
        rows = len(M)
        cols = len(M[0]) if rows else 0
        out.append(f"{prefix}matrix {name} rows={rows} cols={cols} {_field_header(rep.p, rep.field_modulus)}")
        out += [prefix + " ".join(str(int(x)) for x in r) for r in M]
    for nt in rep.notes:
        out.append(f"{prefix}note={_fmt_value(nt)}")
    return out


def serialize_sieve(rep) -> list[str]:
    out = ["report=sieve", f"outcome={rep.outcome}", f"survivors={len(rep.state.reps)}",
           f"index={rep.state.index}", "lattice=" + ";".join(",".join(str(x) for x in r) for r in rep.state.H)]
    for w in rep.state.reps:
        out.append("survivor=" + ",".join(str(x) for x in w))
    for st in rep.stats:
        out.append("prime " + " ".join(f"{k}={v}" for k, v in st.items()))
    for Mp in rep.mp_sets:
        for v in sorted(Mp.elements):
            wit = Mp.witnesses[v]
            out.append(f"mp.{Mp.p} element=" + ",".join(str(x) for x in v) + f" witnesses={len(wit)}")
            for d, reason in wit:
                out.append(f"mp.{Mp.p}   divisor={d} reason={reason}")
        for i, (label, dtext, crep) in enumerate(Mp.reports):
            out.append(f"mp.{Mp.p} criterion.{i} label={label} divisor={dtext}")
            out += serialize_criterion(crep, prefix=f"mp.{Mp.p} criterion.{i} ")
    return out


def serialize_group(gs, p: int) -> list[str]:
    out = ["report=picard", f"prime={p}", f"certified={gs.certified}",
           "invariants=" + _fmt_value(list(gs.group.torsion)), f"exponent={gs.exponent}"]
    if gs.sampled_orders:
        out.append("sampled_orders=" + _fmt_value(list(gs.sampled_orders)))
    return out


def serialize_report(report) -> str:
    """Deterministic key=value text for criterion, sieve and group-structure reports."""
    from .chabauty import CriterionReport
    from .sieve import SieveReport
    if isinstance(report, CriterionReport):
        lines = serialize_criterion(report)
    elif isinstance(report, SieveReport):
        lines = serialize_sieve(report)
    elif isinstance(report, dict):
        lines = [f"{k}={_fmt_value(v)}" for k, v in report.items()]
    elif isinstance(report, (list, tuple)):
        lines = list(report)
    else:
        raise TypeError(f"cannot serialise {type(report).__name__}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict:
    """Key=value pairs of a report (matrix rows and repeated keys collected into lists)."""
    out: dict = {}
    for line in text.splitlines():
        for tok in line.split(" "):
            if "=" in tok:
                k, v = tok.split("=", 1)
                out.setdefault(k, []).append(v)
    return out
