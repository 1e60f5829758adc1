"""Sparse multivariate polynomials with integer or rational coefficients."""

from __future__ import annotations

import ast
from fractions import Fraction
from typing import Iterable, Sequence

from .algebra import Field


class PolyParseError(ValueError):
    """Raised when a polynomial expression cannot be parsed."""


class MPoly:
    """Polynomial in a fixed number of variables; terms map exponent tuples to Fractions."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: dict | None = None):
        self.nvars = nvars
        clean = {}
        for e, c in (terms or {}).items():
            c = Fraction(c)
            if c:
                e = tuple(int(x) for x in e)
                if len(e) != nvars:
                    raise ValueError("exponent length mismatch")
                clean[e] = clean.get(e, 0) + c
        self.terms = {e: c for e, c in clean.items() if c}

    # constructors
    @classmethod
    def const(cls, nvars, c):
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def var(cls, nvars, i):
        e = [0] * nvars
        e[i] = 1
        return cls(nvars, {tuple(e): 1})

    @classmethod
    def parse(cls, text: str, names: Sequence[str]) -> "MPoly":
        """Parse +, -, *, /, ^ or ** over integers and the given variable names."""
        src = text.replace("^", "**").strip()
        if not src:
            raise PolyParseError("empty expression")
        try:
            tree = ast.parse(src, mode="eval")
        except SyntaxError as exc:
            raise PolyParseError(f"cannot parse '{text}': {exc.msg}") from None
        index = {n: i for i, n in enumerate(names)}
        n = len(names)

        def walk(node):
            if isinstance(node, ast.Expression):
                return walk(node.body)
            if isinstance(node, ast.Constant) and isinstance(node.value, int):
                return cls.const(n, node.value)
            if isinstance(node, ast.Name):
                if node.id not in index:
                    raise PolyParseError(f"unknown symbol '{node.id}' in '{text}'")
                return cls.var(n, index[node.id])
            if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
                v = walk(node.operand)
                return -v if isinstance(node.op, ast.USub) else v
            if isinstance(node, ast.BinOp):
                a = walk(node.left)
                if isinstance(node.op, ast.Pow):
                    if not (isinstance(node.right, ast.Constant) and isinstance(node.right.value, int)
                            and node.right.value >= 0):
                        raise PolyParseError(f"exponent must be a nonnegative integer in '{text}'")
                    return a ** node.right.value
                b = walk(node.right)
                if isinstance(node.op, ast.Add):
                    return a + b
                if isinstance(node.op, ast.Sub):
                    return a - b
                if isinstance(node.op, ast.Mult):
                    return a * b
                if isinstance(node.op, ast.Div):
                    if not b.is_constant() or b.constant_value() == 0:
                        raise PolyParseError(f"division only by nonzero constants in '{text}'")
                    return a * Fraction(1) / b.constant_value()
            raise PolyParseError(f"unsupported syntax in '{text}'")

        return walk(tree)

    # basic queries
    def is_zero(self):
        return not self.terms

    def is_constant(self):
        return all(not any(e) for e in self.terms)

    def constant_value(self) -> Fraction:
        return self.terms.get((0,) * self.nvars, Fraction(0))

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def degree_in(self, i: int) -> int:
        return max((e[i] for e in self.terms), default=-1)

    def is_homogeneous(self) -> bool:
        return len({sum(e) for e in self.terms}) <= 1

    def is_integral(self) -> bool:
        return all(c.denominator == 1 for c in self.terms.values())

    def __eq__(self, other):
        return isinstance(other, MPoly) and self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, tuple(sorted(self.terms.items()))))

    # arithmetic
    def _coerce(self, o):
        if isinstance(o, MPoly):
            return o
        return MPoly.const(self.nvars, o)

    def __add__(self, o):
        o = self._coerce(o)
        t = dict(self.terms)
        for e, c in o.terms.items():
            t[e] = t.get(e, 0) + c
        return MPoly(self.nvars, t)

    __radd__ = __add__

    def __neg__(self):
        return MPoly(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, o):
        return self + (-self._coerce(o))

    def __rsub__(self, o):
        return self._coerce(o) - self

    def __mul__(self, o):
        if not isinstance(o, MPoly):
            o = Fraction(o)
            return MPoly(self.nvars, {e: c * o for e, c in self.terms.items()})
        t = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in o.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                t[e] = t.get(e, 0) + c1 * c2
        return MPoly(self.nvars, t)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1 / Fraction(c))

    def __pow__(self, k: int):
        r = MPoly.const(self.nvars, 1)
        b = self
        while k:
            if k & 1:
                r = r * b
            b = b * b
            k >>= 1
        return r

    def partial(self, i: int) -> "MPoly":
        t = {}
        for e, c in self.terms.items():
            if e[i]:
                e2 = list(e)
                e2[i] -= 1
                t[tuple(e2)] = c * e[i]
        return MPoly(self.nvars, t)

    def substitute(self, values: Sequence["MPoly"]) -> "MPoly":
        """Compose with polynomials (possibly in a different number of variables)."""
        m = values[0].nvars
        out = MPoly(m)
        for e, c in self.terms.items():
            term = MPoly.const(m, c)
            for v, k in zip(values, e):
                if k:
                    term = term * (v ** k)
            out = out + term
        return out

    def linear_transform(self, M: Sequence[Sequence]) -> "MPoly":
        """self(M x), where x are the same variables."""
        lin = [MPoly(self.nvars, {tuple(int(j == k) for k in range(self.nvars)): M[i][j]
                                   for j in range(self.nvars)}) for i in range(self.nvars)]
        return self.substitute(lin)

    def content_denominator(self) -> int:
        from math import lcm
        d = 1
        for c in self.terms.values():
            d = lcm(d, c.denominator)
        return d

    # evaluation
    def eval(self, F: Field, point: Sequence):
        """Evaluate over a Field; coefficients are mapped into F."""
        acc = F.zero
        cache: dict = {}
        for e, c in self.terms.items():
            term = F.from_fraction(c) if F.characteristic == 0 else _frac_to_field(F, c)
            for i, k in enumerate(e):
                if k:
                    key = (i, k)
                    if key not in cache:
                        cache[key] = F.pow(point[i], k)
                    term = F.mul(term, cache[key])
            acc = F.add(acc, term)
        return acc

    def eval_series(self, F: Field, series: Sequence):
        """Evaluate at truncated power series in every variable."""
        from .series import TruncatedSeries

        prec = min(s.prec for s in series)
        out = TruncatedSeries.zero(F, prec)
        powers: dict = {}
        for e, c in self.terms.items():
            coeff = F.from_fraction(c) if F.characteristic == 0 else _frac_to_field(F, c)
            term = TruncatedSeries.const(F, coeff, prec)
            for i, k in enumerate(e):
                if k:
                    if (i, k) not in powers:
                        powers[(i, k)] = (series[i] ** k).truncate(prec)
                    term = (term * powers[(i, k)]).truncate(prec)
            out = out + term
        return out

    def reduce_coefficients(self, p: int) -> dict:
        """Terms with coefficients mapped into F_p (raises on non-p-integral coefficients)."""
        out = {}
        for e, c in self.terms.items():
            if c.denominator % p == 0:
                raise ValueError(f"coefficient {c} is not {p}-integral")
            v = c.numerator * pow(c.denominator, -1, p) % p
            if v:
                out[e] = v
        return out

    def to_string(self, names: Sequence[str]) -> str:
        if not self.terms:
            return "0"
        parts = []
        for e, c in sorted(self.terms.items(), reverse=True):
            mon = "*".join(f"{names[i]}^{k}" if k > 1 else names[i] for i, k in enumerate(e) if k)
            if not mon:
                parts.append(str(c))
            elif c == 1:
                parts.append(mon)
            elif c == -1:
                parts.append("-" + mon)
            else:
                parts.append(f"{c}*{mon}")
        s = " + ".join(parts)
        return s.replace("+ -", "- ")

    def __repr__(self):
        return f"MPoly({self.to_string([f'x{i}' for i in range(self.nvars)])})"


def _frac_to_field(F: Field, c: Fraction):
    p = F.characteristic
    if c.denominator % p == 0:
        raise ZeroDivisionError(f"coefficient {c} not integral at {p}")
    return F.from_int(c.numerator * pow(c.denominator, -1, p) % p)


def monomials(nvars: int, degree: int) -> list[tuple]:
    """All exponent vectors of the given total degree, in descending lex order."""
    out = []

    def rec(i, left, cur):
        if i == nvars - 1:
            out.append(tuple(cur + [left]))
            return
        for k in range(left, -1, -1):
            rec(i + 1, left - k, cur + [k])

    if nvars == 0:
        return [()] if degree == 0 else []
    rec(0, degree, [])
    return out


def univariate(coeffs: Iterable) -> MPoly:
    return MPoly(1, {(i,): c for i, c in enumerate(coeffs)})
