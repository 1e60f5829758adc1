"""Truncated power series, tiny integrals and symmetric-function tools."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Sequence

from .algebra import QQ, Field, val_p


class SeriesError(ValueError):
    """Raised on invalid series operations or precondition failures."""


class TruncatedSeries:
    """sum c_i t^i + O(t^prec) over a Field; immutable."""

    __slots__ = ("field", "coeffs", "prec", "label")

    def __init__(self, field: Field, coeffs: Sequence, prec: int | None = None, label: str = "t"):
        coeffs = list(coeffs)
        if prec is None:
            prec = len(coeffs)
        if prec < 0:
            raise SeriesError("negative precision")
        coeffs = coeffs[:prec] + [field.zero] * (prec - len(coeffs))
        self.field = field
        self.coeffs = tuple(coeffs)
        self.prec = prec
        self.label = label

    # constructors
    @classmethod
    def zero(cls, field, prec, label="t"):
        return cls(field, [], prec, label)

    @classmethod
    def const(cls, field, c, prec, label="t"):
        return cls(field, [c], prec, label)

    @classmethod
    def variable(cls, field, prec, label="t"):
        return cls(field, [field.zero, field.one], prec, label)

    def _mk(self, coeffs, prec):
        return TruncatedSeries(self.field, coeffs, prec, self.label)

    def _lift(self, o):
        if isinstance(o, TruncatedSeries):
            return o
        return TruncatedSeries.const(self.field, o, self.prec, self.label)

    def __getitem__(self, i):
        if i >= self.prec:
            raise SeriesError(f"coefficient {i} beyond precision {self.prec}")
        return self.coeffs[i]

    def __len__(self):
        return self.prec

    def __eq__(self, o):
        return (isinstance(o, TruncatedSeries) and self.prec == o.prec
                and self.coeffs == o.coeffs)

    def __hash__(self):
        return hash((self.coeffs, self.prec))

    def __repr__(self):
        terms = [f"{c}*{self.label}^{i}" for i, c in enumerate(self.coeffs) if not self.field.is_zero(c)]
        return (" + ".join(terms) or "0") + f" + O({self.label}^{self.prec})"

    def valuation(self) -> int | float:
        for i, c in enumerate(self.coeffs):
            if not self.field.is_zero(c):
                return i
        return math.inf

    def is_zero(self) -> bool:
        return self.valuation() == math.inf

    def truncate(self, prec):
        return self._mk(self.coeffs[:prec], min(prec, self.prec))

    # arithmetic
    def __add__(self, o):
        o = self._lift(o)
        F = self.field
        n = min(self.prec, o.prec)
        return self._mk([F.add(a, b) for a, b in zip(self.coeffs[:n], o.coeffs[:n])], n)

    __radd__ = __add__

    def __neg__(self):
        return self._mk([self.field.neg(a) for a in self.coeffs], self.prec)

    def __sub__(self, o):
        return self + (-self._lift(o))

    def __rsub__(self, o):
        return self._lift(o) - self

    def scale(self, c):
        return self._mk([self.field.mul(c, a) for a in self.coeffs], self.prec)

    def __mul__(self, o):
        if not isinstance(o, TruncatedSeries):
            return self.scale(o)
        F = self.field
        va, vb = self.valuation(), o.valuation()
        # absolute precision of a product: min(prec_a + val_b, prec_b + val_a)
        n = min(self.prec + (vb if vb != math.inf else o.prec),
                o.prec + (va if va != math.inf else self.prec))
        out = [F.zero] * n
        for i, a in enumerate(self.coeffs):
            if F.is_zero(a) or i >= n:
                continue
            for j, b in enumerate(o.coeffs):
                if i + j >= n:
                    break
                if not F.is_zero(b):
                    out[i + j] = F.add(out[i + j], F.mul(a, b))
        return self._mk(out, n)

    __rmul__ = __mul__

    def shift(self, k: int):
        """Multiply by t^k (k may be negative when low terms vanish)."""
        if k >= 0:
            return self._mk([self.field.zero] * k + list(self.coeffs), self.prec + k)
        if any(not self.field.is_zero(c) for c in self.coeffs[:-k]):
            raise SeriesError("shift would create negative powers")
        return self._mk(self.coeffs[-k:], self.prec + k)

    def inverse(self):
        F = self.field
        if self.prec == 0 or F.is_zero(self.coeffs[0]):
            raise SeriesError("series is not a unit")
        n = self.prec
        inv0 = F.inv(self.coeffs[0])
        out = [inv0]
        for k in range(1, n):
            s = F.zero
            for i in range(1, k + 1):
                s = F.add(s, F.mul(self.coeffs[i], out[k - i]))
            out.append(F.neg(F.mul(s, inv0)))
        return self._mk(out, n)

    def __truediv__(self, o):
        if not isinstance(o, TruncatedSeries):
            return self.scale(self.field.inv(o))
        v = o.valuation()
        if v == math.inf:
            raise SeriesError("division by zero series")
        num = self.shift(-v) if v else self
        return num * o.shift(-v).inverse() if v else num * o.inverse()

    def __pow__(self, e: int):
        if e < 0:
            return self.inverse() ** (-e)
        r = TruncatedSeries.const(self.field, self.field.one, self.prec, self.label)
        b = self
        while e:
            if e & 1:
                r = r * b
            b = b * b
            e >>= 1
        return r

    def derivative(self):
        F = self.field
        return self._mk([F.mul(F.from_int(i), self.coeffs[i]) for i in range(1, self.prec)],
                        max(self.prec - 1, 0))

    def integral(self):
        """Formal antiderivative with zero constant term."""
        F = self.field
        out = [F.zero]
        for i, c in enumerate(self.coeffs):
            if F.is_zero(c):
                out.append(F.zero)
                continue
            if F.characteristic and (i + 1) % F.characteristic == 0:
                raise SeriesError("antiderivative needs division by the characteristic")
            out.append(F.div(c, F.from_int(i + 1)))
        return self._mk(out, self.prec + 1)

    def compose(self, g: "TruncatedSeries"):
        """self(g) for g with zero constant term."""
        if g.prec and not self.field.is_zero(g.coeffs[0]):
            raise SeriesError("inner series must have positive valuation")
        vg = g.valuation()
        n = min(g.prec, self.prec * vg if vg != math.inf else g.prec)
        res = TruncatedSeries.zero(self.field, n, g.label)
        pw = TruncatedSeries.const(self.field, self.field.one, n, g.label)
        for c in self.coeffs:
            if not self.field.is_zero(c):
                res = res + pw.scale(c)
            pw = (pw * g).truncate(n)
        return res.truncate(n)

    def reversion(self):
        """Compositional inverse of a series with valuation exactly 1."""
        F = self.field
        if self.valuation() != 1:
            raise SeriesError("reversion needs valuation 1")
        n = self.prec
        # solve self(g) = t by fixed-point iteration on coefficients
        g = TruncatedSeries(F, [F.zero, F.inv(self.coeffs[1])], n, self.label)
        for _ in range(n):
            err = self.compose(g) - TruncatedSeries.variable(F, n, self.label)
            if err.is_zero():
                break
            g = (g - err.scale(F.inv(self.coeffs[1]))).truncate(n)
        return g

    def nth_root(self, e: int):
        """A series r with r^e = self when self has valuation e and leading coefficient an e-th power.

        Returns (r, lead_root) where lead_root is the chosen root of the leading coefficient.
        """
        F = self.field
        if self.valuation() != e:
            raise SeriesError("nth_root expects valuation equal to the exponent")
        if F.characteristic and e % F.characteristic == 0:
            raise SeriesError("root extraction needs the exponent prime to the characteristic")
        u = self.shift(-e)
        c = u.coeffs[0]
        r0 = _field_root(F, c, e)
        if r0 is None:
            raise SeriesError("leading coefficient is not an e-th power in the field")
        # Newton iteration for w^e = u/c with w(0) = 1
        n = u.prec
        target = u.scale(F.inv(c))
        w = TruncatedSeries.const(F, F.one, n, self.label)
        inv_e = F.inv(F.from_int(e))
        for _ in range(n.bit_length() + 2):
            w = w + (target - w ** e) * (w ** (e - 1)).inverse().scale(inv_e)
        return w.scale(r0).shift(1), r0

    def evaluate(self, x):
        F = self.field
        r = F.zero
        for c in reversed(self.coeffs):
            r = F.add(F.mul(r, x), c)
        return r

    def coefficient_valuations(self, p: int):
        """p-adic valuations of rational coefficients."""
        return [val_p(c, p) for c in self.coeffs]


def _field_root(F, c, e):
    if e == 1:
        return c
    if F.characteristic == 0:
        c = Fraction(c)
        num = _int_root(c.numerator, e)
        den = _int_root(c.denominator, e)
        if num is None or den is None:
            return None
        return Fraction(num, den)
    if e == 2 and hasattr(F, "sqrt"):
        return F.sqrt(c)
    for x in range(F.q):
        if F.pow(x, e) == c:
            return x
    return None


def _int_root(n: int, e: int):
    sign = -1 if n < 0 else 1
    if sign < 0 and e % 2 == 0:
        return None
    r = round(abs(n) ** (1.0 / e))
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand ** e == abs(n):
            return sign * cand
    return None


# ---------------------------------------------------------------------------
# p-adic values and tiny integrals

@dataclass(frozen=True)
class PadicValue:
    """unit * p^valuation known modulo p^cap; an exact zero has unit 0."""

    unit: Fraction
    valuation: int | float
    p: int
    cap: int | float

    def __post_init__(self):
        u = Fraction(self.unit)
        object.__setattr__(self, "unit", u)
        if u != 0 and val_p(u, self.p) != 0:
            raise SeriesError("unit part must have valuation zero")

    @classmethod
    def from_rational(cls, x, p, cap=math.inf):
        x = Fraction(x)
        if x == 0:
            return cls(Fraction(0), math.inf, p, cap)
        v = val_p(x, p)
        return cls(x / Fraction(p) ** v, v, p, cap)

    @property
    def value(self) -> Fraction:
        if self.unit == 0:
            return Fraction(0)
        return self.unit * Fraction(self.p) ** self.valuation

    def agrees_with(self, x) -> bool:
        """x equals this value modulo p^cap."""
        d = Fraction(x) - self.value
        return d == 0 or val_p(d, self.p) >= self.cap


def tail_error_valuation(p: int, vz: int, start: int) -> int:
    """min over n >= start of (n+1)*vz - ord_p(n+1)."""
    if vz < 1:
        raise SeriesError("needs positive valuation")
    best = math.inf
    m = start + 1
    while True:
        cand = m * vz - val_p(m, p)
        best = min(best, cand)
        if m * vz - math.log(m, p) > best:
            return int(best)
        m += 1


def tiny_integral(a: Sequence, z, prec: int, p: int, exact: bool = False) -> PadicValue:
    """sum_{n < prec} a_n z^(n+1)/(n+1) with a certified p-adic error bound.

    `a` holds the expansion coefficients (integral rationals); when `exact` is
    set the series is the finite polynomial given by `a` and no tail remains
    once prec >= len(a).
    """
    z = Fraction(z)
    vz = val_p(z, p)
    if vz == math.inf:
        return PadicValue(Fraction(0), math.inf, p, math.inf)
    if vz < 1:
        raise SeriesError("tiny integrals need val_p(z) >= 1")
    coeffs = [Fraction(x) for x in a]
    if any(c != 0 and val_p(c, p) < 0 for c in coeffs):
        raise SeriesError("coefficients must be p-integral")
    n_terms = min(prec, len(coeffs))
    total = Fraction(0)
    zp = z
    for n in range(n_terms):
        total += coeffs[n] * zp / (n + 1)
        zp *= z
    if exact and prec >= len(coeffs):
        cap = math.inf
    else:
        cap = tail_error_valuation(p, vz, n_terms)
    out = PadicValue.from_rational(total, p, cap)
    if cap != math.inf and out.valuation >= cap:
        raise SeriesError("precision insufficient to certify any digit")
    return out


# ---------------------------------------------------------------------------
# symmetric functions

@dataclass(frozen=True)
class SymmetricProfile:
    n: int
    values: tuple
    basis: str  # "elementary" or "powerSum"

    def __post_init__(self):
        if self.basis not in ("elementary", "powerSum"):
            raise SeriesError("basis must be elementary or powerSum")
        object.__setattr__(self, "values", tuple(self.values))


def _check_char(F: Field, k: int):
    if F.characteristic and F.characteristic <= k:
        raise SeriesError("characteristic too small for Newton identities")


def newton_convert(profile: SymmetricProfile, target: str, k: int, field: Field = QQ) -> SymmetricProfile:
    """Convert between (e_1..e_n) and (s_1..s_k) via Newton's identities."""
    F = field
    _check_char(F, k)
    if profile.basis == target:
        return profile
    if target == "powerSum":
        e = [F.one] + [F.from_fraction(v) if F is QQ else v for v in profile.values]
        e = e + [F.zero] * (k + 1 - len(e))

        def E(i):
            return e[i] if i <= profile.n else F.zero

        s = [F.zero]
        for m in range(1, k + 1):
            acc = F.mul(F.from_int((-1) ** (m - 1) * m), E(m))
            for i in range(1, m):
                acc = F.add(acc, F.mul(F.from_int((-1) ** (i - 1)), F.mul(E(i), s[m - i])))
            s.append(acc)
        return SymmetricProfile(profile.n, s[1:], "powerSum")
    if target == "elementary":
        s = [F.zero] + [F.from_fraction(v) if F is QQ else v for v in profile.values]
        m_max = min(profile.n, len(s) - 1)
        _check_char(F, m_max)
        e = [F.one]
        for m in range(1, m_max + 1):
            acc = F.zero
            for i in range(1, m + 1):
                acc = F.add(acc, F.mul(F.from_int((-1) ** (i - 1)), F.mul(e[m - i], s[i])))
            e.append(F.div(acc, F.from_int(m)))
        e += [F.zero] * (profile.n + 1 - len(e))
        return SymmetricProfile(profile.n, e[1:profile.n + 1], "elementary")
    raise SeriesError(f"unknown basis {target}")


Monomial = tuple  # exponent vector (m_1..m_n) for e_1^m_1 ... e_n^m_n
SymPoly = dict  # Monomial -> Fraction


def _poly_mul_trunc(a: SymPoly, b: SymPoly, n: int, k: int) -> SymPoly:
    """Product of polynomials in e weighted by sum i*m_i, keeping weight <= k."""
    out: SymPoly = {}
    for ma, ca in a.items():
        wa = sum((i + 1) * x for i, x in enumerate(ma))
        for mb, cb in b.items():
            wb = sum((i + 1) * x for i, x in enumerate(mb))
            if wa + wb > k:
                continue
            m = tuple(x + y for x, y in zip(ma, mb))
            out[m] = out.get(m, 0) + ca * cb
    return {m: c for m, c in out.items() if c}


def newton_defect_poly(n: int, k: int) -> SymPoly:
    """s_k/k - (-1)^(k-1) e_k as a polynomial in e_1..e_n over Q.

    Uses log(1 + e_1 t + ... + e_n t^n) = sum_k (-1)^(k-1) s_k t^k / k and keeps
    the part of degree >= 2 in the e's.
    """
    if not (1 <= n <= 6 and 1 <= k <= 12):
        raise SeriesError("newton_defect_poly needs 1 <= n <= 6 and 1 <= k <= 12")
    base: SymPoly = {}
    for i in range(1, n + 1):
        m = [0] * n
        m[i - 1] = 1
        base[tuple(m)] = Fraction(1)
    out: SymPoly = {}
    power = dict(base)
    for deg in range(2, k + 1):
        power = _poly_mul_trunc(power, base, n, k)
        sign = Fraction((-1) ** (deg - 1), deg)
        for m, c in power.items():
            if sum((i + 1) * x for i, x in enumerate(m)) == k:
                out[m] = out.get(m, 0) + sign * c
    scale = (-1) ** (k - 1)
    return {m: scale * c for m, c in sorted(out.items()) if c}


def sympoly_eval(P: SymPoly, e: Sequence) -> Fraction:
    total = Fraction(0)
    for m, c in P.items():
        term = Fraction(c)
        for ei, x in zip(e, m):
            if x:
                term *= Fraction(ei) ** x
        total += term
    return total


def monomial_degree(m: Monomial) -> int:
    return sum(m)


def quadratic_newton_term(n: int, k: int) -> SymPoly:
    """(-1)^k/2 * sum_{i=k-n}^{n} e_i e_{k-i}, with e_0 excluded."""
    out: SymPoly = {}
    for i in range(max(k - n, 1), n + 1):
        j = k - i
        if not 1 <= j <= n:
            continue
        m = [0] * n
        m[i - 1] += 1
        m[j - 1] += 1
        m = tuple(m)
        out[m] = out.get(m, 0) + Fraction((-1) ** k, 2)
    return {m: c for m, c in out.items() if c}


def psi(xs: Sequence, i: int, field: Field | None = None):
    """psi_i(x_1..x_j) = sum_{l=i-j}^{j} x_l x_{i-l}, for j+1 <= i <= 2j."""
    j = len(xs)
    if not j + 1 <= i <= 2 * j:
        raise SeriesError("psi index out of range")
    if field is None:
        return sum(xs[l - 1] * xs[i - l - 1] for l in range(i - j, j + 1))
    acc = field.zero
    for l in range(i - j, j + 1):
        acc = field.add(acc, field.mul(xs[l - 1], xs[i - l - 1]))
    return acc


def prime_bound_check(p: int, N: int, T: int, l: int) -> bool:
    """Truth of l - T >= N*ord_p(l) + 1."""
    if N < 1 or T < 1 or l < 1 or l <= T:
        raise SeriesError("need positive N, T, l with l > T")
    return l - T >= N * val_p(l, p) + 1


def default_precision(ns: Sequence[int]) -> int:
    return 2 * max(ns) + 4
