"""Exact arithmetic substrate.

Prime and extension fields, dense linear algebra over fields, integer
Smith normal form, LLL reduction and small-vector enumeration in lattice
cosets, finite abelian group bookkeeping, and polynomial factoring over
finite fields.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from numba import njit


class AlgebraError(ValueError):
    """Raised on violated preconditions in this module."""


class BudgetExceeded(RuntimeError):
    """Raised when an enumeration or search exceeds its configured cap."""


# ---------------------------------------------------------------------------
# integers

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for n < 3.3e24."""
    if n < 2:
        return False
    for b in _MR_BASES:
        if n % b == 0:
            return n == b
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _pollard_rho(n: int) -> int:
    if n % 2 == 0:
        return 2
    rng = random.Random(n)
    while True:
        c = rng.randrange(1, n)
        f = lambda v: (v * v + c) % n  # noqa: E731
        x = y = rng.randrange(2, n)
        d = 1
        while d == 1:
            x = f(x)
            y = f(f(y))
            d = math.gcd(abs(x - y), n)
        if d != n:
            return d


def factorint(n: int) -> dict[int, int]:
    """Prime factorisation of a positive integer."""
    if n < 1:
        raise AlgebraError("factorint needs n >= 1")
    out: dict[int, int] = {}
    for q in (2, 3, 5, 7, 11, 13):
        while n % q == 0:
            out[q] = out.get(q, 0) + 1
            n //= q
    stack = [n] if n > 1 else []
    while stack:
        m = stack.pop()
        if m == 1:
            continue
        if is_prime(m):
            out[m] = out.get(m, 0) + 1
            continue
        d = _pollard_rho(m)
        stack.extend([d, m // d])
    return dict(sorted(out.items()))


def val_p(x, p: int) -> int | float:
    """p-adic valuation of an integer or Fraction; inf for zero."""
    if isinstance(x, int):
        if x == 0:
            return math.inf
        v = 0
        while x % p == 0:
            x //= p
            v += 1
        return v
    x = Fraction(x)
    if x == 0:
        return math.inf
    v = 0
    num, den = x.numerator, x.denominator
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return v


def crt_pair(a1: int, m1: int, a2: int, m2: int) -> tuple[int, int] | None:
    """Combine x = a1 mod m1 and x = a2 mod m2; None when inconsistent."""
    g = math.gcd(m1, m2)
    if (a2 - a1) % g:
        return None
    l = m1 // g * m2
    t = ((a2 - a1) // g * pow(m1 // g, -1, m2 // g)) % (m2 // g) if m2 // g > 1 else 0
    return (a1 + m1 * t) % l, l


# ---------------------------------------------------------------------------
# fields

class Field:
    """Common interface used by the generic algorithms (series, curves)."""

    characteristic: int

    def add(self, a, b):
        raise NotImplementedError

    def sub(self, a, b):
        raise NotImplementedError

    def neg(self, a):
        raise NotImplementedError

    def mul(self, a, b):
        raise NotImplementedError

    def inv(self, a):
        raise NotImplementedError

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def from_int(self, n: int):
        raise NotImplementedError

    def is_zero(self, a) -> bool:
        raise NotImplementedError

    @property
    def zero(self):
        return self.from_int(0)

    @property
    def one(self):
        return self.from_int(1)

    def pow(self, a, e: int):
        if e < 0:
            a, e = self.inv(a), -e
        r = self.one
        while e:
            if e & 1:
                r = self.mul(r, a)
            a = self.mul(a, a)
            e >>= 1
        return r

    def from_fraction(self, x):
        x = Fraction(x)
        return self.div(self.from_int(x.numerator), self.from_int(x.denominator))


class RationalField(Field):
    """The rational numbers with exact Fraction arithmetic."""

    characteristic = 0

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def neg(self, a):
        return -a

    def mul(self, a, b):
        return a * b

    def inv(self, a):
        if a == 0:
            raise ZeroDivisionError("inverse of zero")
        return 1 / Fraction(a)

    def div(self, a, b):
        return Fraction(a) / b

    def from_int(self, n):
        return Fraction(n)

    def from_fraction(self, x):
        return Fraction(x)

    def is_zero(self, a):
        return a == 0

    def __repr__(self):
        return "QQ"

    def __eq__(self, other):
        return isinstance(other, RationalField)

    def __hash__(self):
        return hash("QQ")


QQ = RationalField()


class NumberField(Field):
    """Q[a]/(f) for a monic irreducible integer polynomial f; elements are coefficient tuples."""

    characteristic = 0

    def __init__(self, minpoly: Sequence[int]):
        f = [Fraction(c) for c in minpoly]
        if len(f) < 2 or f[-1] != 1:
            raise AlgebraError("minimal polynomial must be monic of positive degree")
        self.minpoly = tuple(int(c) for c in minpoly)
        self.degree = len(f) - 1
        self._f = f

    def _reduce(self, c: list) -> tuple:
        d, f = self.degree, self._f
        c = list(c) + [Fraction(0)] * max(0, d - len(c))
        for i in range(len(c) - 1, d - 1, -1):
            t = c[i]
            if t:
                for j in range(d):
                    c[i - d + j] -= t * f[j]
                c[i] = Fraction(0)
        return tuple(c[:d])

    def element(self, coeffs: Sequence) -> tuple:
        return self._reduce([Fraction(x) for x in coeffs])

    def gen(self) -> tuple:
        return self.element([0, 1])

    def add(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def sub(self, a, b):
        return tuple(x - y for x, y in zip(a, b))

    def neg(self, a):
        return tuple(-x for x in a)

    def mul(self, a, b):
        prod = [Fraction(0)] * (2 * self.degree - 1)
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b):
                    if y:
                        prod[i + j] += x * y
        return self._reduce(prod)

    def inv(self, a):
        if self.is_zero(a):
            raise ZeroDivisionError("inverse of zero")
        d = self.degree
        # columns a * a^j; solve for the coordinates of 1
        cols = []
        x = self.one
        for _ in range(d):
            cols.append(self.mul(a, x))
            x = self.mul(x, self.gen()) if d > 1 else x
        M = [[cols[j][i] for j in range(d)] + [Fraction(int(i == 0))] for i in range(d)]
        for c in range(d):
            r = next(i for i in range(c, d) if M[i][c] != 0)
            M[c], M[r] = M[r], M[c]
            piv = M[c][c]
            M[c] = [v / piv for v in M[c]]
            for i in range(d):
                if i != c and M[i][c] != 0:
                    t = M[i][c]
                    M[i] = [u - t * v for u, v in zip(M[i], M[c])]
        return tuple(M[i][d] for i in range(d))

    def from_int(self, n):
        return self.element([n])

    def from_fraction(self, x):
        return self.element([Fraction(x)])

    def is_zero(self, a):
        return all(x == 0 for x in a)

    def __repr__(self):
        return f"NumberField({list(self.minpoly)})"

    def __eq__(self, other):
        return isinstance(other, NumberField) and other.minpoly == self.minpoly

    def __hash__(self):
        return hash(("NF", self.minpoly))


def _poly_trim(a: list[int]) -> list[int]:
    while a and a[-1] == 0:
        a.pop()
    return a


def _fp_poly_mulmod(a, b, mod, p):
    """Product of coefficient lists a*b reduced by the monic polynomial mod."""
    k = len(mod) - 1
    prod = [0] * (len(a) + len(b) - 1) if a and b else []
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                prod[i + j] = (prod[i + j] + ai * bj) % p
    for d in range(len(prod) - 1, k - 1, -1):
        c = prod[d]
        if c:
            for j in range(k):
                prod[d - k + j] = (prod[d - k + j] - c * mod[j]) % p
            prod[d] = 0
    return prod[:k] + [0] * (k - len(prod[:k]))


TABLE_CAP = 1 << 20


class GF(Field):
    """Finite field F_{p^k}; elements are ints sum(c_i p^i) in power basis."""

    def __init__(self, p: int, k: int = 1, modulus: Sequence[int] | None = None):
        if not is_prime(p):
            raise AlgebraError(f"{p} is not prime")
        if k < 1:
            raise AlgebraError("extension degree must be positive")
        self.p = p
        self.k = k
        self.q = p ** k
        self.characteristic = p
        if k == 1:
            modulus = (0, 1)
        if modulus is None:
            modulus = least_irreducible(p, k)
        modulus = tuple(int(c) % p for c in modulus)
        if len(modulus) != k + 1 or modulus[-1] != 1:
            raise AlgebraError("modulus must be monic of degree k")
        if k > 1 and not fp_poly_is_irreducible(list(modulus), p):
            raise AlgebraError("modulus is reducible")
        self.modulus = modulus
        self._tables = None

    # representation helpers
    def to_vec(self, a: int) -> list[int]:
        v = []
        for _ in range(self.k):
            a, r = divmod(a, self.p)
            v.append(r)
        return v

    def from_vec(self, v: Sequence[int]) -> int:
        a = 0
        for c in reversed(list(v)):
            a = a * self.p + int(c) % self.p
        return a

    def gen(self) -> int:
        """The class of X in F_p[X]/(modulus)."""
        return self.from_vec([0, 1] + [0] * (self.k - 2)) if self.k > 1 else self._prime_root()

    # tables
    def _prime_root(self) -> int:
        if self.p == 2:
            return 1
        fac = factorint(self.p - 1)
        for g in range(2, self.p):
            if all(pow(g, (self.p - 1) // r, self.p) != 1 for r in fac):
                return g
        raise AlgebraError("no primitive root")

    @property
    def tables(self):
        if self._tables is None:
            if self.q > TABLE_CAP:
                return None
            self._tables = self._build_tables()
        return self._tables

    def _slow_mul(self, a: int, b: int) -> int:
        if self.k == 1:
            return a * b % self.p
        return self.from_vec(_fp_poly_mulmod(self.to_vec(a), self.to_vec(b), self.modulus, self.p))

    def _find_primitive(self) -> int:
        n = self.q - 1
        fac = factorint(n) if n > 1 else {}
        cand = range(1, self.q) if self.k == 1 else range(self.p, self.q)
        for g in cand:
            if all(self._slow_pow(g, n // r) != 1 for r in fac):
                return g
        return 1

    def _slow_pow(self, a, e):
        r = 1
        while e:
            if e & 1:
                r = self._slow_mul(r, a)
            a = self._slow_mul(a, a)
            e >>= 1
        return r

    def _build_tables(self):
        q, p = self.q, self.p
        g = self._find_primitive()
        exp = np.zeros(2 * (q - 1) + 1, dtype=np.int64)
        log = np.full(q, -1, dtype=np.int64)
        x = 1
        for i in range(q - 1):
            exp[i] = x
            log[x] = i
            x = self._slow_mul(x, g)
        exp[q - 1:2 * (q - 1)] = exp[:q - 1]
        # zech[n] = log(1 + g^n), -1 when 1 + g^n = 0
        vals = exp[:q - 1]
        inc = vals - vals % p + (vals % p + 1) % p
        zech = log[inc]
        return exp, log, zech

    # scalar arithmetic
    def from_int(self, n: int) -> int:
        return int(n) % self.p

    def is_zero(self, a) -> bool:
        return a == 0

    def add(self, a, b):
        if self.k == 1:
            return (a + b) % self.p
        t = self.tables
        if t is not None:
            if a == 0:
                return b
            if b == 0:
                return a
            exp, log, zech = t
            la = log[a]
            n = (log[b] - la) % (self.q - 1)
            z = zech[n]
            if z < 0:
                return 0
            return int(exp[(la + z) % (self.q - 1)])
        va, vb = self.to_vec(a), self.to_vec(b)
        return self.from_vec([(x + y) % self.p for x, y in zip(va, vb)])

    def neg(self, a):
        if self.k == 1:
            return (-a) % self.p
        return self.from_vec([(-x) % self.p for x in self.to_vec(a)])

    def sub(self, a, b):
        return self.add(a, self.neg(b))

    def mul(self, a, b):
        if self.k == 1:
            return a * b % self.p
        if a == 0 or b == 0:
            return 0
        t = self.tables
        if t is not None:
            exp, log, _ = t
            return int(exp[log[a] + log[b]])
        return self._slow_mul(a, b)

    def inv(self, a):
        if a == 0:
            raise ZeroDivisionError("inverse of zero in finite field")
        if self.k == 1:
            return pow(a, -1, self.p)
        t = self.tables
        if t is not None:
            exp, log, _ = t
            return int(exp[(self.q - 1 - log[a]) % (self.q - 1)])
        return self._slow_pow(a, self.q - 2)

    def pow(self, a, e):
        if self.k == 1:
            if a == 0:
                if e < 0:
                    raise ZeroDivisionError("inverse of zero")
                return 1 if e == 0 else 0
            return pow(a, e % (self.p - 1), self.p)
        if a == 0:
            if e < 0:
                raise ZeroDivisionError("inverse of zero")
            return 1 if e == 0 else 0
        t = self.tables
        if t is not None:
            exp, log, _ = t
            return int(exp[(log[a] * e) % (self.q - 1)])
        return self._slow_pow(a, e % (self.q - 1))

    def frobenius(self, a, i: int = 1):
        return self.pow(a, self.p ** i)

    def elements(self) -> range:
        return range(self.q)

    def in_prime_field(self, a) -> bool:
        return a < self.p

    def sqrt(self, a):
        """A square root of a, or None when a is a non-square."""
        if a == 0:
            return 0
        if self.p == 2:
            return self.pow(a, self.q // 2)
        if self.pow(a, (self.q - 1) // 2) != 1:
            return None
        if self.k == 1:
            return _tonelli(a, self.p)
        t = self.tables
        if t is not None:
            exp, log, _ = t
            return int(exp[log[a] // 2])
        roots = poly_roots([self.neg(a), 0, 1], self)
        return min(roots)

    # vectorised arithmetic on numpy int64 arrays
    def vadd(self, a, b):
        if self.k == 1:
            return (a + b) % self.p
        exp, log, zech = self.tables
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        a, b = np.broadcast_arrays(a, b)
        out = np.where(a == 0, b, a).astype(np.int64)
        both = (a != 0) & (b != 0)
        la = log[a[both]]
        n = (log[b[both]] - la) % (self.q - 1)
        z = zech[n]
        res = np.where(z < 0, 0, exp[(la + np.maximum(z, 0)) % (self.q - 1)])
        out[both] = res
        return out

    def vneg(self, a):
        if self.k == 1:
            return (-np.asarray(a)) % self.p
        a = np.asarray(a, dtype=np.int64)
        out = np.zeros_like(a)
        pw = 1
        rem = a.copy()
        for _ in range(self.k):
            d = rem % self.p
            rem //= self.p
            out += ((-d) % self.p) * pw
            pw *= self.p
        return out

    def vmul(self, a, b):
        if self.k == 1:
            return (np.asarray(a, dtype=np.int64) * b) % self.p
        exp, log, _ = self.tables
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        a, b = np.broadcast_arrays(a, b)
        nz = (a != 0) & (b != 0)
        out = np.zeros(a.shape, dtype=np.int64)
        out[nz] = exp[log[a[nz]] + log[b[nz]]]
        return out

    def vdigits(self, a):
        """Power-basis coordinates of each element, shape (..., k)."""
        a = np.asarray(a, dtype=np.int64)
        out = np.empty(a.shape + (self.k,), dtype=np.int64)
        rem = a.copy()
        for i in range(self.k):
            out[..., i] = rem % self.p
            rem //= self.p
        return out

    def __repr__(self):
        return f"GF({self.p}^{self.k})"

    def __eq__(self, other):
        return isinstance(other, GF) and (self.p, self.modulus) == (other.p, other.modulus)

    def __hash__(self):
        return hash((self.p, self.modulus))


def _tonelli(a: int, p: int) -> int | None:
    a %= p
    if a == 0:
        return 0
    if p == 2:
        return a
    if pow(a, (p - 1) // 2, p) != 1:
        return None
    q, s = p - 1, 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while pow(z, (p - 1) // 2, p) != p - 1:
        z += 1
    m, c, t, r = s, pow(z, q, p), pow(a, q, p), pow(a, (q + 1) // 2, p)
    while t != 1:
        i, t2 = 0, t
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = pow(c, 1 << (m - i - 1), p)
        m, c, t, r = i, b * b % p, t * b * b % p, r * b % p
    return min(r, p - r)


@lru_cache(maxsize=None)
def _field_cache(p: int, k: int) -> GF:
    return GF(p, k)


def ext_field_build(p: int, k: int) -> GF:
    """F_{p^k} with the least monic irreducible modulus (cached)."""
    if not is_prime(p):
        raise AlgebraError(f"{p} is not prime")
    if not 1 <= k <= 12:
        raise AlgebraError("extension degree must lie in 1..12")
    return _field_cache(p, k)


def least_irreducible(p: int, k: int) -> tuple[int, ...]:
    """Least monic irreducible of degree k; tails ordered by sum c_i p^i."""
    if k == 1:
        return (0, 1)
    for code in range(p ** k):
        tail = []
        c = code
        for _ in range(k):
            c, r = divmod(c, p)
            tail.append(r)
        if tail[0] == 0:
            continue
        f = tail + [1]
        if fp_poly_is_irreducible(f, p):
            return tuple(f)
    raise AlgebraError("no irreducible polynomial found")


@dataclass(frozen=True)
class PrimeFieldElem:
    value: int
    modulus: int

    def __post_init__(self):
        object.__setattr__(self, "value", self.value % self.modulus)

    def _coerce(self, o):
        if isinstance(o, PrimeFieldElem):
            if o.modulus != self.modulus:
                raise AlgebraError("mixed moduli")
            return o.value
        return int(o) % self.modulus

    def __add__(self, o):
        return PrimeFieldElem(self.value + self._coerce(o), self.modulus)

    __radd__ = __add__

    def __sub__(self, o):
        return PrimeFieldElem(self.value - self._coerce(o), self.modulus)

    def __rsub__(self, o):
        return PrimeFieldElem(self._coerce(o) - self.value, self.modulus)

    def __neg__(self):
        return PrimeFieldElem(-self.value, self.modulus)

    def __mul__(self, o):
        return PrimeFieldElem(self.value * self._coerce(o), self.modulus)

    __rmul__ = __mul__

    def inverse(self):
        return PrimeFieldElem(pow(self.value, -1, self.modulus), self.modulus)

    def __truediv__(self, o):
        return self * PrimeFieldElem(self._coerce(o), self.modulus).inverse()

    def __pow__(self, e):
        if e < 0:
            return self.inverse() ** (-e)
        return PrimeFieldElem(pow(self.value, e, self.modulus), self.modulus)


@dataclass(frozen=True)
class ExtFieldElem:
    """Element of F_{p^k} as power-basis coordinates over F_p."""

    field: GF
    code: int

    @classmethod
    def from_coeffs(cls, field_: GF, coeffs: Sequence[int]):
        return cls(field_, field_.from_vec(coeffs))

    @property
    def coeffs(self) -> tuple[int, ...]:
        return tuple(self.field.to_vec(self.code))

    @property
    def modulus_poly(self) -> tuple[int, ...]:
        return self.field.modulus

    def _c(self, o):
        if isinstance(o, ExtFieldElem):
            return o.code
        return self.field.from_int(o)

    def __add__(self, o):
        return ExtFieldElem(self.field, self.field.add(self.code, self._c(o)))

    __radd__ = __add__

    def __sub__(self, o):
        return ExtFieldElem(self.field, self.field.sub(self.code, self._c(o)))

    def __neg__(self):
        return ExtFieldElem(self.field, self.field.neg(self.code))

    def __mul__(self, o):
        return ExtFieldElem(self.field, self.field.mul(self.code, self._c(o)))

    __rmul__ = __mul__

    def inverse(self):
        return ExtFieldElem(self.field, self.field.inv(self.code))

    def __truediv__(self, o):
        return ExtFieldElem(self.field, self.field.div(self.code, self._c(o)))

    def __pow__(self, e):
        return ExtFieldElem(self.field, self.field.pow(self.code, e))

    def frobenius(self, i=1):
        return ExtFieldElem(self.field, self.field.frobenius(self.code, i))


# ---------------------------------------------------------------------------
# polynomials over F_p (coefficient lists, low degree first)

def fp_poly_divmod(a, b, p):
    a = [x % p for x in a]
    _poly_trim(a)
    b = _poly_trim([x % p for x in b])
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    inv = pow(b[-1], -1, p)
    q = [0] * max(len(a) - len(b) + 1, 1)
    while len(a) >= len(b) and a:
        c = a[-1] * inv % p
        d = len(a) - len(b)
        q[d] = c
        for i, bi in enumerate(b):
            a[d + i] = (a[d + i] - c * bi) % p
        _poly_trim(a)
    return _poly_trim(q), a


def fp_poly_gcd(a, b, p):
    a = _poly_trim([x % p for x in a])
    b = _poly_trim([x % p for x in b])
    while b:
        a, b = b, fp_poly_divmod(a, b, p)[1]
    if a:
        inv = pow(a[-1], -1, p)
        a = [x * inv % p for x in a]
    return a


def fp_poly_mul(a, b, p):
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] = (out[i + j] + x * y) % p
    return _poly_trim(out)


def fp_poly_powmod(base, e, mod, p):
    result = [1]
    base = fp_poly_divmod(base, mod, p)[1]
    while e:
        if e & 1:
            result = fp_poly_divmod(fp_poly_mul(result, base, p), mod, p)[1]
        base = fp_poly_divmod(fp_poly_mul(base, base, p), mod, p)[1]
        e >>= 1
    return result


def fp_poly_is_irreducible(f, p) -> bool:
    """Rabin's test for a polynomial over F_p."""
    f = _poly_trim([x % p for x in f])
    n = len(f) - 1
    if n < 1:
        return False
    if n == 1:
        return True
    x = [0, 1]
    primes = list(factorint(n))
    for r in primes:
        h = fp_poly_powmod(x, p ** (n // r), f, p)
        h = h + [0] * (2 - len(h))
        h[1] = (h[1] - 1) % p
        if len(fp_poly_gcd(f, _poly_trim(h), p)) > 1:
            return False
    h = fp_poly_powmod(x, p ** n, f, p)
    h = h + [0] * (2 - len(h))
    h[1] = (h[1] - 1) % p
    return not _poly_trim(h)


def fp_poly_factor(f, p) -> list[tuple[list[int], int]]:
    """Monic irreducible factors with multiplicity over F_p."""
    f = _poly_trim([int(x) % p for x in f])
    if len(f) <= 1:
        return []
    F = GF(p)
    return [(fac, m) for fac, m in poly_factor(f, F)]


# ---------------------------------------------------------------------------
# polynomials over a finite field (coefficients are field ints)

def poly_trim(a):
    a = list(a)
    while a and a[-1] == 0:
        a.pop()
    return a


def poly_divmod(a, b, F: GF):
    a = poly_trim(a)
    b = poly_trim(b)
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    inv = F.inv(b[-1])
    q = [0] * max(len(a) - len(b) + 1, 1)
    while len(a) >= len(b) and a:
        c = F.mul(a[-1], inv)
        d = len(a) - len(b)
        q[d] = c
        for i, bi in enumerate(b):
            a[d + i] = F.sub(a[d + i], F.mul(c, bi))
        a = poly_trim(a)
    return poly_trim(q), a


def poly_mul(a, b, F):
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                if y:
                    out[i + j] = F.add(out[i + j], F.mul(x, y))
    return poly_trim(out)


def poly_monic(a, F):
    a = poly_trim(a)
    if not a:
        return a
    inv = F.inv(a[-1])
    return [F.mul(x, inv) for x in a]


def poly_gcd(a, b, F):
    a, b = poly_trim(a), poly_trim(b)
    while b:
        a, b = b, poly_divmod(a, b, F)[1]
    return poly_monic(a, F)


def poly_powmod(base, e, mod, F):
    result = [1]
    base = poly_divmod(base, mod, F)[1]
    while e:
        if e & 1:
            result = poly_divmod(poly_mul(result, base, F), mod, F)[1]
        base = poly_divmod(poly_mul(base, base, F), mod, F)[1]
        e >>= 1
    return result


def poly_sub(a, b, F):
    n = max(len(a), len(b))
    a = list(a) + [0] * (n - len(a))
    b = list(b) + [0] * (n - len(b))
    return poly_trim([F.sub(x, y) for x, y in zip(a, b)])


def poly_deriv(a, F):
    return poly_trim([F.mul(F.from_int(i), a[i]) for i in range(1, len(a))])


def poly_eval(a, x, F):
    r = 0
    for c in reversed(a):
        r = F.add(F.mul(r, x), c)
    return r


def _squarefree_parts(f, F: GF):
    """Yun-style decomposition: list of (squarefree poly, multiplicity)."""
    out = []
    f = poly_monic(f, F)
    if len(f) <= 1:
        return out
    d = poly_deriv(f, F)
    if not d:
        # f = g(x^p)
        p = F.p
        g = [F.pow(f[i], F.q // p) for i in range(0, len(f), p)]
        return [(h, m * p) for h, m in _squarefree_parts(g, F)]
    c = poly_gcd(f, d, F)
    w = poly_divmod(f, c, F)[0]
    i = 1
    while len(w) > 1:
        y = poly_gcd(w, c, F)
        z = poly_divmod(w, y, F)[0]
        if len(z) > 1:
            out.append((poly_monic(z, F), i))
        i += 1
        w = y
        c = poly_divmod(c, y, F)[0]
    if len(c) > 1:
        p = F.p
        g = [F.pow(c[j], F.q // p) for j in range(0, len(c), p)]
        out.extend((h, m * p) for h, m in _squarefree_parts(g, F))
    return out


def _distinct_degree(f, F: GF):
    out = []
    x = [0, 1]
    h = x
    d = 0
    while len(f) > 1:
        d += 1
        if 2 * d > len(f) - 1:
            out.append((f, len(f) - 1))
            break
        h = poly_powmod(h, F.q, f, F)
        g = poly_gcd(f, poly_sub(h, x, F), F)
        if len(g) > 1:
            out.append((g, d))
            f = poly_divmod(f, g, F)[0]
            h = poly_divmod(h, f, F)[1] if len(f) > 1 else h
    return out


def _equal_degree(f, d, F: GF, rng: random.Random):
    n = len(f) - 1
    if n == d:
        return [poly_monic(f, F)]
    while True:
        a = poly_trim([rng.randrange(F.q) for _ in range(n)])
        if len(a) < 2:
            continue
        if F.p == 2:
            t = a
            s = a
            for _ in range(F.k * d - 1):
                s = poly_divmod(poly_mul(s, s, F), f, F)[1]
                t = poly_trim([F.add(x, y) for x, y in zip(t + [0] * (len(s) - len(t)), s + [0] * (len(t) - len(s)))])
            g = poly_gcd(f, t, F)
        else:
            b = poly_powmod(a, (F.q ** d - 1) // 2, f, F)
            g = poly_gcd(f, poly_sub(b, [1], F), F)
        if 1 < len(g) < len(f):
            h = poly_divmod(f, g, F)[0]
            return _equal_degree(g, d, F, rng) + _equal_degree(h, d, F, rng)


def poly_factor(f, F: GF) -> list[tuple[list[int], int]]:
    """Factor f over F into monic irreducibles with multiplicities."""
    rng = random.Random(12345)
    out = []
    for g, m in _squarefree_parts(f, F):
        for h, d in _distinct_degree(g, F):
            for fac in _equal_degree(h, d, F, rng):
                out.append((fac, m))
    out.sort(key=lambda t: (len(t[0]), t[0], t[1]))
    return out


def poly_roots(f, F: GF) -> list[int]:
    """Distinct roots of f in F, sorted."""
    f = poly_trim(f)
    if not f:
        raise AlgebraError("zero polynomial has every element as root")
    if len(f) == 1:
        return []
    f = poly_monic(f, F)
    g = poly_gcd(f, poly_sub(poly_powmod([0, 1], F.q, f, F), [0, 1], F), F)
    if len(g) <= 1:
        return []
    rng = random.Random(777)
    roots = [F.neg(h[0]) for h in _equal_degree(g, 1, F, rng)]
    return sorted(roots)


# ---------------------------------------------------------------------------
# linear algebra mod p (numba kernels on int64)

@njit(cache=True)
def _inv_mod(a, p):
    t, newt, r, newr = 0, 1, p, a % p
    while newr != 0:
        q = r // newr
        t, newt = newt, t - q * newt
        r, newr = newr, r - q * newr
    if t < 0:
        t += p
    return t


@njit(cache=True)
def _rref_modp(A, p):
    M = A.copy() % p
    rows, cols = M.shape
    piv = np.empty(min(rows, cols), dtype=np.int64)
    r = 0
    for c in range(cols):
        if r >= rows:
            break
        sel = -1
        for i in range(r, rows):
            if M[i, c] != 0:
                sel = i
                break
        if sel < 0:
            continue
        if sel != r:
            for j in range(cols):
                tmp = M[r, j]
                M[r, j] = M[sel, j]
                M[sel, j] = tmp
        inv = _inv_mod(M[r, c], p)
        for j in range(c, cols):
            M[r, j] = M[r, j] * inv % p
        for i in range(rows):
            if i != r:
                f = M[i, c]
                if f != 0:
                    for j in range(c, cols):
                        M[i, j] = (M[i, j] - f * M[r, j]) % p
        piv[r] = c
        r += 1
    return M[:r].copy(), piv[:r].copy()


def rref_modp(A, p: int):
    """Reduced row echelon form over F_p: (nonzero rows, pivot columns)."""
    A = np.ascontiguousarray(np.asarray(A, dtype=np.int64))
    if A.ndim != 2:
        raise AlgebraError("matrix expected")
    if A.shape[0] == 0 or A.shape[1] == 0:
        return np.zeros((0, A.shape[1]), dtype=np.int64), np.zeros(0, dtype=np.int64)
    return _rref_modp(A, p)


def kernel_modp(A, p: int) -> np.ndarray:
    """Right kernel basis (rows) of A over F_p."""
    A = np.asarray(A, dtype=np.int64)
    n = A.shape[1]
    R, piv = rref_modp(A, p)
    free = [c for c in range(n) if c not in set(piv.tolist())]
    K = np.zeros((len(free), n), dtype=np.int64)
    for t, c in enumerate(free):
        K[t, c] = 1
        for i, pc in enumerate(piv):
            K[t, pc] = (-R[i, c]) % p
    return K


def rank_modp(A, p: int) -> int:
    return rref_modp(A, p)[0].shape[0]


# ---------------------------------------------------------------------------
# generic matrices over a Field

@dataclass
class FieldMatrix:
    """Dense matrix over a Field (entries in that field's representation)."""

    field: Field
    rows: list[list]

    @property
    def dims(self) -> tuple[int, int]:
        return (len(self.rows), len(self.rows[0]) if self.rows else 0)

    @classmethod
    def from_ints(cls, F: Field, M: Iterable[Iterable[int]]):
        return cls(F, [[F.from_int(x) for x in r] for r in M])

    def mul_vec(self, v):
        F = self.field
        out = []
        for r in self.rows:
            s = F.zero
            for a, b in zip(r, v):
                s = F.add(s, F.mul(a, b))
            out.append(s)
        return out

    def transpose(self):
        n, m = self.dims
        return FieldMatrix(self.field, [[self.rows[i][j] for i in range(n)] for j in range(m)])


def rref_generic(M: FieldMatrix):
    F = M.field
    A = [list(r) for r in M.rows]
    rows, cols = M.dims
    piv = []
    r = 0
    for c in range(cols):
        sel = next((i for i in range(r, rows) if not F.is_zero(A[i][c])), None)
        if sel is None:
            continue
        A[r], A[sel] = A[sel], A[r]
        inv = F.inv(A[r][c])
        A[r] = [F.mul(x, inv) for x in A[r]]
        for i in range(rows):
            if i != r and not F.is_zero(A[i][c]):
                f = A[i][c]
                A[i] = [F.sub(x, F.mul(f, y)) for x, y in zip(A[i], A[r])]
        piv.append(c)
        r += 1
        if r == rows:
            break
    return A[:r], piv


def mat_rank_kernel(M: FieldMatrix) -> tuple[int, list[list]]:
    """Rank and a right-kernel basis of M."""
    F = M.field
    rows, cols = M.dims
    if isinstance(F, GF) and F.k == 1 and rows and cols:
        R, piv = rref_modp(np.array(M.rows, dtype=np.int64), F.p)
        K = kernel_modp(np.array(M.rows, dtype=np.int64), F.p)
        return R.shape[0], [[int(x) for x in k] for k in K]
    R, piv = rref_generic(M) if rows else ([], [])
    free = [c for c in range(cols) if c not in piv]
    kern = []
    for c in free:
        v = [F.zero] * cols
        v[c] = F.one
        for i, pc in enumerate(piv):
            v[pc] = F.neg(R[i][c])
        kern.append(v)
    return len(piv), kern


# ---------------------------------------------------------------------------
# integer matrices

def _mat_id(n):
    return [[int(i == j) for j in range(n)] for i in range(n)]


def smith_normal_form(M: Sequence[Sequence[int]]):
    """Return (D, U, V) with U*M*V = D diagonal, d1 | d2 | ..., U, V unimodular."""
    A = [[int(x) for x in r] for r in M]
    n = len(A)
    m = len(A[0]) if n else 0
    U = _mat_id(n)
    V = _mat_id(m)

    def swap_rows(i, j):
        A[i], A[j] = A[j], A[i]
        U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for r in A:
            r[i], r[j] = r[j], r[i]
        for r in V:
            r[i], r[j] = r[j], r[i]

    def add_row(dst, src, c):  # row dst += c*row src
        A[dst] = [a + c * b for a, b in zip(A[dst], A[src])]
        U[dst] = [a + c * b for a, b in zip(U[dst], U[src])]

    def add_col(dst, src, c):
        for r in A:
            r[dst] += c * r[src]
        for r in V:
            r[dst] += c * r[src]

    t = 0
    while t < min(n, m):
        # pivot: smallest nonzero entry in the remaining block
        best = None
        for i in range(t, n):
            for j in range(t, m):
                if A[i][j] and (best is None or abs(A[i][j]) < abs(A[best[0]][best[1]])):
                    best = (i, j)
        if best is None:
            break
        swap_rows(t, best[0])
        swap_cols(t, best[1])
        done = False
        while not done:
            done = True
            for i in range(t + 1, n):
                if A[i][t]:
                    q = A[i][t] // A[t][t]
                    add_row(i, t, -q)
                    if A[i][t]:
                        swap_rows(t, i)
                        done = False
            for j in range(t + 1, m):
                if A[t][j]:
                    q = A[t][j] // A[t][t]
                    add_col(j, t, -q)
                    if A[t][j]:
                        swap_cols(t, j)
                        done = False
            if done:
                # divisibility of the remaining block
                for i in range(t + 1, n):
                    for j in range(t + 1, m):
                        if A[i][j] % A[t][t]:
                            add_row(t, i, 1)
                            done = False
                            break
                    if not done:
                        break
        if A[t][t] < 0:
            A[t] = [-x for x in A[t]]
            U[t] = [-x for x in U[t]]
        t += 1
    return A, U, V


def snf_invariants(M) -> list[int]:
    D, _, _ = smith_normal_form(M)
    k = min(len(D), len(D[0]) if D else 0)
    return [D[i][i] for i in range(k)]


def int_mat_mul(A, B):
    return [[sum(a * b for a, b in zip(r, c)) for c in zip(*B)] for r in A]


def int_det(M) -> int:
    """Exact determinant by fraction-free elimination (Bareiss)."""
    A = [[int(x) for x in r] for r in M]
    n = len(A)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if A[k][k] == 0:
            sw = next((i for i in range(k + 1, n) if A[i][k]), None)
            if sw is None:
                return 0
            A[k], A[sw] = A[sw], A[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                A[i][j] = (A[i][j] * A[k][k] - A[i][k] * A[k][j]) // prev
        prev = A[k][k]
    return sign * A[n - 1][n - 1]


def int_mat_inverse(M) -> list[list[int]]:
    """Inverse of a unimodular integer matrix."""
    n = len(M)
    A = [[Fraction(x) for x in r] + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(M)]
    for c in range(n):
        sel = next(i for i in range(c, n) if A[i][c] != 0)
        A[c], A[sel] = A[sel], A[c]
        inv = 1 / A[c][c]
        A[c] = [x * inv for x in A[c]]
        for i in range(n):
            if i != c and A[i][c] != 0:
                f = A[i][c]
                A[i] = [x - f * y for x, y in zip(A[i], A[c])]
    out = [[x for x in r[n:]] for r in A]
    if any(x.denominator != 1 for r in out for x in r):
        raise AlgebraError("matrix is not unimodular")
    return [[int(x) for x in r] for r in out]


def hnf_rows(B: Sequence[Sequence[int]]) -> list[list[int]]:
    """Row Hermite normal form (nonzero rows) of an integer matrix."""
    A = [[int(x) for x in r] for r in B if any(r)]
    if not A:
        return []
    m = len(A[0])
    out = []
    r = 0
    for c in range(m):
        rows_c = [i for i in range(r, len(A)) if A[i][c]]
        if not rows_c:
            continue
        while True:
            rows_c = [i for i in range(r, len(A)) if A[i][c]]
            piv = min(rows_c, key=lambda i: abs(A[i][c]))
            A[r], A[piv] = A[piv], A[r]
            again = False
            for i in range(r + 1, len(A)):
                if A[i][c]:
                    q = A[i][c] // A[r][c]
                    A[i] = [a - q * b for a, b in zip(A[i], A[r])]
                    if A[i][c]:
                        again = True
            if not again:
                break
        if A[r][c] < 0:
            A[r] = [-x for x in A[r]]
        for i in range(r):
            q = A[i][c] // A[r][c]
            A[i] = [a - q * b for a, b in zip(A[i], A[r])]
        r += 1
        if r == len(A):
            break
    out = [row for row in A[:r] if any(row)]
    return out


def integer_kernel(B: Sequence[Sequence[int]]) -> list[list[int]]:
    """Basis (rows) of {u in Z^n : u*B = 0} for an n x m integer matrix B."""
    n = len(B)
    if n == 0:
        return []
    D, U, _ = smith_normal_form(B)
    m = len(B[0])
    rank = sum(1 for i in range(min(n, m)) if D[i][i] != 0)
    return hnf_rows([U[i] for i in range(rank, n)])


# ---------------------------------------------------------------------------
# lattices

@dataclass
class IntLattice:
    """Lattice spanned by integer row vectors."""

    basis: list[list[int]]

    def __post_init__(self):
        self.basis = [[int(x) for x in b] for b in self.basis]
        if self.basis:
            n = len(self.basis[0])
            if any(len(b) != n for b in self.basis):
                raise AlgebraError("basis vectors of unequal length")
            if _rank_q(self.basis) != len(self.basis):
                raise AlgebraError("basis vectors are linearly dependent")

    @property
    def dimension(self) -> int:
        return len(self.basis)

    @property
    def ambient(self) -> int:
        return len(self.basis[0]) if self.basis else 0


def _rank_q(B) -> int:
    R, piv = rref_generic(FieldMatrix(QQ, [[Fraction(x) for x in r] for r in B]))
    return len(piv)


def _dot(a, b):
    return sum(x * y for x, y in zip(a, b))


def _gram_schmidt(B):
    n = len(B)
    Bs = []
    mu = [[Fraction(0)] * n for _ in range(n)]
    norms = []
    for i in range(n):
        v = [Fraction(x) for x in B[i]]
        for j in range(i):
            mu[i][j] = _dot(B[i], Bs[j]) / norms[j]
            v = [a - mu[i][j] * b for a, b in zip(v, Bs[j])]
        Bs.append(v)
        norms.append(_dot(v, v))
    return Bs, mu, norms


def lll_reduce(L: IntLattice | Sequence[Sequence[int]], delta: Fraction = Fraction(3, 4)) -> list[list[int]]:
    """LLL-reduced basis (exact rational arithmetic, delta = 3/4 default)."""
    if not isinstance(L, IntLattice):
        L = IntLattice([list(r) for r in L])
    B = [list(b) for b in L.basis]
    n = len(B)
    if n == 0:
        return []
    Bs, mu, norms = _gram_schmidt(B)
    k = 1
    while k < n:
        for j in range(k - 1, -1, -1):
            q = round(mu[k][j])
            if q:
                B[k] = [a - q * b for a, b in zip(B[k], B[j])]
                Bs, mu, norms = _gram_schmidt(B)
        if norms[k] >= (delta - mu[k][k - 1] ** 2) * norms[k - 1]:
            k += 1
        else:
            B[k], B[k - 1] = B[k - 1], B[k]
            Bs, mu, norms = _gram_schmidt(B)
            k = max(k - 1, 1)
    return B


def is_lll_reduced(B, delta: Fraction = Fraction(3, 4)) -> bool:
    _, mu, norms = _gram_schmidt(B)
    n = len(B)
    for i in range(n):
        for j in range(i):
            if abs(mu[i][j]) > Fraction(1, 2):
                return False
    return all(norms[k] >= (delta - mu[k][k - 1] ** 2) * norms[k - 1] for k in range(1, n))


def coset_small_vectors(H: IntLattice | Sequence[Sequence[int]], w: Sequence[int], bound: int,
                        cap: int = 10 ** 6) -> list[list[int]]:
    """All v in w + H with max-norm at most bound, sorted by (norm^2, v)."""
    if not isinstance(H, IntLattice):
        H = IntLattice([list(r) for r in H])
    w = [int(x) for x in w]
    if H.basis and len(w) != H.ambient:
        raise AlgebraError("offset and lattice dimensions differ")
    dim = len(w)
    B = lll_reduce(H) if H.basis else []
    m = len(B)
    radius2 = Fraction(dim * bound * bound)
    if m == 0:
        return [w] if max((abs(x) for x in w), default=0) <= bound else []
    Bs, mu, norms = _gram_schmidt(B)
    # w = sum y_i b*_i + w_perp
    y = [_dot(w, Bs[i]) / norms[i] for i in range(m)]
    perp = [Fraction(x) for x in w]
    for i in range(m):
        perp = [a - y[i] * b for a, b in zip(perp, Bs[i])]
    base = _dot(perp, perp)
    if base > radius2:
        return []
    out = []
    visited = 0
    c = [0] * m

    def rec(i, partial):
        nonlocal visited
        visited += 1
        if visited > cap:
            raise BudgetExceeded("coset enumeration exceeded candidate cap")
        if i < 0:
            v = [wi + sum(c[j] * B[j][t] for j in range(m)) for t, wi in enumerate(w)]
            if max(abs(x) for x in v) <= bound:
                out.append(v)
            return
        centre = -(y[i] + sum(mu[j][i] * c[j] for j in range(i + 1, m)))
        rem = radius2 - partial
        if rem < 0:
            return
        span = math.isqrt(int(rem / norms[i]) + 1) + 1
        lo = math.floor(centre) - span
        hi = math.ceil(centre) + span
        for ci in range(lo, hi + 1):
            d = (ci - centre) ** 2 * norms[i]
            if partial + d <= radius2:
                c[i] = ci
                rec(i - 1, partial + d)
        c[i] = 0

    rec(m - 1, base)
    out.sort(key=lambda v: (_dot(v, v), v))
    return out


# ---------------------------------------------------------------------------
# finite abelian groups

@dataclass(frozen=True)
class FinAbGroup:
    """Z^rank + Z/d1 + ... + Z/dm with d1 | d2 | ... and each di >= 2."""

    rank: int = 0
    torsion: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        t = tuple(int(d) for d in self.torsion)
        if any(d < 2 for d in t):
            raise AlgebraError("torsion invariants must be >= 2")
        if any(t[i + 1] % t[i] for i in range(len(t) - 1)):
            raise AlgebraError("invariants must form a divisibility chain")
        object.__setattr__(self, "torsion", t)

    @classmethod
    def from_invariants(cls, ds: Iterable[int], rank: int = 0) -> "FinAbGroup":
        """Normalise arbitrary cyclic factors into invariant-factor form."""
        prim: dict[int, list[int]] = {}
        for d in ds:
            d = int(d)
            if d == 0:
                rank += 1
                continue
            for l, e in factorint(d).items() if d > 1 else []:
                prim.setdefault(l, []).append(l ** e)
        return cls(rank, _invariants_from_primary(prim))

    @classmethod
    def from_relations(cls, R: Sequence[Sequence[int]], ngens: int) -> "FinAbGroup":
        """Z^ngens modulo the row span of R."""
        if not R:
            return cls(ngens, ())
        inv = snf_invariants(R)
        inv = inv + [0] * (ngens - len(inv))
        return cls.from_invariants(inv)

    @property
    def order(self) -> int | float:
        if self.rank:
            return math.inf
        return math.prod(self.torsion)

    @property
    def exponent(self) -> int:
        return self.torsion[-1] if self.torsion else 1

    def primary(self) -> dict[int, list[int]]:
        out: dict[int, list[int]] = {}
        for d in self.torsion:
            for l, e in factorint(d).items():
                out.setdefault(l, []).append(e)
        return {l: sorted(es) for l, es in out.items()}

    def embeds_in(self, other: "FinAbGroup") -> bool:
        """Whether self is isomorphic to a subgroup of other (finite parts)."""
        a, b = self.primary(), other.primary()
        for l, es in a.items():
            fs = b.get(l, [])
            if len(es) > len(fs):
                return False
            if any(x > y for x, y in zip(sorted(es, reverse=True), sorted(fs, reverse=True))):
                return False
        return self.rank <= other.rank

    def __str__(self):
        parts = ["Z"] * self.rank + [f"Z/{d}" for d in self.torsion]
        return " x ".join(parts) if parts else "0"


def _invariants_from_primary(prim: dict[int, list[int]]) -> tuple[int, ...]:
    cols = max((len(v) for v in prim.values()), default=0)
    inv = [1] * cols
    for l, pows in prim.items():
        pows = sorted(pows)
        for i, q in enumerate(pows):
            inv[cols - len(pows) + i] *= q
    return tuple(d for d in inv if d > 1)
