"""Degree-zero Picard groups of curves over F_p.

A class x is stored as an effective divisor E of degree g with E ~ B + x,
where B is a fixed rational base divisor of degree g with h^0(B) = 1.  The
divisor E itself is kept implicitly through the spaces W_E(k) of sections of
R_k = H^0(kH) vanishing on E, so no factorisation of divisors is ever needed.
All group operations reduce to one primitive, ``_flip``, which given effective
S0 and T with deg T = deg S0 + g returns an effective E' ~ T - S0 of degree g.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .algebra import BudgetExceeded, FinAbGroup, factorint, rref_modp
from .curve import (CurveError, CurveModel, CurvePoint, EffDivisor, SectionRing, enumerate_points,
                    places, rr_basis)


class PicardError(ValueError):
    """Raised for inconsistent class arithmetic requests."""


# ---------------------------------------------------------------------------
# implicit divisors

class _DivW:
    """Effective divisor known through its vanishing spaces W(k)."""

    def __init__(self, jac: "Jacobian", degree: int):
        self.jac = jac
        self.degree = degree
        self._W: dict = {}

    def W(self, k: int) -> np.ndarray:
        if k not in self._W:
            self._W[k] = self._compute(k)
        return self._W[k]

    def _compute(self, k: int) -> np.ndarray:
        raise NotImplementedError

    def _down(self, k: int) -> np.ndarray:
        # R_1 has no base points, so W(k) = {s : s R_1 in W(k+1)}
        R = self.jac.ring
        return R.residual(k, np.eye(R.dim(1), dtype=np.int64), 1, self.W(k + 1))


class _Zero(_DivW):
    def __init__(self, jac):
        super().__init__(jac, 0)

    def _compute(self, k):
        return np.eye(self.jac.ring.dim(k), dtype=np.int64)


class _Points(_DivW):
    def __init__(self, jac, D: EffDivisor):
        super().__init__(jac, D.degree)
        self.divisor = D

    def _compute(self, k):
        return self.jac.ring.W(self.divisor, k)


class _Sum(_DivW):
    def __init__(self, jac, A: _DivW, B: _DivW):
        super().__init__(jac, A.degree + B.degree)
        self.A, self.B = A, B

    def _compute(self, k):
        R, g = self.jac.ring, self.jac.g
        a = R.level_for(self.A.degree, 2 * g + 1)
        b = k - a
        if b < 0 or b * R.h - self.B.degree < 2 * g:
            return self._down(k)
        return R.mul_spaces(self.A.W(a), a, self.B.W(b), b)


class _Residual(_DivW):
    """div(phi) + N - P for phi in R_L vanishing on P."""

    def __init__(self, jac, phi: np.ndarray, L: int, P: _DivW, N: _DivW):
        super().__init__(jac, L * jac.ring.h + N.degree - P.degree)
        self.phi, self.L, self.P, self.N = phi, L, P, N

    def _compute(self, k):
        R, g = self.jac.ring, self.jac.g
        b = max(R.level_for(self.P.degree, 2 * g), self.L - k)
        c = k + b - self.L
        V = R.mul_element(self.phi, self.L, self.N.W(c), c)
        return R.residual(k, self.P.W(b), b, V)


class _Stored(_DivW):
    """Materialised divisor: explicit spaces at a window of levels."""

    def __init__(self, jac, degree, spaces: dict):
        super().__init__(jac, degree)
        self._W.update(spaces)
        self.top = max(spaces)

    def _compute(self, k):
        R = self.jac.ring
        if k > self.top:
            c = self.jac.span_step
            return R.mul_spaces(self.W(k - c), k - c, np.eye(R.dim(c), dtype=np.int64), c)
        return self._down(k)


# ---------------------------------------------------------------------------
# Jacobian context

@dataclass(frozen=True)
class WeilInterval:
    lower: int
    upper: int

    @classmethod
    def of(cls, q: int, g: int) -> "WeilInterval":
        r = math.isqrt(q)
        # exact integer bounds of (sqrt q -+ 1)^(2g) via binomial expansion in sqrt q
        lo = _weil_bound(q, g, -1)
        hi = _weil_bound(q, g, 1)
        return cls(lo, hi)

    @property
    def width(self) -> int:
        return self.upper - self.lower


def _weil_bound(q: int, g: int, sign: int) -> int:
    """ceil((sqrt q - 1)^(2g)) for sign -1, floor((sqrt q + 1)^(2g)) for sign +1."""
    from fractions import Fraction
    n = 2 * g
    # (sqrt q + s)^n = A + B sqrt q with integers A, B
    A = sum(math.comb(n, i) * q ** (i // 2) * sign ** (n - i) for i in range(0, n + 1, 2))
    B = sum(math.comb(n, i) * q ** (i // 2) * sign ** (n - i) for i in range(1, n + 1, 2))
    # value = A + B*sqrt(q); compute floor exactly
    if B >= 0:
        fl = A + math.isqrt(B * B * q)
    else:
        t = math.isqrt(B * B * q)
        fl = A - t - (0 if t * t == B * B * q else 1)
    exact = (B == 0) or (math.isqrt(B * B * q) ** 2 == B * B * q)
    if sign > 0:
        return fl
    return fl if exact else fl + 1


class Jacobian:
    """J(F_p) for a smooth model over a prime field."""

    def __init__(self, model: CurveModel, base: EffDivisor | None = None, seed: int = 0):
        if model.field.characteristic == 0:
            raise PicardError("Picard groups are computed over finite fields")
        self.model = model
        self.g = model.genus
        self.p = model.p
        self.ring = SectionRing(model)
        R = self.ring
        self.k_s = R.level_for(self.g, 2 * self.g + 1)
        self.span_step = max(1, -(-2 * self.g // R.h))
        self.k_K = 1 if model.kind == "ci" else self.g - 1
        self.zero_div = _Zero(self)
        self._places = {}
        self.seed = seed
        self.base_divisor = base if base is not None else self._choose_base()
        self.base = self._materialise(_Points(self, self.base_divisor))
        if self.h0(self.base) != 1:
            raise PicardError("base divisor must satisfy h^0 = 1")
        self.base_key = self._raw_key(self.base)
        self.ops = 0

    # places and base divisor
    def places(self, d: int) -> list[CurvePoint]:
        if d not in self._places:
            self._places[d] = places(self.model, d)
        return self._places[d]

    def _choose_base(self) -> EffDivisor:
        g = self.g
        pool = [(P, 1) for P in self.places(1)]
        d = 2
        while sum(P.degree for P, _ in pool) < 3 * g and d <= 4:
            pool += [(P, 1) for P in self.places(d)]
            d += 1
        rng = random.Random(12345)
        for attempt in range(200):
            chosen, deg = [], 0
            cands = list(pool) if attempt == 0 else rng.sample(pool, len(pool))
            for P, _ in cands:
                if deg + P.degree <= g:
                    chosen.append((P, 1))
                    deg += P.degree
                if deg == g:
                    break
            if deg != g:
                continue
            D = EffDivisor.from_points(chosen)
            if self.ring.W(D, self.k_K).shape[0] == 0:
                return D
        raise PicardError("no base divisor with h^0 = 1 found")

    # helpers
    def _materialise(self, D: _DivW) -> _Stored:
        levels = {k: D.W(k) for k in range(self.k_s, self.k_s + self.span_step)}
        return _Stored(self, D.degree, levels)

    def h0(self, D: _DivW) -> int:
        if self.k_K < 0:
            return 1
        return 1 + D.W(self.k_K).shape[0] if D.degree == self.g else -1

    def _raw_key(self, D: _DivW) -> bytes:
        return np.ascontiguousarray(D.W(self.k_s)).tobytes()

    def _flip(self, S0: _DivW, T: _DivW) -> _Stored:
        if T.degree != S0.degree + self.g:
            raise PicardError("flip needs deg T = deg S0 + g")
        R, g = self.ring, self.g
        self.ops += 1
        L = R.level_for(T.degree, 2 * g - 1)
        WT = T.W(L)
        if WT.shape[0] == 0:
            raise PicardError("no section vanishing on T")
        phi = WT[0]
        S = _Residual(self, phi, L, T, S0)
        WS = S.W(L)
        if WS.shape[0] == 0:
            raise PicardError("residual space is empty")
        f = WS[0]
        return self._materialise(_Residual(self, f, L, S, self.zero_div))

    # class constructors
    def zero(self) -> "DivisorClass":
        return DivisorClass(self, self.base)

    def from_effective(self, E: EffDivisor) -> "DivisorClass":
        """[E - B] for an effective rational E of degree g."""
        if E.degree != self.g:
            raise PicardError("representative must have degree g")
        return DivisorClass(self, self._materialise(_Points(self, E)))

    def from_divisor(self, Dplus: EffDivisor, Dminus: EffDivisor | None = None) -> "DivisorClass":
        """[D+ - D-] for effective D+, D- of equal degree."""
        Dminus = Dminus or EffDivisor(())
        if Dplus.degree != Dminus.degree:
            raise PicardError("divisor must have degree zero")
        T = _Sum(self, _Points(self, Dplus), self.base)
        return DivisorClass(self, self._flip(_Points(self, Dminus), T))

    def random_class(self, rng: random.Random, max_place_degree: int = 2) -> "DivisorClass":
        pool = []
        for d in range(1, max_place_degree + 1):
            pool += self.places(d)
        if not pool:
            raise PicardError("no places available for sampling")
        while True:
            chosen, deg = [], 0
            while deg < self.g:
                P = rng.choice(pool)
                if deg + P.degree <= self.g:
                    chosen.append((P, 1))
                    deg += P.degree
                elif all(Q.degree > self.g - deg for Q in pool):
                    break
            if deg == self.g:
                return self.from_effective(EffDivisor.from_points(chosen))

    @property
    def weil(self) -> WeilInterval:
        return WeilInterval.of(self.p, self.g)

    # operations on stored representatives
    def sub(self, x: "DivisorClass", y: "DivisorClass") -> "DivisorClass":
        return DivisorClass(self, self._flip(y.E, _Sum(self, x.E, self.base)))

    def neg(self, x: "DivisorClass") -> "DivisorClass":
        return DivisorClass(self, self._flip(x.E, _Sum(self, self.base, self.base)))

    def add(self, x: "DivisorClass", y: "DivisorClass") -> "DivisorClass":
        return self.sub(x, self.neg(y))

    def mul(self, n: int, x: "DivisorClass") -> "DivisorClass":
        if n < 0:
            return self.mul(-n, self.neg(x))
        result = self.zero()
        if n == 0:
            return result
        negx = self.neg(x)
        first = True
        for bit in bin(n)[2:]:
            if not first:
                result = self.add(result, result)
            if bit == "1":
                result = x if first else self.sub(result, negx)
            first = False
        return result

    def is_zero(self, x: "DivisorClass") -> bool:
        return self._raw_key(x.E) == self.base_key

    def key(self, x: "DivisorClass") -> tuple:
        """Canonical class key; shifts by fixed point differences when h^0(E) > 1."""
        if self.h0(x.E) == 1:
            return (0, self._raw_key(x.E))
        pts = self.places(1)
        if len(pts) < 2:
            raise PicardError("class key needs two rational points")
        P0 = _Points(self, EffDivisor.from_points([(pts[0], 1)]))
        for i, P in enumerate(pts[1:], start=1):
            Pi = _Points(self, EffDivisor.from_points([(P, 1)]))
            E = self._flip(P0, _Sum(self, x.E, Pi))
            if self.h0(E) == 1:
                return (i, self._raw_key(E))
        raise PicardError("no shift gives a unique representative")

    def equal(self, x: "DivisorClass", y: "DivisorClass") -> bool:
        return self.is_zero(self.sub(x, y))


@dataclass
class DivisorClass:
    """[E - B] with E effective of degree g (kept through its vanishing spaces)."""

    jac: Jacobian
    E: _DivW

    @property
    def representative(self) -> _DivW:
        return self.E

    @property
    def base(self) -> EffDivisor:
        return self.jac.base_divisor

    def __add__(self, o):
        return class_combine(self, o, "+")

    def __sub__(self, o):
        return class_combine(self, o, "-")

    def __neg__(self):
        return self.jac.neg(self)

    def __rmul__(self, n: int):
        return self.jac.mul(n, self)

    def __eq__(self, o):
        return isinstance(o, DivisorClass) and o.jac is self.jac and self.jac.equal(self, o)

    def __hash__(self):
        return hash(self.jac.key(self))


# ---------------------------------------------------------------------------
# public operations

def class_combine(c1: DivisorClass, c2: DivisorClass, sign: str = "+") -> DivisorClass:
    if c1.jac is not c2.jac:
        raise PicardError("classes live on different Jacobians")
    if sign == "+":
        return c1.jac.add(c1, c2)
    if sign == "-":
        return c1.jac.sub(c1, c2)
    raise PicardError("sign must be + or -")


def is_zero(c: DivisorClass) -> bool:
    return c.jac.is_zero(c)


def _strip_order(jac: Jacobian, x: DivisorClass, m: int) -> int:
    for l, e in factorint(m).items() if m > 1 else []:
        for _ in range(e):
            if m % l == 0 and jac.is_zero(jac.mul(m // l, x)):
                m //= l
            else:
                break
    return m


def _bsgs_multiple(jac: Jacobian, z: DivisorClass, lo: int, hi: int, cap: int) -> int | None:
    """Some c in [lo, hi] with c*z = 0, by baby-step giant-step."""
    if hi < lo:
        return None
    width = hi - lo + 1
    if width > cap:
        raise BudgetExceeded(f"search interval {width} exceeds cap {cap}")
    m = max(1, math.isqrt(width) + 1)
    baby = {}
    negz = jac.neg(z)
    cur = jac.zero()
    for j in range(m):
        k = jac.key(cur)
        baby.setdefault(k, j)
        cur = jac.sub(cur, negz)
    step = jac.mul(m, z)
    neg_step = jac.neg(step)
    # giant: lo*z + i*m*z = -(j*z) ... search g_i = -(lo + i m) z against baby j*z
    gcur = jac.neg(jac.mul(lo, z))
    for i in range(m + 1):
        j = baby.get(jac.key(gcur))
        if j is not None:
            c = lo + i * m + j
            if c <= hi + m:
                return c
        gcur = jac.sub(gcur, step)
    return None


def class_order(c: DivisorClass, known_multiple_of: int = 1, cap: int = 10 ** 8) -> int:
    """Exact order: BSGS for a multiple inside the Weil interval, then strip primes.

    ``known_multiple_of`` may be any integer dividing #J(F_p); the search then runs over
    its multiples only.
    """
    jac = c.jac
    if jac.is_zero(c):
        return 1
    W = jac.weil
    if W.upper > cap:
        raise BudgetExceeded(f"Weil bound {W.upper} exceeds cap {cap}")
    L = max(1, known_multiple_of)
    z = jac.mul(L, c)
    if jac.is_zero(z):
        return _strip_order(jac, c, L)
    lo, hi = -(-W.lower // L), W.upper // L
    m = _bsgs_multiple(jac, z, lo, hi, cap)
    if m is None:
        raise PicardError("no multiple of the order found in the Weil interval")
    return _strip_order(jac, c, L * m)


# ---------------------------------------------------------------------------
# zeta functions for genus <= 2

@dataclass(frozen=True)
class ZetaData:
    counts: tuple
    lpoly: tuple  # coefficients of L(T), constant term first
    order: int


def zeta_order(model: CurveModel, budget: int = 10 ** 7) -> ZetaData:
    g = model.genus
    if g > 2:
        raise PicardError("zeta_order supports genus at most 2")
    if model.field.characteristic == 0:
        raise PicardError("model must be over a finite field")
    p = model.p
    counts = tuple(len(enumerate_points(model, k, budget)) for k in range(1, g + 1))
    a = p + 1 - counts[0]
    if g == 1:
        L = (1, -a, p)
    else:
        s2 = p * p + 1 - counts[1]
        b = (a * a - s2) // 2
        if (a * a - s2) % 2:
            raise PicardError("inconsistent point counts")
        L = (1, -a, b, -p * a, p * p)
    return ZetaData(counts, L, sum(L))


def counts_from_lpoly(L: Sequence[int], p: int, n: int) -> list[int]:
    """#X(F_{p^k}) for k = 1..n from the L-polynomial via Newton sums of reciprocal roots."""
    g2 = len(L) - 1
    e = [(-1) ** i * L[i] for i in range(g2 + 1)]  # elementary symmetric functions
    s = [0] * (n + 1)
    for k in range(1, n + 1):
        acc = (-1) ** (k - 1) * k * e[k] if k <= g2 else 0
        for i in range(1, k):
            if i <= g2:
                acc += (-1) ** (i - 1) * e[i] * s[k - i]
        s[k] = acc
    return [p ** k + 1 - s[k] for k in range(1, n + 1)]


# ---------------------------------------------------------------------------
# group structure

@dataclass
class GroupStructure:
    group: FinAbGroup
    generators: list
    certified: str  # "exact" or "lower_bound"
    exponent: int
    sampled_orders: list = field(default_factory=list)

    @property
    def invariants(self) -> tuple:
        return self.group.torsion


def _closure(jac: Jacobian, gens: Sequence[DivisorClass], limit: int = 10 ** 5):
    """All elements of the subgroup generated by gens (keys to classes)."""
    zero = jac.zero()
    elems = {jac.key(zero): zero}
    frontier = [zero]
    while frontier:
        nxt = []
        for x in frontier:
            for gg in gens:
                y = jac.add(x, gg)
                k = jac.key(y)
                if k not in elems:
                    elems[k] = y
                    nxt.append(y)
                    if len(elems) > limit:
                        raise BudgetExceeded("subgroup enumeration exceeds limit")
        frontier = nxt
    return elems


def _primary_structure(jac, gens, l):
    """Invariants (exponents of l) and generators of the l-group generated by gens."""
    elems = _closure(jac, gens)
    order_of = {}
    for k, x in elems.items():
        e, y = 0, x
        while not jac.is_zero(y):
            y = jac.mul(l, y)
            e += 1
        order_of[k] = e
    n = len(elems)
    emax = max(order_of.values(), default=0)
    # number of invariants >= l^i from |G[l^i]|
    sizes = [sum(1 for v in order_of.values() if v <= i) for i in range(emax + 1)]
    exps = []
    for i in range(1, emax + 1):
        r = round(math.log(sizes[i] // sizes[i - 1], l)) if sizes[i] > sizes[i - 1] else 0
        exps.append(r)
    invariants = []
    for i in range(1, emax + 1):
        cnt = exps[i - 1] - (exps[i] if i < emax else 0)
        invariants += [i] * cnt
    invariants.sort(reverse=True)
    # greedy generators realising the invariants
    chosen, sub = [], {jac.key(jac.zero())}
    for e in invariants:
        for k, x in sorted(elems.items(), key=lambda kv: kv[0]):
            if order_of[k] != e:
                continue
            multiples = {}
            y = jac.zero()
            ok = True
            for t in range(1, l ** e):
                y = jac.add(y, x)
                if jac.key(y) in sub:
                    ok = False
                    break
            if not ok:
                continue
            new = _closure(jac, [c for c in chosen] + [x])
            if len(new) == len(sub) * l ** e:
                chosen.append(x)
                sub = set(new)
                break
    if len(sub) != n:
        raise PicardError("failed to split the primary subgroup")
    return invariants, chosen


def _structure_from_generators(jac, gens, orders):
    exponent = 1
    for o in orders:
        exponent = math.lcm(exponent, o)
    per_l = {}
    for l in sorted(factorint(exponent)) if exponent > 1 else []:
        lparts = []
        for x, o in zip(gens, orders):
            v = 0
            while o % l == 0:
                o //= l
                v += 1
            if v:
                lparts.append(jac.mul(o, x))
        per_l[l] = _primary_structure(jac, lparts, l)
    width = max((len(inv) for inv, _ in per_l.values()), default=0)
    invariants = [1] * width
    generators = [jac.zero() for _ in range(width)]
    for l, (inv, chosen) in per_l.items():
        for i, (e, x) in enumerate(zip(inv, chosen)):
            invariants[i] *= l ** e
            generators[i] = jac.add(generators[i], x)
    pairs = sorted(zip(invariants, range(width)))
    invariants = [d for d, _ in pairs]
    generators = [generators[i] for _, i in pairs]
    return FinAbGroup(0, tuple(invariants)), generators, exponent


def group_structure(jac: Jacobian, order_hint: int | None = None, mode: str = "exact",
                    samples: int = 8, seed: int = 1, max_place_degree: int = 2) -> GroupStructure:
    """Structure of J(F_p).

    ``exact``: generate by all differences of places of degree <= 2 and enumerate; the
    result is compared with the known order (hint or zeta for genus <= 2).
    ``sample``: deterministic random classes, orders by BSGS, and the certified
    subgroup they generate.
    """
    rng = random.Random(seed)
    if mode == "exact":
        order = order_hint
        if order is None:
            if jac.g > 2:
                raise PicardError("exact mode needs an order hint above genus 2")
            order = zeta_order(jac.model).order
        gens = []
        base_pts = jac.places(1)
        for d in (1, 2):
            for P in jac.places(d):
                if d == 1 and base_pts and P == base_pts[0]:
                    continue
                D = EffDivisor.from_points([(P, 1)])
                if d == 1:
                    gens.append(jac.from_divisor(D, EffDivisor.from_points([(base_pts[0], 1)])))
                elif base_pts:
                    gens.append(jac.from_divisor(D, EffDivisor.from_points([(base_pts[0], 2)])))
        gens.append(jac.random_class(rng, max_place_degree))
        orders = [class_order(x, cap=10 ** 8) for x in gens]
        grp, generators, exponent = _structure_from_generators(jac, gens, orders)
        if grp.order != order:
            raise PicardError(f"generated subgroup has order {grp.order}, expected {order}")
        return GroupStructure(grp, generators, "exact", exponent, orders)
    if mode != "sample":
        raise PicardError("mode must be exact or sample")
    gens, orders, L = [], [], 1
    for _ in range(samples):
        x = jac.random_class(rng, max_place_degree)
        o = class_order(x, known_multiple_of=L if L > 1 else 1)
        gens.append(x)
        orders.append(o)
        L = math.lcm(L, o)
    if order_hint is not None and any(order_hint % o for o in orders):
        raise PicardError("sampled order does not divide the order hint")
    grp, generators, exponent = _structure_from_generators(jac, gens, orders)
    return GroupStructure(grp, generators, "lower_bound", exponent, orders)


def torsion_bound(structures: Sequence, primes: Sequence[int] | None = None) -> FinAbGroup:
    """Meet of primary invariant profiles; rational torsion injects into the result.

    ``structures`` are FinAbGroup or GroupStructure values; ``primes`` are the
    corresponding residue characteristics, whose own primary part is discarded.
    """
    groups = [s.group if isinstance(s, GroupStructure) else s for s in structures]
    if not groups:
        raise PicardError("torsion_bound needs at least one structure")
    primes = list(primes) if primes is not None else [None] * len(groups)
    profiles = []
    for G, p in zip(groups, primes):
        prof = {l: sorted(es, reverse=True) for l, es in G.primary().items() if l != p}
        profiles.append(prof)
    common = set(profiles[0])
    for prof in profiles[1:]:
        common &= set(prof)
    factors = []
    for l in common:
        lists = [prof[l] for prof in profiles]
        width = min(len(x) for x in lists)
        for i in range(width):
            factors.append(l ** min(x[i] for x in lists))
    return FinAbGroup.from_invariants(factors)


# ---------------------------------------------------------------------------
# brute-force oracle for small genus

def brute_force_class_count(model: CurveModel) -> int:
    """#Pic^g(F_p) by grouping effective degree-g divisors under linear equivalence,
    decided through Riemann-Roch spaces (independent of the flip arithmetic)."""
    g = model.genus
    pl = {d: places(model, d) for d in range(1, g + 1)}
    divisors = []

    def rec(d_left, start, acc):
        if d_left == 0:
            divisors.append(EffDivisor.from_points([(P, 1) for P in acc]))
            return
        flat = [(d, P) for d in range(1, g + 1) for P in pl[d]]
        for i in range(start, len(flat)):
            d, P = flat[i]
            if d <= d_left:
                rec(d_left - d, i, acc + [P])

    rec(g, 0, [])
    R = SectionRing(model)
    parent = list(range(len(divisors)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(divisors)):
        for j in range(i + 1, len(divisors)):
            if find(i) == find(j):
                continue
            if rr_basis(model, divisors[i], divisors[j], ring=R).dimension >= 1:
                parent[find(j)] = find(i)
    return len({find(i) for i in range(len(divisors))})
