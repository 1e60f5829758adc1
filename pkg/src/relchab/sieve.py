"""Mordell-Weil sieve for symmetric powers with residue-disc certificates.

Group elements of the abstract group A = Z^r + sum Z/d_j are integer vectors in
Z^n (n = r + number of torsion factors).  Subgroups of finite index containing
the relation lattice are kept as full-rank row-HNF bases; cosets are canonical
vectors reduced against such a basis.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .algebra import (BudgetExceeded, FinAbGroup, GF, QQ, ext_field_build, coset_small_vectors, hnf_rows,
                      int_det, integer_kernel, poly_factor, poly_roots, rref_modp)
from .chabauty import (AnnihilatorSpace, CriterionReport, ResidueConfiguration, annihilator_space,
                       first_order_check, higher_order_check)
from .curve import CurveModel, CurvePoint, EffDivisor, apply_matrix, is_fixed, reduce_mod_p
from .picard import DivisorClass, Jacobian


class SieveError(ValueError):
    """Inconsistent sieve input."""


# ---------------------------------------------------------------------------
# algebraic points and their reductions

@dataclass(frozen=True)
class AlgebraicPoint:
    """Projective point whose coordinates are polynomials (low degree first) in a root a
    of the monic integer polynomial ``minpoly``; rational when ``minpoly`` is empty."""

    coords: tuple
    minpoly: tuple = ()
    label: str = ""

    @classmethod
    def rational(cls, coords: Sequence, label: str = "") -> "AlgebraicPoint":
        return cls(tuple((Fraction(c),) for c in coords), (), label)

    @property
    def degree(self) -> int:
        return len(self.minpoly) - 1 if self.minpoly else 1

    def discriminant(self) -> int:
        """Discriminant of the minimal polynomial (1 for rational points)."""
        if not self.minpoly:
            return 1
        f = [int(c) for c in self.minpoly]
        n = len(f) - 1
        df = [i * f[i] for i in range(1, n + 1)]
        return (-1) ** (n * (n - 1) // 2) * _resultant(f, df) // f[-1]

    def rational_point(self, model: CurveModel) -> CurvePoint:
        if self.minpoly:
            raise SieveError("point is not rational")
        return CurvePoint.make(model, [Fraction(c[0]) for c in self.coords], QQ)

    def evaluate(self, F, alpha):
        out = []
        for c in self.coords:
            acc = F.zero
            for coef in reversed(c):
                acc = F.add(F.mul(acc, alpha), F.from_fraction(Fraction(coef)))
            out.append(acc)
        return out

    def reduce(self, model_p: CurveModel) -> list:
        """Closed points (normalised to their own residue field) with multiplicities."""
        p = model_p.p
        Fp = model_p.field
        if not self.minpoly:
            coords = [Fp.from_fraction(Fraction(c[0])) for c in self.coords]
            return [(_make_point(model_p, coords, Fp, self), 1)]
        f = [int(c) % p for c in self.minpoly]
        out = []
        for fac, mult in poly_factor(f, Fp):
            d = len(fac) - 1
            Fd = ext_field_build(p, d)
            roots = poly_roots([int(c) for c in fac], Fd)
            if not roots:
                raise SieveError("factor has no root in its splitting field")
            P = _make_point(model_p, self.evaluate(Fd, roots[0]), Fd, self)
            P = normalise_point(model_p, P)
            out.append((P, mult * d // P.degree))
        return out


def _make_point(model_p, coords, F, src):
    if all(F.is_zero(x) for x in coords):
        raise SieveError(f"point {src.label or src.coords} reduces to the zero vector")
    P = CurvePoint.make(model_p, coords, F)
    if not model_p.contains(P):
        raise SieveError(f"reduction of {src.label or 'point'} is not on the reduced model")
    return P


def _resultant(f: Sequence[int], g: Sequence[int]) -> int:
    """Sylvester resultant of two integer polynomials given low degree first."""
    m, n = len(f) - 1, len(g) - 1
    size = m + n
    rows = []
    for i in range(n):
        rows.append([0] * i + list(reversed(f)) + [0] * (size - m - 1 - i))
    for i in range(m):
        rows.append([0] * i + list(reversed(g)) + [0] * (size - n - 1 - i))
    return int_det(rows)


_SUBFIELD_CACHE: dict = {}


def _subfield_basis(F_big: GF, d: int):
    """Images of 1, b, .., b^(d-1) in F_big for a root b of F_{p^d}'s modulus."""
    key = (F_big.p, F_big.k, d)
    if key not in _SUBFIELD_CACHE:
        Fd = ext_field_build(F_big.p, d)
        beta = poly_roots(list(Fd.modulus), F_big)[0] if d > 1 else 1
        powers = [F_big.pow(beta, i) for i in range(d)]
        _SUBFIELD_CACHE[key] = (Fd, powers)
    return _SUBFIELD_CACHE[key]


def embed_element(F_big: GF, Fd: GF, x: int) -> int:
    _, powers = _subfield_basis(F_big, Fd.k)
    acc = F_big.zero
    for c, b in zip(Fd.to_vec(x), powers):
        if c:
            acc = F_big.add(acc, F_big.mul(F_big.from_int(c), b))
    return acc


def _restrict_element(F_big: GF, d: int, x: int) -> int:
    Fd, powers = _subfield_basis(F_big, d)
    p = F_big.p
    M = np.array([F_big.to_vec(b) for b in powers] + [F_big.to_vec(x)], dtype=np.int64).T
    R, piv = rref_modp(M, p)
    if d in piv:
        raise SieveError("element does not lie in the subfield")
    coeffs = [0] * d
    for i, c in enumerate(piv):
        coeffs[c] = int(R[i, d])
    return Fd.from_vec(coeffs)


def normalise_point(model_p: CurveModel, P: CurvePoint) -> CurvePoint:
    """The same geometric point expressed over the field of its own degree."""
    F = P.field
    d = P.degree
    if not isinstance(F, GF) or F.k == d:
        return P
    Fd = ext_field_build(F.p, d)
    return CurvePoint.make(model_p, [_restrict_element(F, d, x) for x in P.coords], Fd)


def embed_point(model_p: CurveModel, P: CurvePoint, F_big: GF) -> CurvePoint:
    F = P.field
    if F is F_big or (isinstance(F, GF) and F.k == F_big.k):
        return P
    return CurvePoint.make(model_p, [embed_element(F_big, F, x) for x in P.coords], F_big)


def place_key(P: CurvePoint) -> tuple:
    F = P.field
    return (F.q if isinstance(F, GF) else 0, P.orbit_key())


def canonical_divisor(D: EffDivisor) -> tuple:
    return tuple(sorted((place_key(P), m) for P, m in D.places))


def reduce_divisor(model_p: CurveModel, parts: Sequence) -> EffDivisor:
    pts = []
    for ap, m in parts:
        for P, k in ap.reduce(model_p):
            pts.append((P, k * m))
    return EffDivisor.from_points(pts)


def divisor_str(D: EffDivisor) -> str:
    out = []
    for P, m in sorted(D.places, key=lambda t: place_key(t[0])):
        out.append(("" if m == 1 else f"{m}*") + f"[deg{P.degree}]{P}")
    return " + ".join(out) if out else "0"


def geometric_points(model_p: CurveModel, D: EffDivisor) -> tuple:
    """All geometric points of D (with multiplicities) over the compositum of its residue fields."""
    k = 1
    for P, _ in D.places:
        k = math.lcm(k, P.degree)
    F_big = ext_field_build(model_p.p, k)
    pts = []
    for P, m in sorted(D.places, key=lambda t: place_key(t[0])):
        Pb = embed_point(model_p, P, F_big)
        for Q in Pb.orbit():
            pts.append((Q, m))
    return F_big, pts


# ---------------------------------------------------------------------------
# problem description

@dataclass
class KnownPoint:
    """An element of the known list: fixed part plus a pullback of ``ell`` quotient points.

    With ``ell`` > 0 it stands for the whole family fixed + rho^*(C^(ell)(Q)); ``pulled``
    optionally records one member's pullback part.
    """

    label: str
    fixed: list
    ell: int = 0
    pulled: list = field(default_factory=list)
    N: int | None = None

    @property
    def degree(self) -> int:
        return sum(ap.degree * m for ap, m in self.fixed) + sum(ap.degree * m for ap, m in self.pulled)

    def ramification_bound(self, p: int) -> int:
        """Exact N when p is unramified in every coordinate field, else the declared or universal bound."""
        if self.N is not None:
            return self.N
        parts = self.fixed + self.pulled
        if all(ap.discriminant() % p for ap, _ in parts):
            base = 1
        elif all(ap.degree <= 2 for ap, _ in parts):
            base = 2
        else:
            n = sum(ap.degree * m for ap, m in self.fixed) + 2 * self.ell
            return n * (n - 1)
        # family members carry quadratic pullback points of unknown discriminant
        return max(base, 2) if self.ell else base


@dataclass
class SieveProblem:
    model: CurveModel
    W: list
    e: int
    D0: list  # (AlgebraicPoint, multiplicity)
    group: FinAbGroup
    generators: list  # (plus parts, minus parts) per basis element of A, free first
    index: int
    known: list
    primes: list
    quotient_generators: list = field(default_factory=list)  # pulled-back generators of C(Q)
    pullback_base: list = field(default_factory=list)  # rho^* of the quotient base point
    name: str = ""

    @property
    def ngens(self) -> int:
        return self.group.rank + len(self.group.torsion)

    def relations(self) -> list:
        n = self.ngens
        rows = []
        for j, d in enumerate(self.group.torsion):
            r = [0] * n
            r[self.group.rank + j] = d
            rows.append(r)
        return rows

    def validate(self) -> None:
        if len(self.generators) != self.ngens:
            raise SieveError("generator count differs from the group rank plus torsion factors")
        if sum(ap.degree * m for ap, m in self.D0) != self.e:
            raise SieveError("base divisor has the wrong degree")
        for kp in self.known:
            if kp.ell and not self.quotient_generators:
                raise SieveError("families need generators of the quotient's Mordell-Weil group")
        if self.index < 1:
            raise SieveError("index multiplier must be positive")


# ---------------------------------------------------------------------------
# lattice helpers

def canonical(v: Sequence[int], H: Sequence[Sequence[int]]) -> tuple:
    """Reduction of v modulo a full-rank upper-triangular HNF basis."""
    v = [int(x) for x in v]
    for i, row in enumerate(H):
        q = v[i] // row[i]
        if q:
            v = [a - q * b for a, b in zip(v, row)]
    return tuple(v)


def full_hnf(rows: Sequence[Sequence[int]], n: int) -> list:
    H = hnf_rows(rows)
    if len(H) != n or any(H[i][i] <= 0 for i in range(n)):
        raise SieveError("lattice does not have full rank")
    return H


def lattice_intersection(H1, H2) -> list:
    n = len(H1[0])
    B = [list(r) for r in H1] + [list(r) for r in H2]
    K = integer_kernel(B)
    rows = []
    for u in K:
        rows.append([sum(u[i] * H1[i][t] for i in range(len(H1))) for t in range(n)])
    return full_hnf(rows, n)


def lattice_index(H) -> int:
    return math.prod(H[i][i] for i in range(len(H)))


def coset_representatives(H_big, H_small, cap: int = 10 ** 7) -> list:
    """Canonical representatives of H_big / H_small."""
    n = len(H_big)
    if lattice_index(H_small) // lattice_index(H_big) > cap:
        raise BudgetExceeded("coset expansion exceeds the memory cap")
    zero = canonical([0] * n, H_small)
    seen = {zero}
    frontier = [zero]
    while frontier:
        nxt = []
        for v in frontier:
            for b in H_big:
                w = canonical([x + y for x, y in zip(v, b)], H_small)
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    return sorted(seen)


# ---------------------------------------------------------------------------
# per-prime data

@dataclass
class PrimeData:
    """phi_p as a kernel lattice plus a lookup table from class keys to coset vectors."""

    p: int
    kernel: list
    multiplier: int = 1
    model: CurveModel | None = None
    jac: Jacobian | None = None
    D0: EffDivisor | None = None
    table: dict = field(default_factory=dict)  # class key -> canonical vector mod kernel
    keys: dict = field(default_factory=dict)  # canonical vector -> class key
    classes: dict = field(default_factory=dict)  # canonical vector -> DivisorClass (multiplier 1)
    fibres: dict = field(default_factory=dict)  # canonical vector -> list of EffDivisor
    scanned: int | None = None  # divisors enumerated for ``fibres``; None until computed
    forgotten: tuple = ()
    seconds: float = 0.0

    @property
    def image_order(self) -> int:
        return lattice_index(self.kernel)


def _class_closure(jac: Jacobian, gens: Sequence[DivisorClass], n: int, cap: int):
    """Schreier closure of <gens>: class keys with coordinates and the relation lattice."""
    zero = jac.zero()
    k0 = jac.key(zero)
    coords = {k0: tuple([0] * n)}
    classes = {k0: zero}
    rels = []
    frontier = [k0]
    while frontier:
        nxt = []
        for k in frontier:
            s, c = classes[k], coords[k]
            for j, g in enumerate(gens):
                t = jac.add(s, g)
                kt = jac.key(t)
                cj = list(c)
                cj[j] += 1
                if kt in coords:
                    rel = [a - b for a, b in zip(cj, coords[kt])]
                    if any(rel):
                        rels.append(rel)
                else:
                    if len(coords) >= cap:
                        raise BudgetExceeded("image of the abstract group is too large")
                    coords[kt] = tuple(cj)
                    classes[kt] = t
                    nxt.append(kt)
        frontier = nxt
    return coords, classes, rels


def prime_data(problem: SieveProblem, p: int, cap: int = 10 ** 5, seed: int = 0) -> PrimeData:
    """Reduce the generators, compute ker(phi_p) and the image table at p."""
    t0 = time.time()
    Xp = reduce_mod_p(problem.model, p)
    jac = Jacobian(Xp, seed=seed)
    n = problem.ngens
    gens = []
    for plus, minus in problem.generators:
        gens.append(divisor_class(jac, Xp, plus, minus))
    for j, d in enumerate(problem.group.torsion):
        if not jac.is_zero(jac.mul(d, gens[problem.group.rank + j])):
            raise SieveError(f"torsion generator {j} does not have order dividing {d} at p={p}")
    coords, classes, rels = _class_closure(jac, gens, n, cap)
    K = full_hnf(rels + problem.relations(), n)
    pd = PrimeData(p, K, 1, Xp, jac, reduce_divisor(Xp, problem.D0))
    for k, c in coords.items():
        v = canonical(c, K)
        pd.table[k] = v
        pd.keys[v] = k
        pd.classes[v] = classes[k]
    pd.seconds = time.time() - t0
    return pd


def forget_factor(pd: PrimeData, r: int) -> PrimeData:
    """Compose phi_p and iota_p with multiplication by r."""
    n = len(pd.kernel)
    rI = [[r * int(i == j) for j in range(n)] for i in range(n)]
    meet = lattice_intersection(pd.kernel, rI)
    K2 = full_hnf([[x // r for x in row] for row in meet], n)
    new = PrimeData(pd.p, K2, pd.multiplier * r, pd.model, pd.jac, pd.D0,
                    forgotten=pd.forgotten + (r,))
    new.classes = pd.classes
    if pd.keys:
        for v, _ in pd.keys.items():
            target = canonical([r * x for x in v], pd.kernel)
            new.table[pd.keys[target]] = canonical(v, K2)
            new.keys[canonical(v, K2)] = pd.keys[target]
    return new


def effective_divisors(jac: Jacobian, e: int) -> Iterable[EffDivisor]:
    """All effective divisors of degree e over F_p (each exactly once)."""
    pool = []
    for d in range(1, e + 1):
        pool += [(P, d) for P in jac.places(d)]

    def rec(start, left, acc):
        if left == 0:
            yield EffDivisor.from_points(acc)
            return
        for i in range(start, len(pool)):
            P, d = pool[i]
            if d <= left:
                yield from rec(i, left - d, acc + [(P, 1)])

    yield from rec(0, e, [])


def divisor_class(jac: Jacobian, Xp: CurveModel, plus: Sequence, minus: Sequence) -> DivisorClass:
    """Class of reduce(plus) - reduce(minus); large multiplicities go through scalar multiplication."""
    Dp, Dm = reduce_divisor(Xp, plus), reduce_divisor(Xp, minus)
    if Dp.degree != Dm.degree:
        raise SieveError("divisor does not have degree zero")
    if max((m for _, m in Dp.places + Dm.places), default=0) <= 2:
        return jac.from_divisor(Dp, Dm)
    ref = next((P for P, _ in Dp.places + Dm.places if P.degree == 1), None) or jac.places(1)[0]
    total = jac.zero()
    for D, sign in ((Dp, 1), (Dm, -1)):
        for P, m in D.places:
            if P == ref:
                continue
            x = jac.from_divisor(EffDivisor.from_points([(P, 1)]), EffDivisor.from_points([(ref, P.degree)]))
            total = jac.add(total, jac.mul(sign * m, x))
    return total


def iota(pd: PrimeData, D: EffDivisor, index: int) -> DivisorClass:
    jac = pd.jac
    I = index
    plus = EffDivisor.from_points([(P, m * I) for P, m in D.places])
    minus = EffDivisor.from_points([(P, m * I) for P, m in pd.D0.places])
    x = jac.from_divisor(plus, minus)
    if pd.multiplier != 1:
        x = jac.mul(pd.multiplier, x)
    return x


# ---------------------------------------------------------------------------
# M_p

@dataclass
class MpSet:
    p: int
    elements: set
    witnesses: dict  # vector -> list of (divisor text, reason)
    reports: list = field(default_factory=list)  # (label, divisor text, CriterionReport)
    divisors_scanned: int = 0
    in_image: int = 0
    safe: int = 0
    seconds: float = 0.0


class _Classifier:
    """Decides whether a reduced divisor is explained by a known point with a passing criterion."""

    def __init__(self, problem: SieveProblem, pd: PrimeData, ann: AnnihilatorSpace):
        self.problem = problem
        self.pd = pd
        self.ann = ann
        Xp = pd.model
        self.isolated = {}
        self.families = []
        for kp in problem.known:
            fixed = reduce_divisor(Xp, kp.fixed)
            if kp.ell == 0:
                self.isolated.setdefault(canonical_divisor(fixed), []).append(kp)
            else:
                self.families.append((kp, fixed))
        self.cache = {}
        self._gamma = None
        self.reports = []

    def gamma(self):
        if self._gamma is None:
            pd, jac = self.pd, self.pd.jac
            gens = [jac.from_divisor(reduce_divisor(pd.model, pl), reduce_divisor(pd.model, mi))
                    for pl, mi in self.problem.quotient_generators]
            coords, _, _ = _class_closure(jac, gens, len(gens), 10 ** 5)
            self._gamma = set(coords)
        return self._gamma

    def classify(self, D: EffDivisor):
        key = canonical_divisor(D)
        for kp in self.isolated.get(key, []):
            rep = self._criterion(kp, D, EffDivisor(()), 0)
            if rep.passed:
                return True, f"known point {kp.label}, criterion pass"
        reasons = []
        for kp, fixed in self.families:
            rest = _subtract(D, fixed)
            if rest is None or not self._is_pullback(rest):
                continue
            if not self._in_gamma(rest, kp.ell):
                reasons.append(f"pullback part of {kp.label} not reduced from the quotient group")
                continue
            rep = self._criterion(kp, fixed, rest, kp.ell)
            if rep.passed:
                return True, f"family {kp.label}, criterion pass"
            reasons.append(f"family {kp.label}, criterion {rep.verdict}")
        if key in self.isolated:
            reasons.append("known point, criterion not satisfied")
        return False, "; ".join(reasons) if reasons else "not the reduction of a known point"

    def _is_pullback(self, D: EffDivisor) -> bool:
        Xp, W = self.pd.model, self.problem.W
        mult = {place_key(P): m for P, m in D.places}
        for P, m in D.places:
            Q = apply_matrix(P.field, W, P, Xp)
            if is_fixed(Xp, W, P):
                if m % 2:
                    return False
            elif mult.get(place_key(Q)) != m:
                return False
        return D.degree % 2 == 0

    def _in_gamma(self, D: EffDivisor, ell: int) -> bool:
        pd = self.pd
        base = reduce_divisor(pd.model, self.problem.pullback_base)
        if D.degree != ell * base.degree:
            return False
        minus = EffDivisor.from_points([(P, m * ell) for P, m in base.places])
        x = pd.jac.from_divisor(D, minus)
        return pd.jac.key(x) in self.gamma()

    def _criterion(self, kp: KnownPoint, fixed: EffDivisor, pulled: EffDivisor, ell: int) -> CriterionReport:
        ck = (kp.label, canonical_divisor(fixed), canonical_divisor(pulled))
        if ck in self.cache:
            return self.cache[ck]
        pd, p = self.pd, self.pd.p
        Xp = pd.model
        F, fpts = geometric_points(Xp, fixed + pulled)
        fixed_pts = geometric_points(Xp, fixed)[1] if fixed.places else []
        pulled_pts = geometric_points(Xp, pulled)[1] if pulled.places else []
        fixed_pts = [(embed_point(Xp, P, F), m) for P, m in fixed_pts]
        pulled_pts = [(embed_point(Xp, P, F), m) for P, m in pulled_pts]
        if not _reduction_injective(kp, Xp):
            rep = CriterionReport("first", "inapplicable", {"distinct_reductions": False}, p=p,
                                  notes=["distinct support points share a reduction"])
            self.cache[ck] = rep
            self.reports.append((kp.label, divisor_str(fixed + pulled), rep))
            return rep
        N = kp.ramification_bound(p)
        rational = None
        if ell == 0 and all(ap.degree == 1 for ap, _ in kp.fixed):
            rational = (self.problem.model, _merge([(ap.rational_point(self.problem.model), m)
                                                    for ap, m in kp.fixed]))
            fixed_pts = _merge([(P, m) for (ap, m) in kp.fixed for P, _ in ap.reduce(Xp)])
        cfg = ResidueConfiguration(Xp, self.problem.W, fixed=fixed_pts, pulled=pulled_pts, ell=ell,
                                   N=N, rational_support=rational, label=kp.label)
        rep = first_order_check(cfg, p, self.ann)
        if not rep.passed and ell == 0 and rational is not None and self.ann.dimension >= cfg.n:
            try:
                rep2 = higher_order_check(cfg, p, self.ann)
                if rep2.passed or rep.verdict == "inapplicable":
                    rep = rep2
            except BudgetExceeded:
                pass
        self.cache[ck] = rep
        self.reports.append((kp.label, divisor_str(fixed + pulled), rep))
        return rep


def _reduction_injective(kp: KnownPoint, Xp: CurveModel) -> bool:
    seen = set()
    for ap, _ in kp.fixed + kp.pulled:
        for P, k in ap.reduce(Xp):
            if k != 1 or place_key(P) in seen:
                return False
            seen.add(place_key(P))
    return True


def _merge(pts):
    acc, order = {}, []
    for P, m in pts:
        if P not in acc:
            order.append(P)
            acc[P] = 0
        acc[P] += m
    return [(P, acc[P]) for P in order]


def _subtract(D: EffDivisor, E: EffDivisor) -> EffDivisor | None:
    have = {place_key(P): (P, m) for P, m in D.places}
    for P, m in E.places:
        k = place_key(P)
        if k not in have or have[k][1] < m:
            return None
        have[k] = (have[k][0], have[k][1] - m)
    return EffDivisor.from_points([(P, m) for P, m in have.values() if m])


def build_Mp(problem: SieveProblem, pd: PrimeData, annihilators: AnnihilatorSpace | None = None,
             budget: int = 10 ** 7, log=None) -> MpSet:
    """Dangerous elements of red_p(G) meeting iota_p of the effective degree-e divisors."""
    t0 = time.time()
    ann = annihilators or annihilator_space(problem.model, [problem.W], pd.p)
    jac = pd.jac
    if pd.scanned is None:
        fibres: dict = {}
        count = 0
        for D in effective_divisors(jac, problem.e):
            count += 1
            if count > budget:
                raise BudgetExceeded("too many effective divisors")
            k = jac.key(iota(pd, D, problem.index))
            v = pd.table.get(k)
            if v is not None:
                fibres.setdefault(v, []).append(D)
            if log and count % 5000 == 0:
                log(f"p={pd.p} scanned={count} in_image={sum(len(x) for x in fibres.values())}")
        pd.fibres = fibres
        pd.scanned = count
    fibres, count = pd.fibres, pd.scanned
    cl = _Classifier(problem, pd, ann)
    Mp = MpSet(pd.p, set(), {}, divisors_scanned=count)
    for v in sorted(fibres):
        for D in fibres[v]:
            Mp.in_image += 1
            ok, reason = cl.classify(D)
            if ok:
                Mp.safe += 1
                continue
            Mp.elements.add(v)
            Mp.witnesses.setdefault(v, []).append((divisor_str(D), reason))
    Mp.reports = cl.reports
    Mp.seconds = time.time() - t0
    return Mp


# ---------------------------------------------------------------------------
# coset refinement

@dataclass
class CosetState:
    H: list  # full-rank HNF basis of H_i
    reps: list  # canonical coset representatives W_i

    @classmethod
    def initial(cls, n: int) -> "CosetState":
        return cls([[int(i == j) for j in range(n)] for i in range(n)], [tuple([0] * n)])

    @property
    def index(self) -> int:
        return lattice_index(self.H)


def refine(state: CosetState, pd: PrimeData, Mp: MpSet, cap: int = 10 ** 7) -> CosetState:
    """W_i: H_i-cosets inside the surviving H_(i-1)-cosets whose phi_p image lies in M_p."""
    if not Mp.elements or not state.reps:
        H = lattice_intersection(state.H, pd.kernel)
        return CosetState(H, [])
    H = lattice_intersection(state.H, pd.kernel)
    expand = coset_representatives(state.H, H, cap)
    if len(expand) * len(state.reps) > cap:
        raise BudgetExceeded("coset expansion exceeds the memory cap")
    out = set()
    for w in state.reps:
        for h in expand:
            v = canonical([a + b for a, b in zip(w, h)], H)
            if canonical(v, pd.kernel) in Mp.elements:
                out.add(v)
    return CosetState(H, sorted(out))


# ---------------------------------------------------------------------------
# driver

@dataclass
class SieveReport:
    outcome: str  # "empty" or "survivors"
    state: CosetState
    stats: list  # one dict per prime, deterministic
    log: list  # human-readable lines including timings
    mp_sets: list
    prime_data: list

    @property
    def success(self) -> bool:
        return self.outcome == "empty"


def run_sieve(problem: SieveProblem, primes: Sequence[int] | None = None, forget: dict | None = None,
              cap: int = 10 ** 7, budget: int = 10 ** 7, progress=None, cache: dict | None = None) -> SieveReport:
    """Refine cosets prime by prime; stops early once no coset survives.

    ``cache`` maps (p, forgotten factors) to PrimeData and is filled as primes are processed;
    the iota-fibres it stores do not depend on the known-point list, so reruns with a modified
    list reuse them.
    """
    problem.validate()
    primes = list(primes if primes is not None else problem.primes)
    state = CosetState.initial(problem.ngens)
    stats, log, mps, pds = [], [], [], []
    for p in primes:
        t0 = time.time()
        rs = tuple((forget or {}).get(p, []))
        pd = cache.get((p, rs)) if cache is not None else None
        if pd is None:
            pd = prime_data(problem, p)
            for r in rs:
                pd = forget_factor(pd, r)
            if cache is not None:
                cache[(p, rs)] = pd
        Mp = build_Mp(problem, pd, budget=budget, log=progress)
        state = refine(state, pd, Mp, cap)
        mps.append(Mp)
        pds.append(pd)
        st = {"prime": p, "image_order": pd.image_order, "forgotten": ",".join(map(str, pd.forgotten)) or "-",
              "divisors": Mp.divisors_scanned, "in_image": Mp.in_image, "safe": Mp.safe,
              "Mp": len(Mp.elements), "cosets": len(state.reps), "index": state.index}
        stats.append(st)
        log.append(" ".join(f"{k}={v}" for k, v in st.items()) + f" seconds={time.time() - t0:.1f}")
        if progress:
            progress(log[-1])
        if not state.reps:
            break
    return SieveReport("empty" if not state.reps else "survivors", state, stats, log, mps, pds)


@dataclass
class ProbeCandidate:
    vector: tuple
    fibres: dict  # p -> list of divisor texts


def probe_small_vectors(state: CosetState, bound: int, screens: Sequence[PrimeData],
                        cap: int = 10 ** 6) -> list:
    """Small vectors in surviving cosets whose image has nonempty iota-fibres at every screening prime."""
    out = []
    for w in state.reps:
        for v in coset_small_vectors(state.H, list(w), bound, cap):
            fib = {}
            for pd in screens:
                divs = pd.fibres.get(canonical(v, pd.kernel), [])
                if not divs:
                    break
                fib[pd.p] = [divisor_str(D) for D in divs]
            else:
                out.append(ProbeCandidate(tuple(v), fib))
    return out
