"""First- and higher-order symmetric Chabauty criteria relative to a degree-2 quotient.

Differentials on a canonical model are indexed by linear forms: the coefficient
vector l stands for omega_l (see ``curve.differential_expand``).  An involution
W acts on these vectors by l -> W^T l.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .algebra import (QQ, GF, BudgetExceeded, FieldMatrix, integer_kernel, mat_rank_kernel,
                      rank_modp, smith_normal_form)
from .curve import (CurveModel, CurvePoint, Differential, apply_matrix, change_uniformiser,
                    differential_expand, enumerate_points, expand_coordinates, reduce_mod_p)
from .series import TruncatedSeries


class ChabautyError(ValueError):
    """Raised for malformed configurations."""


# ---------------------------------------------------------------------------
# data types

@dataclass
class ResidueConfiguration:
    """Q = Q0 + rho^*(D) for the quotient by W, all points given over a residue field F.

    ``fixed`` lists (point, multiplicity) of Q0; ``pulled`` lists (point, multiplicity)
    of the pullback part, already expanded (a ramified point appears with even
    multiplicity 2*m, an unramified fibre as both points).  ``ell`` is deg D.
    """

    model: CurveModel  # reduced model over F_p
    W: list | None
    fixed: list = field(default_factory=list)
    pulled: list = field(default_factory=list)
    ell: int = 0
    N: int | None = None  # ramification of p in K(Q); None means use n(n-1)
    rational_support: list | None = None  # characteristic-zero points when all are rational
    label: str = ""

    @property
    def support(self) -> list:
        acc: dict = {}
        order = []
        for P, m in list(self.fixed) + list(self.pulled):
            if P not in acc:
                order.append(P)
                acc[P] = 0
            acc[P] += m
        return [(P, acc[P]) for P in order]

    @property
    def n(self) -> int:
        return sum(m for _, m in self.support)

    @property
    def lam(self) -> int:
        return self.ell

    @property
    def e(self) -> int:
        return sum(m for _, m in self.fixed)

    def pulled_points(self) -> set:
        return {P for P, _ in self.pulled}


@dataclass
class AnnihilatorSpace:
    """Integral basis of the trace-zero annihilating differentials and its reduction."""

    integral_basis: list  # rows of integers, saturated
    p: int
    reduced: np.ndarray
    quotient_genus: int | None = None

    @property
    def dimension(self) -> int:
        return len(self.integral_basis)

    def differentials(self) -> list[Differential]:
        return [Differential(tuple(r)) for r in self.integral_basis]


@dataclass
class VVector:
    """((-1)^(l-1) a_l, ..., (-1)^(k-2) a_(k-1)) for the expansion coefficients a."""

    entries: tuple
    start: int
    stop: int

    @classmethod
    def build(cls, F, coeffs: Sequence, start: int, stop: int) -> "VVector":
        if stop > len(coeffs):
            raise ChabautyError("expansion precision too small for the requested vector")
        out = []
        for m in range(start, stop):
            c = coeffs[m]
            out.append(F.neg(c) if (m - 1) % 2 else c)
        return cls(tuple(out), start, stop)


@dataclass
class CriterionReport:
    kind: str  # "first" or "higher"
    verdict: str  # pass, fail, inapplicable
    conditions: dict
    rank: int | None = None
    target: int | None = None
    matrices: dict = field(default_factory=dict)
    field_modulus: tuple = ()
    p: int = 0
    witness: tuple | None = None
    scanned: int = 0
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


# ---------------------------------------------------------------------------
# annihilators

def _as_fraction_matrix(W):
    return [[Fraction(x) for x in row] for row in W]


def _int_rows(M):
    """Scale each row of a rational matrix to integers."""
    out = []
    for row in M:
        d = 1
        for x in row:
            d = math.lcm(d, Fraction(x).denominator)
        out.append([int(Fraction(x) * d) for x in row])
    return out


def involution_sign(model: CurveModel, W, p: int) -> int:
    """Sign c such that c * W^T is the pullback action on linear-form vectors.

    A projective matrix fixes the map only up to sign; the sign is read off from
    local expansions at a point of the reduction mod p.
    """
    Xp = reduce_mod_p(model, p)
    for k in (1, 2):
        for P in enumerate_points(Xp, k):
            return pullback_sign(Xp, W, P)
    raise ChabautyError("no point available to calibrate the involution")


def annihilator_space(model: CurveModel, involutions: Sequence, p: int,
                      quotient_genus: int | None = None, calibrate: bool = True) -> AnnihilatorSpace:
    """Saturated integral basis of the common kernel of (1 + w^*) and its reduction mod p.

    With ``calibrate`` each matrix is first replaced by the sign that matches the true
    pullback; otherwise w^* l = W^T l is taken literally.
    """
    if model.kind != "ci":
        raise ChabautyError("annihilators are computed on canonical models")
    g = model.genus
    blocks = []
    for W in involutions:
        Wf = _as_fraction_matrix(W)
        if calibrate and len(Wf) == g and involution_sign(model, W, p) < 0:
            Wf = [[-x for x in row] for row in Wf]
        if len(Wf) != g or any(len(r) != g for r in Wf):
            raise ChabautyError("involution matrix has the wrong size")
        W2 = [[sum(Wf[i][k] * Wf[k][j] for k in range(g)) for j in range(g)] for i in range(g)]
        lam = W2[0][0]
        if lam == 0 or any(W2[i][j] != (lam if i == j else 0) for i in range(g) for j in range(g)):
            raise ChabautyError("matrix is not an involution up to scalar")
        if lam != 1:
            raise ChabautyError("involution must be normalised so that W^2 = I")
        # w^* l = W^T l; kernel of (I + W^T) as column vectors = rows u with u (I + W) = 0
        blocks.append([[Fraction(int(i == j)) + Wf[i][j] for j in range(g)] for i in range(g)])
    # stack columns: u M_1 = 0 and u M_2 = 0
    M = [sum((blk[i] for blk in blocks), []) for i in range(g)] if blocks else [[0] for _ in range(g)]
    Mint = _int_cols(M)
    basis = integer_kernel(Mint)
    red = np.array(basis, dtype=np.int64).reshape(len(basis), g) % p if basis else np.zeros((0, g), dtype=np.int64)
    if basis and rank_modp(red, p) != len(basis):
        raise ChabautyError("annihilator basis is not independent mod p")
    if quotient_genus is not None and len(basis) != g - quotient_genus:
        raise ChabautyError(f"annihilator dimension {len(basis)} differs from {g - quotient_genus}")
    return AnnihilatorSpace([list(map(int, r)) for r in basis], p, red, quotient_genus)


def _int_cols(M):
    """Scale columns of a rational matrix to integers (kernel of u M unchanged)."""
    rows, cols = len(M), len(M[0])
    out = [[0] * cols for _ in range(rows)]
    for j in range(cols):
        d = 1
        for i in range(rows):
            d = math.lcm(d, Fraction(M[i][j]).denominator)
        for i in range(rows):
            out[i][j] = int(Fraction(M[i][j]) * d)
    return out


def pullback_sign(model: CurveModel, W, P: CurvePoint, prec: int = 6) -> int:
    """The constant c with W^* omega_l = c * omega_(W^T l), measured by local expansions at P."""
    F = P.field
    g = model.genus
    Q = apply_matrix(F, W, P, model)
    eP = expand_coordinates(model, P, prec)
    eQ = expand_coordinates(model, Q, prec)
    Wf = [[model.field_elt(F, c) for c in row] for row in W]
    # coordinates of W(x(t)) and the uniformiser at Q in terms of t
    img = []
    for row in Wf:
        acc = None
        for w, s in zip(row, eP.series):
            term = s.scale(w)
            acc = term if acc is None else acc + term
        img.append(acc)
    tq = img[eQ.uvar] / img[eQ.chart] - eQ.centre
    ratios = set()
    for j in range(g):
        l = tuple(int(i == j) for i in range(g))
        aQ = differential_expand(model, Differential(l), eQ)
        pulled = change_uniformiser(aQ, tq)
        direct = differential_expand(model, Differential(tuple(W[j][i] for i in range(g))), eP)
        for a, b in zip(pulled.coeffs, direct.coeffs):
            if b != 0 or a != 0:
                if b == 0:
                    raise ChabautyError("pullback is not proportional to the transformed form")
                ratios.add(F.div(a, b))
                break
    if len(ratios) != 1:
        raise ChabautyError("inconsistent pullback constants")
    c = ratios.pop()
    if c == F.one:
        return 1
    if c == F.neg(F.one):
        return -1
    raise ChabautyError("pullback constant is not a sign")


# ---------------------------------------------------------------------------
# local data at support points

def _tau(F, coords, chart, L, centre):
    num = None
    for c, s in zip(L, coords):
        if not F.is_zero(c):
            num = s.scale(c) if num is None else num + s.scale(c)
    return num / coords[chart] - centre


def _dot(F, L, xs):
    acc = F.zero
    for c, x in zip(L, xs):
        acc = F.add(acc, F.mul(c, x))
    return acc


def _linear_forms(F, n):
    """x_u, then x_u + lam * x_w over the prime field: enough to avoid any two hyperplanes."""
    for u in range(n):
        yield tuple(F.one if i == u else F.zero for i in range(n))
    for u in range(n):
        for w in range(n):
            if w == u:
                continue
            for lam in range(1, F.characteristic):
                yield tuple(F.one if i == u else (F.from_int(lam) if i == w else F.zero) for i in range(n))


def _w_series(F, Wf, series):
    out = []
    for row in Wf:
        acc = TruncatedSeries.zero(F, series[0].prec)
        for w, s in zip(row, series):
            if not F.is_zero(w):
                acc = acc + s.scale(w)
        out.append(acc)
    return out


def fibre_uniformisers(model: CurveModel, W, fibre: Sequence[CurvePoint], prec: int) -> dict:
    """Shared pulled-back quotient uniformiser on a fibre {P, W(P)}.

    Returns P -> (e, t_in_s) where t_in_s expresses P's coordinate uniformiser in the
    root uniformiser s (s = u when unramified, s^2 = u when ramified) and u = tau * (tau o W)
    for one coordinate-ratio uniformiser tau at the first point, scaled by a common constant.
    """
    F = fibre[0].field
    P0 = fibre[0]
    Q0 = apply_matrix(F, W, P0, model)
    pts = [P0] if Q0 == P0 else [P0, Q0]
    if any(P not in pts for P in fibre):
        raise ChabautyError("points do not form one fibre of the quotient")
    Wf = [[model.field_elt(F, c) for c in row] for row in W]
    n = model.nvars
    exp0 = expand_coordinates(model, P0, 3)
    tau = None
    for ch in range(n):
        if any(F.is_zero(P.coords[ch]) for P in pts):
            continue
        for L in _linear_forms(F, n):
            c = F.div(_dot(F, L, P0.coords), P0.coords[ch])
            if len(pts) == 2 and F.is_zero(F.sub(F.div(_dot(F, L, Q0.coords), Q0.coords[ch]), c)):
                continue
            if _tau(F, exp0.series, ch, L, c).valuation() != 1:
                continue
            tau = (ch, L, c)
            break
        if tau is not None:
            break
    if tau is None:
        raise ChabautyError("no linear uniformiser separates the fibre")
    out = {}
    scale = None
    for P in pts:
        exp = expand_coordinates(model, P, prec + 3)
        u = _tau(F, exp.series, *tau) * _tau(F, _w_series(F, Wf, exp.series), *tau)
        e = u.valuation()
        if e != 3 - len(pts):
            raise ChabautyError("pulled-back uniformiser has unexpected valuation")
        if F.characteristic and e % F.characteristic == 0:
            raise ChabautyError("residue characteristic divides the ramification index")
        if scale is None:
            scale = F.inv(u.coeffs[e])
        u = u.scale(scale)
        s = u if e == 1 else u.nth_root(2)[0]
        out[P] = (e, s.reversion(), exp)
    return out


def _point_coefficients(config: ResidueConfiguration, P: CurvePoint, forms, prec: int, cache=None):
    """Expansion coefficients of each form at P in the uniformiser prescribed by the config."""
    model = config.model
    F = P.field
    info = {"e": 1}
    if P in config.pulled_points():
        if config.W is None:
            raise ChabautyError("pullback part needs an involution")
        key = P
        if cache is not None and key in cache:
            data = cache[key]
        else:
            Q = apply_matrix(F, config.W, P, model)
            data = fibre_uniformisers(model, config.W, [P] if Q == P else [P, Q], prec)
            if cache is not None:
                cache.update(data)
            data = data[P]
        e, t_in_s, exp = data
        info["e"] = e
        info["uniformiser"] = "root of pulled-back quotient uniformiser" if e > 1 else \
            "pulled-back quotient uniformiser"
        rows = []
        for f in forms:
            a = differential_expand(model, Differential(tuple(int(c) for c in f)), exp)
            rows.append(list(change_uniformiser(a, t_in_s).coeffs))
    else:
        exp = expand_coordinates(model, P, prec + 3)
        info["uniformiser"] = exp.uniformiser_label()
        rows = [list(differential_expand(model, Differential(tuple(int(c) for c in f)), exp).coeffs)
                for f in forms]
    for r in rows:
        if len(r) < prec:
            raise ChabautyError("expansion precision too small")
    return [r[:prec] for r in rows], info


def _reduced_forms(ann: AnnihilatorSpace):
    return [list(map(int, r)) for r in ann.reduced]


# ---------------------------------------------------------------------------
# first-order criterion

def first_order_check(config: ResidueConfiguration, p: int, ann: AnnihilatorSpace) -> CriterionReport:
    supp = config.support
    if not supp:
        raise ChabautyError("empty configuration")
    F = supp[0][0].field
    n, lam = config.n, config.lam
    cond = {}
    notes = []
    keys = [P.coords for P, _ in supp]
    if len(set(keys)) != len(keys):
        return CriterionReport("first", "inapplicable", {"distinct_reductions": False}, p=p,
                               notes=["distinct support points share a reduction"])
    cond["distinct_reductions"] = True
    N = config.N if config.N is not None else n * (n - 1)
    if config.N is None:
        notes.append(f"ramification bound defaulted to n(n-1) = {N}")
    cond["prime_bound"] = p >= N + 2
    cond["N"] = N
    forms = _reduced_forms(ann)
    prec = max(m for _, m in supp) + 1
    e_vals, unis = [], []
    cache: dict = {}
    blocks = []
    for P, m in supp:
        rows, info = _point_coefficients(config, P, forms, max(prec, m + 1), cache)
        e_vals.append(info["e"])
        unis.append(info["uniformiser"])
        block = [list(VVector.build(F, r, 0, m).entries) for r in rows]
        blocks.append(block)
    cond["disjoint_supports"] = True  # a single quotient map
    cond["p_not_dividing_e"] = all(e % p for e in e_vals)
    A = [sum((blk[i] for blk in blocks), []) for i in range(len(forms))]
    rank = _rank(F, A) if A else 0
    target = n - lam
    cond["rank_condition"] = rank == target
    verdict = "pass" if all(v for k, v in cond.items() if isinstance(v, bool)) else "fail"
    zero_cols = [j for j in range(n) if all(A[i][j] == 0 for i in range(len(A)))] if A else list(range(n))
    notes.append(f"n - lambda = {target} is the maximal possible rank")
    return CriterionReport("first", verdict, cond, rank, target, {"A": A, "zero_columns": zero_cols,
                           "uniformisers": unis, "ramification": e_vals},
                           _modulus(F), p, notes=notes)


def _modulus(F):
    return tuple(F.modulus) if isinstance(F, GF) else ()


def _rank(F, A):
    r, _ = mat_rank_kernel(FieldMatrix(F, [list(row) for row in A]))
    return r


# ---------------------------------------------------------------------------
# higher-order criterion

def _char0_matrix(config: ResidueConfiguration, ann: AnnihilatorSpace, charts):
    """Exact matrix of v(omega, t, n_i) over Q for rational support points."""
    model0, pts0 = config.rational_support
    rows = []
    for f in ann.integral_basis:
        row = []
        for (P0, m), (chart, uvar) in zip(pts0, charts):
            exp = expand_coordinates(model0, P0, 2 * m + 2, chart=chart, uvar=uvar)
            a = differential_expand(model0, Differential(tuple(f)), exp).coeffs
            row += list(VVector.build(QQ, a, 0, m).entries)
        rows.append(row)
    return rows


def higher_order_check(config: ResidueConfiguration, p: int, ann: AnnihilatorSpace,
                       cap: int = 10 ** 7) -> CriterionReport:
    if config.lam != 0:
        raise ChabautyError("the higher-order criterion treats configurations without pullback part")
    supp = config.support
    F = supp[0][0].field
    n = config.n
    q = ann.dimension
    cond = {}
    N = config.N if config.N is not None else n * (n - 1)
    cond["N"] = N
    cond["prime_bound"] = p >= N + 3
    if q < n:
        return CriterionReport("higher", "inapplicable", {"enough_annihilators": False}, p=p,
                               notes=["fewer annihilators than the degree"])
    cond["enough_annihilators"] = True
    if config.rational_support is None:
        return CriterionReport("higher", "inapplicable", cond, p=p,
                               notes=["characteristic-zero rank needs rational support"])
    # charts fixed by the reduced points so both computations use the same uniformiser
    charts = []
    for P, m in supp:
        exp = expand_coordinates(config.model, P, 2)
        charts.append((exp.chart, exp.uvar))
    A0 = _char0_matrix(config, ann, charts)
    r = _rank(QQ, A0)
    cond["rank_below_n"] = r < n
    # integral basis change: rows of U with U A = D V^-1; rows beyond r span the kernel
    Aint = _int_cols(A0)
    D, U, _ = smith_normal_form(Aint)
    newbasis = [[sum(U[i][k] * ann.integral_basis[k][j] for k in range(q)) for j in range(len(ann.integral_basis[0]))]
                for i in range(q)]
    forms = [[c % p for c in row] for row in newbasis]
    prec = 2 * max(m for _, m in supp)
    A1, A2 = [], []
    coeff_rows = [[] for _ in range(q)]
    cache: dict = {}
    for P, m in supp:
        rows, _ = _point_coefficients(config, P, forms, prec, cache)
        for i in range(q):
            coeff_rows[i].append((rows[i], m))
    consistent = True
    for i in range(q):
        first = sum((list(VVector.build(F, c, 0, m).entries) for c, m in coeff_rows[i]), [])
        if i < r:
            A1.append(first)
        else:
            if any(x != 0 for x in first):
                consistent = False
            A2.append([F.neg(x) for c, m in coeff_rows[i] for x in VVector.build(F, c, m, 2 * m).entries])
    cond["reduction_consistent"] = consistent
    r1 = _rank(F, A1) if A1 else 0
    cond["A1_full_rank"] = r1 == r
    base_ok = cond["rank_below_n"] and cond["A1_full_rank"] and consistent
    report = CriterionReport("higher", "fail", cond, r, n, {"A1": A1, "A2": A2, "A_char0_rank": r},
                             _modulus(F), p)
    if not base_ok:
        report.verdict = "inapplicable"
        report.notes.append("rank hypotheses fail")
        return report
    if F.q ** n > cap:
        raise BudgetExceeded(f"scan size {F.q ** n} exceeds cap {cap}")
    witness, scanned = scan_higher_order(F, [m for _, m in supp], A1, A2)
    report.scanned = scanned
    report.witness = witness
    cond["no_nonzero_solution"] = witness is None
    ok = cond["prime_bound"] and witness is None
    report.verdict = "pass" if ok else "fail"
    return report


def scan_higher_order(F, ns, A1, A2):
    """Lexicographically least nonzero x with A1 x = 0 and A2 psi(x) = 0, and the count scanned."""
    n = sum(ns)
    q = F.q
    total = q ** n
    # vectorised over all x in F^n in lexicographic order of the integer encoding
    chunk = 1 << 18
    mul = (lambda a, b: (a * b) % F.p) if F.k == 1 else F.vmul
    add = (lambda a, b: (a + b) % F.p) if F.k == 1 else F.vadd
    A1 = [[int(c) for c in row] for row in A1]
    A2 = [[int(c) for c in row] for row in A2]
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        X = np.zeros((len(idx), n), dtype=np.int64)
        rem = idx.copy()
        for j in reversed(range(n)):
            X[:, j] = rem % q
            rem //= q
        ok = np.any(X != 0, axis=1)
        for row in A1:
            acc = np.zeros(len(idx), dtype=np.int64)
            for j, c in enumerate(row):
                if c:
                    acc = add(acc, mul(np.full(len(idx), c, dtype=np.int64), X[:, j]))
            ok &= acc == 0
        if A2 and ok.any():
            psis = []
            off = 0
            for m in ns:
                for i in range(m + 1, 2 * m + 1):
                    acc = np.zeros(len(idx), dtype=np.int64)
                    for l in range(i - m, m + 1):
                        acc = add(acc, mul(X[:, off + l - 1], X[:, off + i - l - 1]))
                    psis.append(acc)
                off += m
            for row in A2:
                acc = np.zeros(len(idx), dtype=np.int64)
                for j, c in enumerate(row):
                    if c:
                        acc = add(acc, mul(np.full(len(idx), c, dtype=np.int64), psis[j]))
                ok &= acc == 0
        hits = np.nonzero(ok)[0]
        if len(hits):
            return tuple(int(v) for v in X[hits[0]]), int(start + hits[0])
    return None, total - 1


# ---------------------------------------------------------------------------
# trace relations

def trace_relation_check(config_model: CurveModel, W, fibre: Sequence[CurvePoint], forms, prec: int):
    """Relations sum over the fibre of a_(j e - 1) = 0 in root uniformisers; returns violations."""
    if not fibre:
        return []
    cfg = ResidueConfiguration(config_model, W, pulled=[(P, 1) for P in fibre])
    data = []
    cache: dict = {}
    for P in fibre:
        rows, info = _point_coefficients(cfg, P, forms, prec, cache)
        data.append((rows, info["e"]))
    F = fibre[0].field
    emax = max(e for _, e in data)
    violations = []
    for fi in range(len(forms)):
        j = 1
        while j * emax <= prec:
            acc = F.zero
            for rows, e in data:
                acc = F.add(acc, rows[fi][j * e - 1])
            if acc != 0:
                violations.append((fi, j))
            j += 1
    return violations
