import itertools
import math
import random
from fractions import Fraction

import pytest

from relchab.algebra import (
    AlgebraError, BudgetExceeded, FieldMatrix, FinAbGroup, GF, IntLattice, QQ, NumberField,
    coset_small_vectors, ext_field_build, factorint, fp_poly_is_irreducible, int_det,
    int_mat_mul, is_lll_reduced, is_prime, least_irreducible, lll_reduce, mat_rank_kernel,
    poly_factor, poly_roots, smith_normal_form, snf_invariants,
)


# fields

def test_prime_field_trivial():
    F = ext_field_build(2, 1)
    assert F.q == 2 and F.modulus == (0, 1)


def test_gf9_multiplicative_group_order():
    F = ext_field_build(3, 2)
    assert F.q == 9
    units = [a for a in F.elements() if a]
    assert len(units) == 8
    assert all(F.pow(a, 8) == F.one for a in units)
    assert any(all(F.pow(a, d) != F.one for d in (1, 2, 4)) for a in units)


def test_gf19_cubed_frobenius_order_three():
    F = ext_field_build(19, 3)
    assert F.q == 6859
    g = F.gen()
    x = g
    orbit = [x]
    for _ in range(3):
        x = F.pow(x, 19)
        orbit.append(x)
    assert orbit[3] == g and len(set(orbit[:3])) == 3


def test_modulus_is_lexicographically_least():
    # brute force oracle: first monic irreducible cubic over F_5 by sum c_i p^i order
    p, k = 5, 3
    for code in range(p ** k):
        tail = [(code // p ** i) % p for i in range(k)]
        if tail[0] == 0:
            continue
        # irreducible cubic iff no root
        if all(sum(c * x ** i for i, c in enumerate(tail + [1])) % p for x in range(p)):
            break
    assert least_irreducible(p, k) == tuple(tail + [1])


@pytest.mark.parametrize("p,k", [(2, 4), (3, 3), (5, 2), (7, 2), (19, 2), (13, 3)])
def test_field_inverse_and_frobenius(p, k):
    F = ext_field_build(p, k)
    rng = random.Random(p * 100 + k)
    for _ in range(1000):
        a = rng.randrange(1, F.q)
        assert F.mul(a, F.inv(a)) == F.one
    # Frobenius is additive, multiplicative and of exact order k
    for _ in range(50):
        a, b = rng.randrange(F.q), rng.randrange(F.q)
        assert F.frobenius(F.add(a, b)) == F.add(F.frobenius(a), F.frobenius(b))
        assert F.frobenius(F.mul(a, b)) == F.mul(F.frobenius(a), F.frobenius(b))
    g = F.gen()
    assert F.frobenius(g, k) == g
    assert all(F.frobenius(g, i) != g for i in range(1, k))


def test_field_errors():
    with pytest.raises(AlgebraError):
        ext_field_build(9, 1)
    with pytest.raises(AlgebraError):
        ext_field_build(5, 13)
    with pytest.raises(AlgebraError):
        GF(5, 2, modulus=(1, 0, 1))  # x^2+1 = (x-2)(x+2) mod 5


def test_primality_and_factoring():
    small = [n for n in range(2, 500) if all(n % d for d in range(2, int(n ** 0.5) + 1))]
    assert [n for n in range(500) if is_prime(n)] == small
    n = 108780
    assert factorint(n) == {2: 2, 3: 1, 5: 1, 7: 2, 37: 1}
    assert math.prod(q ** e for q, e in factorint(2 ** 61 - 1).items()) == 2 ** 61 - 1


def test_poly_factor_and_roots_over_extension():
    F = ext_field_build(7, 2)
    # x^2 + 1 is irreducible over F_7, splits over F_49
    roots = poly_roots([1, 0, 1], F)
    assert len(roots) == 2
    assert all(F.add(F.mul(r, r), F.one) == 0 for r in roots)
    facs = poly_factor([F.from_int(c) for c in (6, 0, 0, 1)], F)  # x^3 - 1
    assert sum(len(f) - 1 for f, m in facs) == 3
    assert fp_poly_is_irreducible([1, 0, 1], 7) and not fp_poly_is_irreducible([1, 0, 1], 5)


def test_number_field_inverse():
    K = NumberField((11, 0, 1))  # a^2 + 11
    a = K.gen()
    x = K.add(K.from_int(3), a)
    assert K.mul(x, K.inv(x)) == K.one
    assert K.mul(a, a) == K.from_int(-11)


# linear algebra

def test_rank_with_zero_column_mod_19():
    F = ext_field_build(19, 1)
    r, ker = mat_rank_kernel(FieldMatrix.from_ints(F, [[15, 0, 0], [2, 0, 2], [6, 0, 11]]))
    assert r == 2 and len(ker) == 1


@pytest.mark.parametrize("n", [1, 3, 5])
def test_rank_zero_and_identity(n):
    F = ext_field_build(7, 1)
    r, ker = mat_rank_kernel(FieldMatrix.from_ints(F, [[0] * n for _ in range(n)]))
    assert r == 0 and len(ker) == n
    r, ker = mat_rank_kernel(FieldMatrix.from_ints(F, [[int(i == j) for j in range(n)] for i in range(n)]))
    assert r == n and ker == []


def _brute_rank(M, p):
    # |row space| by enumeration of all combinations
    rows = len(M)
    span = {tuple(sum(c * M[i][j] for i, c in enumerate(cs)) % p for j in range(len(M[0])))
            for cs in itertools.product(range(p), repeat=rows)}
    return round(math.log(len(span), p))


@pytest.mark.parametrize("F", [ext_field_build(5, 1), ext_field_build(3, 2)], ids=["F5", "F9"])
def test_rank_invariant_under_random_operations(F):
    rng = random.Random(7)
    for _ in range(5):
        rows, cols = rng.randint(2, 4), rng.randint(2, 4)
        base = [[rng.randrange(F.q) for _ in range(cols)] for _ in range(rows)]
        if rng.random() < 0.5:
            base[-1] = [F.add(a, b) for a, b in zip(base[0], base[1])]
        M = FieldMatrix(F, base)
        r, ker = mat_rank_kernel(M)
        assert r + len(ker) == cols
        assert all(all(F.is_zero(x) for x in M.mul_vec(v)) for v in ker)
        if F.k == 1:
            assert r == _brute_rank(base, F.p)
        for _ in range(100):
            A = [list(row) for row in base]
            i, j = rng.sample(range(rows), 2)
            c = rng.randrange(F.q)
            A[i] = [F.add(x, F.mul(c, y)) for x, y in zip(A[i], A[j])]
            u = rng.randrange(1, F.q)
            a, b = rng.sample(range(cols), 2)
            for row in A:
                row[a] = F.mul(u, row[a])
                row[b], row[a] = row[a], row[b]
            assert mat_rank_kernel(FieldMatrix(F, A))[0] == r


def test_rank_over_rationals():
    M = FieldMatrix(QQ, [[Fraction(1), Fraction(2)], [Fraction(1, 2), Fraction(1)]])
    assert mat_rank_kernel(M)[0] == 1


# Smith normal form

def _check_snf(M):
    D, U, V = smith_normal_form(M)
    assert int_mat_mul(int_mat_mul(U, M), V) == D
    assert abs(int_det(U)) == 1 and abs(int_det(V)) == 1
    k = min(len(D), len(D[0]))
    d = [D[i][i] for i in range(k)]
    assert all(D[i][j] == 0 for i in range(len(D)) for j in range(len(D[0])) if i != j)
    assert all(d[i + 1] % d[i] == 0 if d[i] else d[i + 1] == 0 for i in range(k - 1))
    return d


def test_snf_examples():
    assert _check_snf([[2, 0], [0, 3]]) == [1, 6]
    assert _check_snf([[0]]) == [0]
    assert _check_snf([[2, 4], [6, 8]]) == [2, 4]


def _gcd_of_minors(M, k):
    g = 0
    rows, cols = len(M), len(M[0])
    for R in itertools.combinations(range(rows), k):
        for C in itertools.combinations(range(cols), k):
            g = math.gcd(g, int_det([[M[i][j] for j in C] for i in R]))
    return g


def test_snf_against_determinantal_divisors():
    # d_1...d_k = gcd of k x k minors, an independent characterisation
    rng = random.Random(3)
    for _ in range(40):
        rows, cols = rng.randint(1, 4), rng.randint(1, 4)
        M = [[rng.randint(-9, 9) for _ in range(cols)] for _ in range(rows)]
        d = _check_snf(M)
        prod = 1
        for k in range(1, min(rows, cols) + 1):
            prod *= d[k - 1]
            assert abs(prod) == _gcd_of_minors(M, k)


def _random_unimodular(n, rng):
    U = [[int(i == j) for j in range(n)] for i in range(n)]
    for _ in range(8):
        i, j = rng.sample(range(n), 2) if n > 1 else (0, 0)
        if i == j:
            U[0] = [-x for x in U[0]]
            continue
        c = rng.randint(-3, 3)
        U[i] = [a + c * b for a, b in zip(U[i], U[j])]
    return U


def test_snf_invariant_under_unimodular_change():
    rng = random.Random(11)
    for _ in range(30):
        n, m = rng.randint(1, 4), rng.randint(1, 4)
        M = [[rng.randint(-6, 6) for _ in range(m)] for _ in range(n)]
        P = int_mat_mul(int_mat_mul(_random_unimodular(n, rng), M), _random_unimodular(m, rng))
        assert snf_invariants(P) == snf_invariants(M)


# LLL and coset enumeration

def _spans(A, B):
    # every row of B is an integer combination of rows of A (square, full rank case)
    Ainv = [[Fraction(x) for x in r] for r in _rational_inverse(A)]
    for b in B:
        coeffs = [sum(Fraction(b[k]) * Ainv[k][j] for k in range(len(b))) for j in range(len(A))]
        if any(c.denominator != 1 for c in coeffs):
            return False
    return True


def _rational_inverse(A):
    n = len(A)
    M = [[Fraction(x) for x in r] + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(A)]
    for c in range(n):
        piv = next(i for i in range(c, n) if M[i][c] != 0)
        M[c], M[piv] = M[piv], M[c]
        M[c] = [x / M[c][c] for x in M[c]]
        for i in range(n):
            if i != c and M[i][c]:
                M[i] = [a - M[i][c] * b for a, b in zip(M[i], M[c])]
    return [r[n:] for r in M]


def test_lll_identity():
    I = [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    assert lll_reduce(I) == I


def test_lll_small_example():
    B = lll_reduce([[1, 0], [4, 1]])
    assert sorted(map(tuple, map(lambda v: [abs(x) for x in v], B))) == [(0, 1), (1, 0)]


def test_lll_planted_short_vector():
    basis = [[1000, 0, 0], [0, 1000, 0], [3, 4, 5]]
    B = lll_reduce(basis)
    # oracle: shortest nonzero vector over coefficient box +-3
    best = min(sum(x * x for x in [sum(c[i] * basis[i][j] for i in range(3)) for j in range(3)])
               for c in itertools.product(range(-3, 4), repeat=3) if any(c))
    assert best == 50
    assert any(sum(x * x for x in v) == 50 for v in B)


def test_lll_properties_random():
    rng = random.Random(5)
    for _ in range(20):
        n = rng.randint(2, 4)
        while True:
            A = [[rng.randint(-30, 30) for _ in range(n)] for _ in range(n)]
            if int_det(A):
                break
        B = lll_reduce(A)
        assert is_lll_reduced(B)
        assert _spans(A, B) and _spans(B, A)
        # first vector within 2^((n-1)/2) of lambda_1, lambda_1 bounded by a box search
        lam = min(sum(x * x for x in [sum(c[i] * A[i][j] for i in range(n)) for j in range(n)])
                  for c in itertools.product(range(-2, 3), repeat=n) if any(c))
        assert sum(x * x for x in B[0]) <= 2 ** (n - 1) * lam


def test_lll_dependent_basis_rejected():
    with pytest.raises(AlgebraError):
        lll_reduce([[1, 2], [2, 4]])


def _box(H, w, bound):
    dim = len(w)
    out = []
    HB = [[Fraction(x) for x in r] for r in H]
    for v in itertools.product(range(-bound, bound + 1), repeat=dim):
        d = [a - b for a, b in zip(v, w)]
        if _in_lattice(HB, d):
            out.append(list(v))
    return sorted(out, key=lambda v: (sum(x * x for x in v), v))


def _in_lattice(HB, d):
    # solve d = c H for rational c, require integrality and exactness
    n = len(HB)
    A = [[HB[i][j] for i in range(n)] + [Fraction(d[j])] for j in range(len(d))]
    rows = len(A)
    r = 0
    piv = []
    for c in range(n):
        sel = next((i for i in range(r, rows) if A[i][c] != 0), None)
        if sel is None:
            continue
        A[r], A[sel] = A[sel], A[r]
        A[r] = [x / A[r][c] for x in A[r]]
        for i in range(rows):
            if i != r and A[i][c]:
                A[i] = [a - A[i][c] * b for a, b in zip(A[i], A[r])]
        piv.append(c)
        r += 1
    if any(A[i][n] != 0 for i in range(r, rows)):
        return False
    return all(A[i][n].denominator == 1 for i in range(r))


def test_coset_examples():
    assert [0, 0] in coset_small_vectors([[3, 1], [0, 5]], [0, 0], 0)
    got = coset_small_vectors([[2, 0], [0, 2]], [1, 1], 1)
    assert sorted(map(tuple, got)) == sorted(itertools.product((-1, 1), repeat=2))
    assert coset_small_vectors([[100, 0], [0, 100]], [3, -4], 10) == [[3, -4]]


def test_coset_against_box_enumeration():
    rng = random.Random(17)
    for _ in range(25):
        dim = rng.randint(1, 4)
        rank = rng.randint(1, dim)
        while True:
            H = [[rng.randint(-7, 7) for _ in range(dim)] for _ in range(rank)]
            try:
                IntLattice(H)
                break
            except AlgebraError:
                continue
        w = [rng.randint(-15, 15) for _ in range(dim)]
        bound = rng.randint(0, 20 if dim <= 2 else 6)
        assert coset_small_vectors(H, w, bound) == _box(H, w, bound)


def test_coset_cap():
    with pytest.raises(BudgetExceeded):
        coset_small_vectors([[1, 0], [0, 1]], [0, 0], 50, cap=10)


# finite abelian groups

def test_finabgroup_normalisation():
    G = FinAbGroup.from_invariants([4, 6, 3])
    assert G.torsion == (6, 12) and G.order == 72
    assert FinAbGroup.from_relations([[2, 0], [0, 3]], 2).torsion == (6,)
    assert FinAbGroup.from_relations([[2, 0]], 2).rank == 1
    with pytest.raises(AlgebraError):
        FinAbGroup(0, (4, 6))
    assert FinAbGroup(0, (2, 84)).embeds_in(FinAbGroup(0, (2, 108780)))
    assert not FinAbGroup(0, (4,)).embeds_in(FinAbGroup(0, (2, 2)))
