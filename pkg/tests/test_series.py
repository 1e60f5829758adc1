import itertools
import math
import random
from fractions import Fraction

import pytest
import sympy

from relchab.algebra import QQ, ext_field_build, val_p
from relchab.series import (
    PadicValue, SeriesError, SymmetricProfile, TruncatedSeries, default_precision,
    monomial_degree, newton_convert, newton_defect_poly, prime_bound_check, psi,
    quadratic_newton_term, sympoly_eval, tail_error_valuation, tiny_integral,
)


# truncated series

def test_series_arithmetic_and_precision():
    F = ext_field_build(19, 1)
    a = TruncatedSeries(F, [1, 2, 3], 5)
    b = TruncatedSeries(F, [4, 5], 3)
    assert (a + b).prec == 3 and (a * b).prec == 3
    inv = a.inverse()
    assert (a * inv).coeffs == (1, 0, 0, 0, 0)
    # root uniformiser: s^2 = u with u of valuation 2 and square leading coefficient
    u = TruncatedSeries(F, [0, 0, 4, 3, 7, 2], 6)
    r, lead = u.nth_root(2)
    assert F.mul(lead, lead) == 4
    assert (r * r).coeffs == u.coeffs[:(r * r).prec]


def test_series_compose_and_reversion():
    t = TruncatedSeries(QQ, [0, Fraction(1), Fraction(2), Fraction(-1)], 6)
    inv = t.reversion()
    assert t.compose(inv).coeffs[:4] == (0, 1, 0, 0)


# tiny integrals

def test_tiny_integral_trivial_cases():
    assert tiny_integral([1, 0, 0, 0], 5, 4, 5, exact=True).value == 5
    assert tiny_integral([0, 1, 0, 0], 5, 4, 5, exact=True).value == Fraction(25, 2)


def test_tiny_integral_worked_example():
    v = tiny_integral([1, 1, 1, 1, 1], 5, 5, 5, exact=True)
    expected = 5 + Fraction(25, 2) + Fraction(125, 3) + Fraction(625, 4) + 625
    assert v.value == expected and v.valuation == 1


def test_tiny_integral_rejects_non_disc():
    with pytest.raises(SeriesError):
        tiny_integral([1], Fraction(1, 5) * 5, 4, 5)


def _exact(a, z):
    return sum(Fraction(c) * Fraction(z) ** (n + 1) / (n + 1) for n, c in enumerate(a))


@pytest.mark.parametrize("p", [3, 5, 7, 11, 13])
def test_tiny_integral_matches_exact_oracle(p):
    rng = random.Random(p)
    for _ in range(15):
        prec = rng.randint(3, 20)
        a = [rng.randint(-20, 20) for _ in range(prec + 10)]
        b = [rng.randint(-20, 20) for _ in range(prec + 10)]
        z = p * rng.choice([1, -1, 2, p, 3]) * rng.choice([1, Fraction(1, 2) if p != 2 else 1])
        v = tiny_integral(a, z, prec, p)
        # truncation certificate against the longer exact sum
        assert v.agrees_with(_exact(a, z))
        # additivity in the coefficients
        ab = tiny_integral([x + y for x, y in zip(a, b)], z, prec, p)
        assert ab.agrees_with(v.value + tiny_integral(b, z, prec, p).value)
        # exact polynomial mode reproduces the full sum
        assert tiny_integral(a, z, len(a), p, exact=True).value == _exact(a, z)


def test_tiny_integral_two_steps_inside_one_disc():
    # integral of (1 + 2t) from 0 to z1 plus from z1 to z2 equals 0 to z2, with the second
    # step expanded around z1 (coefficients of the shifted polynomial)
    p = 7
    z1, z2 = Fraction(7), Fraction(21)
    a = [1, 2, 3]
    shifted = [sum(math.comb(k, j) * a[k] * z1 ** (k - j) for k in range(j, 3)) for j in range(3)]
    whole = tiny_integral(a, z2, 3, p, exact=True).value
    step1 = tiny_integral(a, z1, 3, p, exact=True).value
    step2 = tiny_integral(shifted, z2 - z1, 3, p, exact=True).value
    assert whole == step1 + step2


def test_tail_error_valuation_formula():
    for p in (2, 3, 5):
        for vz in (1, 2):
            for start in range(1, 12):
                brute = min((n + 1) * vz - val_p(n + 1, p) for n in range(start, start + 400))
                assert tail_error_valuation(p, vz, start) == brute


def test_padic_value_invariant():
    with pytest.raises(SeriesError):
        PadicValue(Fraction(5), 1, 5, 10)
    x = PadicValue.from_rational(Fraction(50, 3), 5)
    assert x.valuation == 2 and x.unit == Fraction(2, 3)


# Newton identities

def test_newton_convert_example():
    s = newton_convert(SymmetricProfile(2, (3, 2), "elementary"), "powerSum", 3)
    assert s.values == (3, 5, 9)
    z = newton_convert(SymmetricProfile(3, (0, 0, 0), "elementary"), "powerSum", 5)
    assert all(v == 0 for v in z.values)


def test_newton_roundtrip_random():
    rng = random.Random(1)
    for _ in range(50):
        n = rng.randint(1, 5)
        k = rng.randint(n, 10)
        e = tuple(Fraction(rng.randint(-9, 9), rng.randint(1, 5)) for _ in range(n))
        s = newton_convert(SymmetricProfile(n, e, "elementary"), "powerSum", k)
        back = newton_convert(s, "elementary", k)
        assert back.values == e


def _elementary(roots):
    n = len(roots)
    return [sum(math.prod(c) for c in itertools.combinations(roots, i)) for i in range(1, n + 1)]


def test_newton_against_explicit_roots():
    rng = random.Random(2)
    for _ in range(100):
        n = rng.randint(1, 5)
        roots = [Fraction(rng.randint(-9, 9), rng.randint(1, 4)) for _ in range(n)]
        k = 8
        s = newton_convert(SymmetricProfile(n, _elementary(roots), "elementary"), "powerSum", k)
        assert list(s.values) == [sum(r ** m for r in roots) for m in range(1, k + 1)]


def test_newton_small_characteristic():
    with pytest.raises(SeriesError):
        newton_convert(SymmetricProfile(2, (1, 1), "elementary"), "powerSum", 5, ext_field_build(5, 1))


def _sympy_defect(n, k):
    """Oracle: Newton's recursion s_m = sum (-1)^(i-1) e_i s_{m-i} + (-1)^(m-1) m e_m in sympy."""
    e = sympy.symbols(f"e1:{n + 1}")
    E = lambda i: e[i - 1] if 1 <= i <= n else 0
    s = [0]
    for m in range(1, k + 1):
        s.append(sympy.expand(sum((-1) ** (i - 1) * E(i) * s[m - i] for i in range(1, m))
                              + (-1) ** (m - 1) * m * E(m)))
    expr = sympy.expand(s[k] / sympy.Integer(k) - (-1) ** (k - 1) * E(k))
    poly = sympy.Poly(expr, *e) if expr != 0 else None
    if poly is None:
        return {}
    return {tuple(m): Fraction(int(c.p), int(c.q)) for m, c in poly.terms()}


def test_defect_examples():
    assert newton_defect_poly(2, 2) == {(2, 0): Fraction(1, 2)}
    assert newton_defect_poly(1, 1) == {}
    assert all(monomial_degree(m) >= 3 for m in newton_defect_poly(2, 5))


@pytest.mark.parametrize("n,k", [(1, 3), (2, 4), (3, 7), (4, 10), (5, 12)])
def test_defect_matches_symbolic_oracle(n, k):
    assert newton_defect_poly(n, k) == _sympy_defect(n, k)


def test_defect_quadratic_part():
    for n in range(1, 5):
        for k in range(n + 1, 11):
            P = newton_defect_poly(n, k)
            Q = quadratic_newton_term(n, k)
            quad = {m: c for m, c in P.items() if monomial_degree(m) == 2}
            assert quad == Q


def test_defect_ranges():
    with pytest.raises(SeriesError):
        newton_defect_poly(7, 3)
    with pytest.raises(SeriesError):
        newton_defect_poly(2, 13)


# psi

def test_psi_examples():
    assert psi((1, 2, 3), 4) == 10
    assert psi((1, 1), 3) == 2
    assert psi((5, 0, 0), 6) == 0
    with pytest.raises(SeriesError):
        psi((1, 2), 2)


def test_psi_definition_and_pairing_symmetry():
    rng = random.Random(4)
    F = ext_field_build(19, 1)
    for _ in range(50):
        j = rng.randint(1, 6)
        xs = [rng.randrange(19) for _ in range(j)]
        for i in range(j + 1, 2 * j + 1):
            direct = sum(xs[l - 1] * xs[i - l - 1] for l in range(i - j, j + 1)) % 19
            assert psi(xs, i, F) == direct
            # swapping a paired couple x_l <-> x_{i-l} leaves psi_i unchanged
            l = rng.randint(i - j, j)
            ys = list(xs)
            ys[l - 1], ys[i - l - 1] = ys[i - l - 1], ys[l - 1]
            assert psi(ys, i, F) == psi(xs, i, F)


# prime bound

def test_prime_bound_examples():
    assert prime_bound_check(11, 1, 1, 11)
    assert not prime_bound_check(3, 2, 1, 3)
    with pytest.raises(SeriesError):
        prime_bound_check(5, 1, 2, 2)


def test_default_precision():
    assert default_precision([3]) == 10
