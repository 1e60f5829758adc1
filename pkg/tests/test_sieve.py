import itertools
import math
import random

import pytest

from relchab import sieve as sv
from relchab.algebra import BudgetExceeded, FinAbGroup
from relchab.curve import EffDivisor
from relchab.fixtures_io import sieve_problem
from relchab.sieve import (
    AlgebraicPoint, CosetState, KnownPoint, MpSet, PrimeData, SieveError, canonical,
    coset_representatives, forget_factor, full_hnf, lattice_index, lattice_intersection,
    prime_data, probe_small_vectors, refine, run_sieve,
)

from conftest import fixture


def _pd(p, kernel, fibres=None):
    pd = PrimeData(p, full_hnf(kernel, len(kernel)))
    pd.fibres = fibres or {}
    return pd


def _mp(p, elements):
    return MpSet(p, set(elements), {})


def _box(n, L):
    return itertools.product(range(L), repeat=n)


# lattice helpers

def test_lattice_intersection_diagonal():
    H = lattice_intersection([[2, 0], [0, 3]], [[3, 0], [0, 2]])
    assert H == [[6, 0], [0, 6]]


def test_lattice_intersection_matches_membership_oracle():
    rng = random.Random(5)
    for _ in range(20):
        A = full_hnf([[rng.randint(1, 4), rng.randint(0, 5)], [0, rng.randint(1, 4)]], 2)
        B = full_hnf([[rng.randint(1, 4), rng.randint(0, 5)], [0, rng.randint(1, 4)]], 2)
        H = lattice_intersection(A, B)
        L = lattice_index(A) * lattice_index(B)
        zero = (0, 0)
        inter = {v for v in _box(2, L) if canonical(v, A) == zero and canonical(v, B) == zero}
        got = {v for v in _box(2, L) if canonical(v, H) == zero}
        assert got == inter


def test_coset_representatives_count_and_distinct():
    big = [[2, 1], [0, 3]]
    small = lattice_intersection(big, [[5, 0], [0, 5]])
    reps = coset_representatives(big, small)
    assert len(reps) == lattice_index(small) // lattice_index(big)
    assert len(set(reps)) == len(reps)
    assert all(canonical(r, big) == (0, 0) for r in reps)


def test_coset_representatives_cap():
    with pytest.raises(BudgetExceeded):
        coset_representatives([[1]], [[1000]], cap=10)


def test_full_hnf_rejects_deficient_rank():
    with pytest.raises(SieveError):
        full_hnf([[1, 2]], 2)


# refinement

def test_refine_odd_residues_of_z6():
    # A = Z/6, phi onto Z/2, M = {1}: the three odd elements survive
    state = refine(CosetState.initial(1), _pd(7, [[2]]), _mp(7, [(1,)]))
    survivors = {a for a in range(6) if canonical((a,), state.H) in state.reps}
    assert survivors == {a for a in range(6) if a % 2 == 1}
    assert len(survivors) == 3


def test_refine_empty_dangerous_set_kills_everything():
    state = refine(CosetState.initial(1), _pd(7, [[2]]), _mp(7, []))
    assert state.reps == []


def test_refine_full_images_make_no_progress():
    state = CosetState.initial(1)
    state = refine(state, _pd(7, [[2]]), _mp(7, [(0,), (1,)]))
    state = refine(state, _pd(11, [[3]]), _mp(11, [(0,), (1,), (2,)]))
    assert state.index == 6 and len(state.reps) == 6


def test_refine_matches_brute_force():
    rng = random.Random(11)
    for _ in range(25):
        state = CosetState.initial(2)
        conds = []
        for p in (5, 7, 13):
            K = full_hnf([[rng.randint(1, 4), rng.randint(0, 3)], [0, rng.randint(1, 4)]], 2)
            image = sorted({canonical(v, K) for v in _box(2, 16)})
            M = {v for v in image if rng.random() < 0.5}
            conds.append((K, M))
            state = refine(state, _pd(p, K), _mp(p, M))
        L = math.prod(lattice_index(K) for K, _ in conds)
        for v in _box(2, L):
            expect = all(canonical(v, K) in M for K, M in conds)
            assert (canonical(v, state.H) in state.reps) == expect


# forgetting factors

def _cyclic_pd(n):
    pd = PrimeData(3, [[n]])
    for a in range(n):
        pd.table[f"k{a}"] = (a,)
        pd.keys[(a,)] = f"k{a}"
    return pd


def test_forget_factor_cyclic():
    new = forget_factor(_cyclic_pd(6), 2)
    assert new.kernel == [[3]] and new.image_order == 3
    assert new.multiplier == 2 and new.forgotten == (2,)
    for key, v in new.table.items():
        # r times the new coordinate is the original class
        assert canonical((2 * v[0],), [[6]]) == (int(key[1:]),)


def test_forget_factor_j0_65_mod_11_structure():
    # J(F_11) = Z/2 x Z/108780 for X0(65); multiplication by 37 loses exactly that factor
    pd = PrimeData(11, [[2, 0], [0, 108780]])
    assert forget_factor(pd, 37).image_order == pd.image_order // 37


def test_forget_factor_coprime_keeps_order():
    assert forget_factor(_cyclic_pd(6), 5).image_order == 6


def test_forget_factor_on_x0_53_mod_13():
    pd = prime_data(sieve_problem(fixture("x0_53")), 13)
    assert pd.image_order == 221
    for r, left in ((17, 13), (13, 17)):
        new = forget_factor(pd, r)
        assert new.image_order == left
        for key, v in new.table.items():
            assert canonical([r * x for x in v], pd.kernel) == pd.table[key]


def test_prime_data_kernel_is_trivial_in_jacobian():
    prob = sieve_problem(fixture("x0_53"))
    pd = prime_data(prob, 13)
    jac = pd.jac
    gens = [sv.divisor_class(jac, pd.model, plus, minus) for plus, minus in prob.generators]
    for row in pd.kernel:
        acc = jac.zero()
        for c, g in zip(row, gens):
            acc = jac.add(acc, jac.mul(c, g))
        assert jac.is_zero(acc)
    assert len(pd.table) == pd.image_order


# driver

def _synthetic_problem(torsion):
    return sv.SieveProblem(None, None, 0, [], FinAbGroup(0, list(torsion)), [None] * len(torsion), 1, [], [])


def _patch(monkeypatch, data):
    seen = []

    def fake_prime_data(problem, p, cap=0, seed=0):
        seen.append(p)
        K = full_hnf(data[p][0] + problem.relations(), problem.ngens)
        return _pd(p, K)

    monkeypatch.setattr(sv, "prime_data", fake_prime_data)
    monkeypatch.setattr(sv, "build_Mp", lambda problem, pd, **kw: _mp(pd.p, data[pd.p][1]))
    return seen


def test_run_sieve_stops_once_empty(monkeypatch):
    seen = _patch(monkeypatch, {5: ([[2]], []), 7: ([[1]], [(0,)])})
    rep = run_sieve(_synthetic_problem([4]), primes=[5, 7])
    assert rep.success and rep.outcome == "empty"
    assert seen == [5] and len(rep.stats) == 1


def test_run_sieve_shared_residue_survives(monkeypatch):
    # Z/4 sent twice onto Z/2 with the same dangerous residue: the odd classes survive
    _patch(monkeypatch, {5: ([[2]], [(1,)]), 7: ([[2]], [(1,)])})
    rep = run_sieve(_synthetic_problem([4]), primes=[5, 7])
    assert rep.outcome == "survivors"
    assert {a for a in range(4) if canonical((a,), rep.state.H) in rep.state.reps} == {1, 3}


def test_run_sieve_uses_cache(monkeypatch):
    seen = _patch(monkeypatch, {5: ([[2]], [(1,)])})
    cache = {}
    run_sieve(_synthetic_problem([4]), primes=[5], cache=cache)
    run_sieve(_synthetic_problem([4]), primes=[5], cache=cache)
    assert seen == [5] and (5, ()) in cache


@pytest.fixture(scope="module")
def cache53():
    return {}


def _survivors(rep, L):
    return {v for v in itertools.product(range(L), range(13)) if canonical(v, rep.state.H) in rep.state.reps}


def test_sieve_keeps_class_of_dropped_known_point(cache53):
    # t4a has coordinates (4, 1); without it in the known list its coset must survive
    prob = sieve_problem(fixture("x0_53"), primes=[5, 7], drop=["t4a"])
    rep = run_sieve(prob, cache=cache53)
    assert rep.outcome == "survivors"
    assert canonical((4, 1), rep.state.H) in rep.state.reps
    for Mp in rep.mp_sets:
        assert Mp.elements and all(Mp.witnesses[v] for v in Mp.elements)


def test_sieve_prime_order_independence(cache53):
    prob = sieve_problem(fixture("x0_53"), drop=["t4a"])
    a = run_sieve(prob, primes=[5, 7], cache=cache53)
    b = run_sieve(prob, primes=[7, 5], cache=cache53)
    assert a.outcome == b.outcome
    assert a.state.H == b.state.H and _survivors(a, 12) == _survivors(b, 12)


def test_forgetting_only_loses_information(cache53):
    prob = sieve_problem(fixture("x0_53"), drop=["t4a"])
    sharp = run_sieve(prob, primes=[5, 7], cache=cache53)
    blunt = run_sieve(prob, primes=[5, 7], forget={7: [13]}, cache=cache53)
    assert blunt.prime_data[1].image_order == sharp.prime_data[1].image_order // 13
    assert _survivors(sharp, 12) <= _survivors(blunt, 12)


# probe

def test_probe_on_empty_state():
    assert probe_small_vectors(CosetState([[2]], []), 3, []) == []


def test_probe_matches_brute_force():
    state = CosetState([[4, 0], [0, 3]], [(1, 2)])
    screen = _pd(5, [[2, 0], [0, 1]], {(1, 0): [EffDivisor(())]})
    got = sorted(c.vector for c in probe_small_vectors(state, 3, [screen]))
    expect = sorted(v for v in itertools.product(range(-3, 4), repeat=2)
                    if canonical(v, state.H) == (1, 2) and canonical(v, screen.kernel) == (1, 0))
    assert got == expect and got
    assert all(c.fibres == {5: ["0"]} for c in probe_small_vectors(state, 3, [screen]))


# points and problems

def test_algebraic_point_discriminants():
    assert AlgebraicPoint(((0,), (1,)), (11, 0, 1)).discriminant() == -44
    assert AlgebraicPoint(((0,), (1,)), (1, 1, 0, 1)).discriminant() == -31
    assert AlgebraicPoint.rational([1, 0]).discriminant() == 1


def test_known_point_ramification_bound():
    quad = AlgebraicPoint(((0,), (1,)), (11, 0, 1))
    assert KnownPoint("r", [(AlgebraicPoint.rational([1, 0]), 3)]).ramification_bound(11) == 1
    assert KnownPoint("q", [(quad, 1)]).ramification_bound(3) == 1
    assert KnownPoint("q", [(quad, 1)]).ramification_bound(11) == 2
    assert KnownPoint("q", [(quad, 1)], N=5).ramification_bound(11) == 5


def test_problem_validation():
    prob = sieve_problem(fixture("x0_53"))
    prob.validate()
    bad = sieve_problem(fixture("x0_53"))
    bad.generators = bad.generators[:1]
    with pytest.raises(SieveError):
        bad.validate()
    bad = sieve_problem(fixture("x0_53"))
    bad.e += 1
    with pytest.raises(SieveError):
        bad.validate()
