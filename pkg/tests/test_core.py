"""Core algebra tests: presented algebras, term evaluation, quotient oracle."""

import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from baforge.core import (
    AlgebraMismatchError,
    And,
    Const,
    Element,
    FiniteAlgebra,
    Not,
    Or,
    Presentation,
    TwoValuedMap,
    UnknownLabelError,
    Var,
    World,
    algebra_of_presentation,
    closure,
    complement,
    eval_term,
    extends_to_hom,
    format_term,
    free_product,
    gen_subalgebra,
    ideal_gen,
    join,
    meet,
    member_of_gen,
    oracle_zero_test,
    pair,
    parse_term,
    plain,
    product,
    quotient,
    relation_quotient_oracle,
    subst_labels,
)


def pres(labels, patterns):
    return Presentation.of([plain(i) for i in labels], patterns)


def powerset_algebra(n):
    return FiniteAlgebra([f"a{i}" for i in range(n)])


# ---------------------------------------------------------------------------
# closure
# ---------------------------------------------------------------------------

def literal_closure(p):
    """The definition, written out independently: g is in the closure iff
    every finite sub-world restriction of g is matched by a family member."""
    w = list(p.world)
    out = set()
    for bits in itertools.product((0, 1), repeat=len(w)):
        g = dict(zip(w, bits))
        ok = True
        for r in range(len(w) + 1):
            for u in itertools.combinations(w, r):
                if not any(all(f(lab) == g[lab] for lab in u) for f in p.family):
                    ok = False
        if ok:
            out.add(bits)
    return out


def test_closure_singleton_world():
    p = pres([0], [(0,), (1,)])
    assert {f.bits for f in closure(p)} == {(0,), (1,)}


def test_closure_empty_world_empty_family():
    p = Presentation.of([], [])
    got = closure(p)
    assert len(got) == 1 and next(iter(got)).bits == ()


def test_closure_three_of_four_maps():
    p = pres([0, 1], [(0, 0), (0, 1), (1, 0)])
    assert {f.bits for f in closure(p)} == literal_closure(p) == {(0, 0), (0, 1), (1, 0)}


@given(st.integers(1, 3), st.data())
@settings(max_examples=60, deadline=None)
def test_closure_idempotent_and_monotone(n, data):
    patterns = data.draw(
        st.lists(st.tuples(*[st.integers(0, 1)] * n), min_size=0, max_size=5)
    )
    p = pres(range(n), patterns)
    cl = closure(p)
    p2 = Presentation(p.world, tuple(sorted(cl, key=lambda f: f.bits)))
    assert closure(p2) == cl
    extra = data.draw(st.lists(st.tuples(*[st.integers(0, 1)] * n), max_size=3))
    bigger = pres(range(n), patterns + extra)
    assert {f.bits for f in cl} <= {f.bits for f in closure(bigger)} or not patterns


# ---------------------------------------------------------------------------
# eval_term
# ---------------------------------------------------------------------------

def test_eval_term_single_point():
    p = pres([0, 1], [(1, 0)])
    t = And(Var(plain(0)), Not(Var(plain(1))))
    assert eval_term(p, t).bits == 0b1


def test_eval_term_const_one_is_all_ones():
    p = pres([0, 1], [(0, 0), (1, 1), (1, 0)])
    e = eval_term(p, Const(1))
    assert e == e.alg.one


def test_eval_term_or_column():
    p = pres([0, 1], [(0, 0), (1, 1), (1, 0)])
    t = Or(Var(plain(0)), Var(plain(1)))
    # pointwise oracle: evaluate the term at each family member separately
    expected = [max(f((plain(0))), f(plain(1))) for f in p.family]
    got = eval_term(p, t)
    assert [got.bits >> i & 1 for i in range(3)] == expected == [0, 1, 1]


def test_eval_term_unknown_label():
    p = pres([0], [(1,)])
    with pytest.raises(UnknownLabelError):
        eval_term(p, Var(plain(7)))


# ---------------------------------------------------------------------------
# relation_quotient_oracle
# ---------------------------------------------------------------------------

def test_oracle_single_generator_forced_one():
    p = pres([0], [(1,)])
    oracle = relation_quotient_oracle(p)
    assert oracle.size == 1
    assert oracle.gens[plain(0)] == oracle.mask


def test_oracle_full_family_is_free():
    p = pres([0, 1], list(itertools.product((0, 1), repeat=2)))
    oracle = relation_quotient_oracle(p)
    assert oracle.size == 4 and 2 ** oracle.size == 16


def test_oracle_single_map_two_element_algebra():
    p = pres([0, 1], [(1, 0)])
    oracle = relation_quotient_oracle(p)
    assert oracle.size == 1
    assert oracle.gens[plain(0)] == 1 and oracle.gens[plain(1)] == 0


def _random_terms(rng, labels, count, depth=4):
    import random

    def build(d):
        if d == 0 or rng.random() < 0.25:
            if rng.random() < 0.1:
                return Const(rng.randrange(2))
            return Var(labels[rng.randrange(len(labels))])
        op = rng.randrange(3)
        if op == 0:
            return Not(build(d - 1))
        if op == 1:
            return And(build(d - 1), build(d - 1))
        return Or(build(d - 1), build(d - 1))

    return [build(depth) for _ in range(count)]


@given(st.integers(0, 42))
@settings(max_examples=40, deadline=None)
def test_oracle_matches_evaluation_algebra(seed):
    import random

    rng = random.Random(seed)
    n = rng.randrange(1, 5)
    fam = [tuple(rng.randrange(2) for _ in range(n)) for _ in range(rng.randrange(0, 7))]
    p = pres(range(n), fam)
    oracle = relation_quotient_oracle(p)
    # atoms correspond one-to-one with distinct family members
    assert oracle.size == len(p.family)
    assert {name[1:] for name in oracle.atoms} == {
        "".join(map(str, f.bits)) for f in p.family
    }
    labels = [plain(i) for i in range(n)]
    for t in _random_terms(rng, labels, 25):
        assert oracle_zero_test(oracle, t) == eval_term(p, t).is_zero


def test_point_coordinate_functionals_are_homomorphisms():
    p = pres([0, 1, 2], [(1, 1, 0), (0, 1, 1), (0, 0, 0)])
    alg = algebra_of_presentation(p)
    import random

    rng = random.Random(5)
    for t in _random_terms(rng, list(p.world), 40):
        val = eval_term(p, t)
        for i, f in enumerate(p.family):
            assert (val.bits >> i & 1) == t.eval_assignment({lab: f(lab) for lab in p.world})


# ---------------------------------------------------------------------------
# extends_to_hom
# ---------------------------------------------------------------------------

def test_extends_empty_subworld():
    p = pres([0, 1], [(1, 0)])
    assert extends_to_hom(p, [], {})
    assert not extends_to_hom(Presentation.of([plain(0)], []), [], {})


def test_extends_no_agreeing_member():
    p = pres([0, 1], [(1, 0)])
    assert not extends_to_hom(p, [plain(0)], {plain(0): 0})


def test_extends_scan():
    p = pres([0, 1, 2], [(1, 1, 0), (0, 1, 1)])
    assert extends_to_hom(p, [plain(1)], {plain(1): 1})


# ---------------------------------------------------------------------------
# algebra construction, subalgebras
# ---------------------------------------------------------------------------

def test_atom_bijection_and_size():
    p = pres([0, 1], [(0, 0), (0, 0), (1, 1)])
    alg = algebra_of_presentation(p)
    assert alg.size == 2  # duplicates merged
    assert len(list(alg.carrier())) == 2 ** alg.size


def test_gen_subalgebra_empty_is_trivial():
    alg = powerset_algebra(3)
    assert gen_subalgebra(alg, []) == frozenset({alg.zero, alg.one})


def test_gen_subalgebra_single_atom():
    alg = powerset_algebra(3)
    a = alg.atom(0)
    assert gen_subalgebra(alg, [a]) == frozenset({alg.zero, a, ~a, alg.one})


def test_member_of_gen_enumerated():
    alg = powerset_algebra(4)
    x = alg.element(0b0011)
    g = alg.element(0b0110)
    # oracle: enumerate the 4-element subalgebra generated by g
    assert gen_subalgebra(alg, [g]) == frozenset({alg.zero, g, ~g, alg.one})
    assert not member_of_gen(x, [g])
    assert member_of_gen(~g, [g])


def test_mixed_algebra_error():
    a3, a2 = powerset_algebra(3), powerset_algebra(2)
    with pytest.raises(AlgebraMismatchError):
        meet(a3.one, a2.one)
    with pytest.raises(AlgebraMismatchError):
        member_of_gen(a3.one, [a2.one])


# ---------------------------------------------------------------------------
# products and free products
# ---------------------------------------------------------------------------

def test_product_atom_count_adds():
    pr = product(powerset_algebra(2), powerset_algebra(2))
    assert pr.algebra.size == 4


def test_free_product_atom_count_multiplies():
    fp = free_product(powerset_algebra(2), powerset_algebra(3))
    assert fp.algebra.size == 6


def test_free_product_mixed_laws():
    P = powerset_algebra(2)
    fp = free_product(P, P)
    a, b = P.atom(0), P.atom(1)
    assert not fp.mixed(a, b).is_zero  # disjoint in the factor, nonzero here
    assert (fp.mixed(a, b) & fp.mixed(b, a)).is_zero  # a ∧ b = 0 kills the pair meet
    # <a,1> ∧ <1,b> = <a,b>
    assert fp.mixed(a, P.one) & fp.mixed(P.one, b) == fp.mixed(a, b)


def test_product_embeddings_injective_homs():
    A, B = powerset_algebra(2), powerset_algebra(3)
    pr = product(A, B)
    seen = set()
    for x in A.carrier():
        e = pr.inject_left(x)
        assert e.bits not in seen
        seen.add(e.bits)
    for x in A.carrier():
        for y in A.carrier():
            assert pr.inject_left(x & y) == pr.inject_left(x) & pr.inject_left(y)
            assert pr.inject_left(x | y) == pr.inject_left(x) | pr.inject_left(y)
    fp = free_product(A, B)
    for x in A.carrier():
        for y in A.carrier():
            assert fp.embed_left(x & y) == fp.embed_left(x) & fp.embed_left(y)
            assert fp.embed_left(x | y) == fp.embed_left(x) | fp.embed_left(y)
            assert fp.embed_left(~x) == ~fp.embed_left(x)


# ---------------------------------------------------------------------------
# ideals and quotients
# ---------------------------------------------------------------------------

def test_ideal_gen_empty_and_trivial_quotient():
    alg = powerset_algebra(3)
    ideal = ideal_gen(alg, [])
    assert list(ideal.members()) == [alg.zero]
    q, proj = quotient(alg, ideal)
    assert q.size == alg.size
    assert proj(alg.one) == q.one


def test_quotient_by_one_atom():
    alg = powerset_algebra(3)
    q, proj = quotient(alg, ideal_gen(alg, [alg.atom(1)]))
    assert q.size == 2
    assert proj(alg.atom(1)).is_zero


def test_quotient_by_join_of_two_atoms_has_two_elements():
    alg = powerset_algebra(3)
    q, proj = quotient(alg, ideal_gen(alg, [alg.atom(0) | alg.atom(1)]))
    assert 2 ** q.size == 2
    # projection is a surjective homomorphism with kernel the ideal
    for x in alg.carrier():
        for y in alg.carrier():
            assert proj(x | y) == proj(x) | proj(y)
            assert proj(x & y) == proj(x) & proj(y)


# ---------------------------------------------------------------------------
# terms: parsing and printing
# ---------------------------------------------------------------------------

def test_term_parse_roundtrip():
    for text in [
        "(and (var 0 0) (not (var 1 0)))",
        "(or (const 1) (var 3))",
        "(not (and (var 2) (or (var 0) (const 0))))",
    ]:
        t = parse_term(text)
        assert parse_term(format_term(t)) == t


def test_term_parse_errors():
    for bad in ["", "(xor (var 0) (var 1))", "(var 0", "(and (var 0))(var 1)"]:
        with pytest.raises(ValueError):
            parse_term(bad)


def test_subst_labels():
    t = parse_term("(and (var 0) (not (var 1)))")
    mapped = subst_labels(t, {plain(0): plain(5), plain(1): plain(6)})
    assert mapped == parse_term("(and (var 5) (not (var 6)))")


def test_semantic_equality_not_syntactic():
    p = pres([0, 1], [(0, 0), (0, 1), (1, 0), (1, 1)])
    a = eval_term(p, parse_term("(not (and (var 0) (var 1)))"))
    b = eval_term(p, parse_term("(or (not (var 0)) (not (var 1)))"))
    assert a == b


def test_degenerate_presentation():
    p = pres([0], [])
    assert p.is_degenerate
    alg = algebra_of_presentation(p)
    assert alg.is_degenerate and alg.zero == alg.one
    assert eval_term(p, Var(plain(0))).is_zero
