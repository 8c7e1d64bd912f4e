import pytest
from hypothesis import given, settings

from dynetkat.netkat import (
    ONE,
    ZERO,
    Assign,
    Not,
    NkRelation,
    Plus,
    Seq,
    Star,
    Test as FieldTest,
    eval_policy,
    eval_pred,
    format_policy,
    nk_equiv,
    nk_is_zero,
    normalize,
    relation_to_policy,
    seq,
)
from dynetkat.packets import FieldSchema, SchemaError
from dynetkat.syntax import parse_policy
from randgen import SCHEMA2, SCHEMA3, policies, predicates
from suites import netkat_axiom_suite, netkat_oracle_suite, ref_relation

FW = FieldSchema([("port", ("int", "ext"))])
INT = FW.make(port="int")
EXT = FW.make(port="ext")


def test_eval_pred():
    assert eval_pred(FieldTest("port", "ext"), EXT)
    assert not eval_pred(Not(FieldTest("port", "ext")), EXT)
    for pk in (INT, EXT):
        assert eval_pred(Plus(FieldTest("port", "int"), FieldTest("port", "ext")), pk)
        assert eval_pred(ONE, pk) and not eval_pred(ZERO, pk)


def test_eval_policy():
    assert eval_policy(seq(FieldTest("port", "int"), Assign("port", "ext")), INT) == {EXT}
    assert eval_policy(seq(FieldTest("port", "ext"), ZERO), EXT) == frozenset()
    assert eval_policy(Star(ZERO), INT) == {INT}


def test_unknown_field():
    with pytest.raises(SchemaError):
        eval_pred(FieldTest("vlan", 1), INT)
    with pytest.raises(SchemaError):
        normalize(Assign("port", "dmz"), FW)


def test_normalize_examples():
    mod_filter = seq(Assign("port", "ext"), FieldTest("port", "ext"))
    assert normalize(mod_filter, FW) == normalize(Assign("port", "ext"), FW)
    assert normalize(ZERO, FW).is_empty()
    assert normalize(ONE, FW) == NkRelation(FW, [(0, 0), (1, 1)])


def test_nk_is_zero():
    assert nk_is_zero(seq(FieldTest("port", "ext"), FieldTest("port", "int")), FW)
    assert not nk_is_zero(seq(FieldTest("port", "ext"), Assign("port", "int"), FieldTest("port", "int")), FW)


def test_relation_round_trip():
    p = parse_policy("(port = int) . (port <- ext) + (port = ext)")
    rel = normalize(p, FW)
    assert normalize(relation_to_policy(rel), FW) == rel
    assert set(rel) == {(INT, EXT), (EXT, EXT)}


def test_format_parse_round_trip():
    p = parse_policy("~(f = 0 + g = a) . (f <- 1)* + one")
    assert nk_equiv(parse_policy(format_policy(p)), p, SCHEMA2)


def test_star_needs_iterates():
    # f counts 0 -> 1 -> 2 only through repeated application
    step = Plus(seq(FieldTest("f", 0), Assign("f", 1)), seq(FieldTest("f", 1), Assign("f", 2)))
    rel = normalize(Star(step), SCHEMA3)
    s = SCHEMA3
    a = s.make(f=0, g="a")
    assert (a, s.make(f=2, g="a")) in rel
    assert (s.make(f=2, g="a"), a) not in rel


def test_oracle_suite_slice():
    r = netkat_oracle_suite(120, seed=41)
    assert r.ok, r.failures[:3]


def test_axiom_suite_slice():
    rs = netkat_axiom_suite(30, seed=43)
    bad = [str(r) for r in rs.values() if not r.ok]
    assert not bad


@settings(max_examples=60, deadline=None)
@given(policies(SCHEMA2, depth=5))
def test_normalize_matches_reference(p):
    assert normalize(p, SCHEMA2).pairs == ref_relation(p, SCHEMA2)
    for pk in (SCHEMA2.packet(i) for i in range(SCHEMA2.size)):
        outs = {b for a, b in normalize(p, SCHEMA2) if a == pk}
        assert outs == set(eval_policy(p, pk))


@settings(max_examples=60, deadline=None)
@given(policies(SCHEMA2, depth=4))
def test_star_is_reflexive_transitive_closure(p):
    body = normalize(p, SCHEMA2).pairs
    star = normalize(Star(p), SCHEMA2).pairs
    assert {(i, i) for i in range(SCHEMA2.size)} <= star
    assert body <= star
    assert all((a, d) in star for a, b in star for c, d in star if b == c)


@settings(max_examples=60, deadline=None)
@given(policies(SCHEMA2, depth=3), policies(SCHEMA2, depth=3))
def test_monotone_and_commutative(p, q):
    assert normalize(p, SCHEMA2).pairs <= normalize(Plus(p, q), SCHEMA2).pairs
    assert nk_equiv(Plus(p, q), Plus(q, p), SCHEMA2)


@settings(max_examples=60, deadline=None)
@given(predicates(SCHEMA3))
def test_predicates_are_subidentities(a):
    rel = normalize(a, SCHEMA3)
    assert all(x == y for x, y in rel.pairs)
    neg = normalize(Not(a), SCHEMA3)
    assert rel.pairs | neg.pairs == {(i, i) for i in range(SCHEMA3.size)}
    assert not rel.pairs & neg.pairs
    assert nk_is_zero(Seq(a, Not(a)), SCHEMA3)
