import random

import pytest
from hypothesis import given, settings

from dynetkat.analysis import FIXTURES, fixture_text
from dynetkat.netkat import ONE, Assign, Test as FieldTest, seq
from dynetkat.safety import Alt, Cat, FlowAct, NotAct, Power, RcfgAct, TrueAct
from dynetkat.syntax import (
    ArityMismatch,
    DnkParseError,
    DnkSyntaxError,
    ElaborationError,
    GuardednessError,
    LexError,
    ProgramFile,
    UndefinedName,
    format_program,
    load_model,
    parse_program,
    parse_term,
)
from dynetkat.terms import (
    BOT,
    Action,
    CommMerge,
    Delta,
    LeftMerge,
    OPlus,
    Par,
    Proj,
    Rcfg,
    Recv,
    Send,
    SeqN,
    Var,
    format_term,
)
from randgen import CHANNELS, comm_policy, rand_closed, rand_policy, rand_restriction, seeds


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_fixture_round_trip(name):
    pf = parse_program(fixture_text(name))
    text = format_program(pf)
    assert parse_program(text) == pf
    assert format_program(parse_program(text)) == text


def test_firewall_structure():
    pf = parse_program(fixture_text("firewall"))
    assert list(pf.dnk) == ["Host", "Switch", "Switch'"]
    assert format_term(pf.init) == "Host || Switch"
    assert pf.fields == [("port", ["int", "ext"])]


def test_small_round_trip():
    text = "fields { f : {0, 1}; }\ndnk X = one ; X;\ninit = X;\n"
    pf = parse_program(text)
    assert pf.dnk["X"] == (None, SeqN(ONE, Var("X")))
    assert parse_program(format_program(pf)) == pf


def test_trailing_bot_is_implicit():
    assert parse_term("x ? one") == Recv("x", ONE, BOT)
    assert parse_term("x ! one (+) (f = 0) . (f <- 1)") == OPlus(
        Send("x", ONE, BOT), SeqN(seq(FieldTest("f", 0), Assign("f", 1)), BOT)
    )


def test_precedence():
    t = parse_term("a ? one ; bot || b ! one ; bot (+) bot")
    assert isinstance(t, OPlus) and isinstance(t.left, Par)
    t = parse_term("x ? one ; y ! one ; bot (+) bot (+) bot")
    # right-nested choice
    assert isinstance(t.right, OPlus)
    assert parse_term("pi[2](delta{x ? *}(bot))") == Proj(2, Delta((Action("?", "x"),), BOT))
    assert parse_term("rcfg(x, one) ; bot") == Rcfg("x", ONE, BOT)


def _located(exc, text):
    with pytest.raises(exc) as e:
        load_model(text)
    return e.value


def test_error_classes():
    e = _located(LexError, "fields { f : {0, 1}; }\ninit = @;")
    assert (e.line, e.col) == (2, 8)
    e = _located(DnkSyntaxError, "fields { f : {0, 1}; }\ninit = x ? one\n")
    assert e.line >= 2
    e = _located(UndefinedName, "fields { f : {0, 1}; }\ninit = Y;")
    assert e.line == 2
    e = _located(ArityMismatch, "fields { f : {0, 1}; }\nset S = {one};\ndnk K[A] = x ? A ; K[A];\ninit = K;")
    assert e.line == 4
    _located(ElaborationError, "fields { f : {0, 1}; }\ninit = (g = 0) ; bot;")
    for cls in (LexError, DnkSyntaxError, UndefinedName, ArityMismatch, GuardednessError):
        assert issubclass(cls, DnkParseError)
    assert len({LexError, DnkSyntaxError, UndefinedName, ArityMismatch, GuardednessError}) == 5


def test_unguarded_definition_is_located():
    text = "fields { f : {0, 1}; }\n\ndnk X = X;\ninit = X;\n"
    pf = parse_program(text)
    assert pf.dnk["X"] == (None, Var("X"))
    e = _located(GuardednessError, text)
    assert e.line == 3 and "X -> X" in str(e)
    assert load_model(text, check_guards=False).init == Var("X")


# random programs -------------------------------------------------------------------------


def _surface(t):
    """The parser's view of a term: restrictions as plain action tuples."""
    if isinstance(t, Delta):
        return Delta(tuple(t.blocked.display), _surface(t.body))
    if isinstance(t, (OPlus, Par, LeftMerge, CommMerge)):
        return type(t)(_surface(t.left), _surface(t.right))
    if isinstance(t, SeqN):
        return SeqN(t.policy, _surface(t.rest))
    if isinstance(t, (Recv, Send, Rcfg)):
        return type(t)(t.chan, t.policy, _surface(t.rest))
    if isinstance(t, Proj):
        return Proj(t.n, _surface(t.body))
    return t


def _rand_act(rng, schema):
    if rng.random() < 0.5:
        f = schema.fields[0]
        return FlowAct(FieldTest(f, rng.choice(schema.domains[0])), Assign(f, rng.choice(schema.domains[0])))
    return RcfgAct(rng.choice(CHANNELS), comm_policy(rng, schema))


def _rand_prop(rng, schema, depth=2):
    if depth <= 0 or rng.random() < 0.3:
        k = rng.random()
        if k < 0.2:
            return TrueAct()
        if k < 0.4:
            return NotAct(_rand_act(rng, schema))
        return _rand_act(rng, schema)
    k = rng.randrange(3)
    if k == 0:
        return Alt(_rand_prop(rng, schema, depth - 1), _rand_prop(rng, schema, depth - 1))
    if k == 1:
        return Cat(_rand_prop(rng, schema, depth - 1), _rand_prop(rng, schema, depth - 1))
    return Power(_rand_prop(rng, schema, 0), rng.choice([1, 2, "n"]))


def random_program(seed) -> ProgramFile:
    rng = random.Random(seed)
    schema, defs, mk = rand_closed(rng, 3)
    pf = ProgramFile()
    pf.fields = [(f, list(d)) for f, d in zip(schema.fields, schema.domains)]
    pf.channels = list(CHANNELS)
    pf.netkat = {f"P{i}": rand_policy(rng, schema, 3) for i in range(rng.randint(0, 2))}
    pf.dnk = {n: (None, _surface(b)) for n, b in defs.bodies.items()}
    init = _surface(mk())
    if rng.random() < 0.3:
        init = LeftMerge(init, _surface(mk(1)))
    if rng.random() < 0.3:
        init = CommMerge(_surface(mk(1)), init)
    pf.init = init
    if rng.random() < 0.5:
        pf.restrict = list(rand_restriction(rng, schema))
    if rng.random() < 0.5:
        pf.alphabet = [_rand_act(rng, schema) for _ in range(rng.randint(1, 3))]
        pf.props = {"s": _rand_prop(rng, schema)}
    return pf


def test_two_hundred_random_programs():
    for seed in range(200):
        pf = random_program(seed)
        text = format_program(pf)
        back = parse_program(text)
        assert back == pf, text
        assert format_program(back) == text


@settings(max_examples=50, deadline=None)
@given(seeds)
def test_random_programs_round_trip(seed):
    pf = random_program(seed)
    assert parse_program(format_program(pf)) == pf
