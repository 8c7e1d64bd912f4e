import itertools
import random

import pytest
from hypothesis import given, settings

from dynetkat.analysis import load_fixture
from dynetkat.equivalence import ForbidLabel, is_trace, trace_included
from dynetkat.netkat import ONE, normalize
from dynetkat.normalizer import Normalizer
from dynetkat.safety import (
    Alphabet,
    AlphabetError,
    Alt,
    Cat,
    Empty,
    Eps,
    Letter,
    NotAct,
    Power,
    SafetyError,
    SafetyProp,
    TrueAct,
    check_safe,
    derive_alphabet,
    desugar,
    forbidden_words,
    hnf,
    prop_to_dnk,
)
from dynetkat.semantics import Flow, RcfgL
from dynetkat.syntax import parse_regexp
from dynetkat.terms import BOT
from randgen import seeds
from suites import _rand_regexp, _rand_safety_instance, safety_suite

FW = load_fixture("firewall")
S = FW.schema
I, E = S.make(port="int"), S.make(port="ext")
ONE_REL = normalize(ONE, S)
SCR = RcfgL("secConReq", ONE_REL)
SCE = RcfgL("secConEnd", ONE_REL)


@pytest.mark.parametrize("n", range(5))
def test_firewall_family_safe(n):
    r = check_safe(FW.restricted(), FW.prop("s").at(n), FW.alphabet, FW.defs, S)
    assert r.safe and r.depth == n + 1


def test_controllers_unsafe_at_two():
    m = load_fixture("controllers-independent")
    sch = m.schema
    A = derive_alphabet(m.restricted(), m.defs, sch, depth=3)
    r = check_safe(m.restricted(), m.prop("s").at(2), A, m.defs, sch)
    assert not r.safe
    bad = Flow(sch.make(port=2), sch.make(port=15))
    ft4, ft6 = normalize(m.policy("ft4"), sch), normalize(m.policy("ft6"), sch)
    assert len(r.witness) == 3 and r.witness[-1] == bad
    assert set(r.witness[:2]) == {RcfgL("upS4", ft4), RcfgL("upS6", ft6)}
    assert is_trace(m.restricted(), r.witness, m.defs, sch)
    assert is_trace(m.restricted(), (RcfgL("upS6", ft6), RcfgL("upS4", ft4), bad), m.defs, sch)
    assert check_safe(m.restricted(), m.prop("s").at(1), A, m.defs, sch).safe


def test_sync_controllers_never_route_2_to_15():
    m = load_fixture("controllers-sync")
    sch = m.schema
    bad = Flow(sch.make(port=2), sch.make(port=15))
    assert trace_included(m.restricted(), ForbidLabel(frozenset({bad})), m.defs, sch, depth=12)


def test_bot_is_safe():
    r = parse_regexp("true . flow(port = ext, port <- int)")
    assert check_safe(BOT, SafetyProp("s", r), FW.alphabet, FW.defs, S)


def test_desugar_examples():
    A3 = Alphabet([Flow(I, E), Flow(E, I), SCR])
    assert set(hnf(desugar(TrueAct(), A3, S))) == {(a,) for a in A3}
    neg = desugar(parse_regexp("!rcfg(secConReq, one)"), FW.alphabet, S)
    assert hnf(neg) == ((SCE,),)
    a = parse_regexp("flow(port = int, port <- ext)")
    assert desugar(Power(a, 1), A3, S) == desugar(a, A3, S)
    assert hnf(desugar(Power(a, 0), A3, S)) == ((),)


def test_negated_flow_stays_among_flows():
    neg = desugar(NotAct(Letter(Flow(I, E))), FW.alphabet, S)
    assert hnf(neg) == ((Flow(E, I),),)


def test_act_outside_alphabet():
    A = Alphabet([Flow(I, E)])
    with pytest.raises(AlphabetError):
        desugar(Letter(SCR), A, S)
    with pytest.raises(AlphabetError):
        Alphabet([])


def test_hnf_examples():
    a, b, c, d = (Letter(x) for x in (Flow(I, E), Flow(E, I), SCR, SCE))
    assert hnf(Cat(a, Alt(b, c))) == ((Flow(I, E), Flow(E, I)), (Flow(I, E), SCR))
    assert hnf(a) == ((Flow(I, E),),)
    assert len(hnf(Cat(Alt(a, b), Alt(c, d)))) == 4


def test_prop_to_dnk_examples():
    A = Alphabet([Flow(I, E), SCR])
    t, defs = prop_to_dnk(TrueAct(), A, S)
    assert t == BOT
    single = Alphabet([SCR])
    t, defs = prop_to_dnk(Cat(Letter(SCR), Letter(SCR)), single, S)
    assert Normalizer(defs, S).traces(t, 3) == {(), (SCR,)}


def test_empty_word_cannot_be_forbidden():
    with pytest.raises(SafetyError):
        prop_to_dnk(Eps(), FW.alphabet, S)
    r = check_safe(BOT, Eps(), FW.alphabet, FW.defs, S)
    assert not r.safe and r.witness == ()


def test_unrestricted_sends_rejected():
    with pytest.raises(AlphabetError):
        check_safe(FW.init, FW.prop("s").at(1), FW.alphabet, FW.defs, S)


def test_symbolic_power_needs_n():
    with pytest.raises(SafetyError):
        forbidden_words(FW.prop("s"), FW.alphabet, S)


def test_safety_suite_slice():
    r = safety_suite(20, seed=81)
    assert r.ok, r.failures[:2]


def _matches(r, w) -> bool:
    if isinstance(r, Letter):
        return w == (r.label,)
    if isinstance(r, Eps):
        return w == ()
    if isinstance(r, Empty):
        return False
    if isinstance(r, Alt):
        return _matches(r.left, w) or _matches(r.right, w)
    if isinstance(r, Cat):
        return any(_matches(r.left, w[:k]) and _matches(r.right, w[k:]) for k in range(len(w) + 1))
    raise TypeError(r)


@settings(max_examples=60, deadline=None)
@given(seeds)
def test_hnf_preserves_language(seed):
    rng = random.Random(seed)
    A = Alphabet(rng.sample([Flow(I, E), Flow(E, I), SCR, SCE], rng.randint(1, 4)))
    r = desugar(_rand_regexp(rng, A, 3), A, S)
    words = set(hnf(r))
    for n in range(5):
        for w in itertools.product(A.letters, repeat=n):
            assert (w in words) == _matches(r, w)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_safety_monotone_in_forbidden_set(seed):
    rng = random.Random(seed)
    schema, defs, t, A, prop = _rand_safety_instance(rng)
    W = forbidden_words(prop, A, schema)
    if not check_safe(t, prop, A, defs, schema):
        return
    sub = [w for w in W if rng.random() < 0.5] or [W[0]]
    r = Empty()
    for w in sub:
        acc = Eps()
        for a in reversed(w):
            acc = Cat(Letter(a), acc)
        r = Alt(acc, r)
    assert check_safe(t, r, A, defs, schema)
