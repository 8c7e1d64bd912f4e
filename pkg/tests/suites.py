"""Randomised cross-check suites with brute-force oracles.

Each suite returns a SuiteResult; the acceptance module runs them at full size
and the per-module tests run smaller slices.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from dynetkat.equivalence import bisimilar, bounded_equiv, is_trace, semantic_layering_check
from dynetkat.netkat import (
    ONE,
    ZERO,
    Assign,
    Not,
    Plus,
    Seq,
    Star,
    Test,
    eval_policy,
    nk_equiv,
    normalize,
    pair_policy,
    plus,
    relation_to_policy,
)
from dynetkat.normalizer import Normalizer
from dynetkat.safety import (
    Alphabet,
    AlphabetError,
    Alt,
    Cat,
    Letter,
    NotAct,
    Power,
    SafetyProp,
    TrueAct,
    check_safe,
    derive_alphabet,
    forbidden_words,
    prop_to_dnk,
)
from dynetkat.semantics import Flow, RcfgL, RecvL, SendL
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
    RestrictionSet,
    Send,
    SeqN,
)

from randgen import CHANNELS, SCHEMA1, SCHEMA2, SCHEMA3, comm_policy, rand_closed, rand_policy, rand_pred, rand_restriction


@dataclass
class SuiteResult:
    name: str
    total: int = 0
    passed: int = 0
    failures: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.total > 0 and self.passed == self.total

    def record(self, ok: bool, info=None):
        self.total += 1
        if ok:
            self.passed += 1
        elif len(self.failures) < 5:
            self.failures.append(info)

    def __str__(self):
        return f"{self.name}: {self.passed}/{self.total}"


# reference NetKAT evaluator ------------------------------------------------------
# Written against plain dicts, independent of the package's evaluators.


def ref_eval(p, pk: dict) -> list[dict]:
    def key(d):
        return tuple(sorted(d.items()))

    def uniq(ds):
        out = {}
        for d in ds:
            out.setdefault(key(d), d)
        return list(out.values())

    if p == ZERO:
        return []
    if p == ONE:
        return [pk]
    if isinstance(p, Test):
        return [pk] if pk[p.field] == p.value else []
    if isinstance(p, Assign):
        return [dict(pk, **{p.field: p.value})]
    if isinstance(p, Not):
        return [] if ref_eval(p.arg, pk) else [pk]
    if isinstance(p, Plus):
        return uniq(ref_eval(p.left, pk) + ref_eval(p.right, pk))
    if isinstance(p, Seq):
        return uniq([b for a in ref_eval(p.left, pk) for b in ref_eval(p.right, a)])
    if isinstance(p, Star):
        seen = {key(pk): pk}
        frontier = [pk]
        while frontier:
            nxt = []
            for a in frontier:
                for b in ref_eval(p.arg, a):
                    if key(b) not in seen:
                        seen[key(b)] = b
                        nxt.append(b)
            frontier = nxt
        return list(seen.values())
    raise TypeError(p)


def ref_relation(p, schema) -> set:
    out = set()
    for i in range(schema.size):
        d = schema.packet(i).as_dict()
        for e in ref_eval(p, d):
            out.add((i, schema.index_of(e)))
    return out


def netkat_oracle_suite(n: int = 500, seed: int = 5, depth: int = 5) -> SuiteResult:
    """normalize against eval_policy and the dict reference, pointwise."""
    res = SuiteResult("normalize = eval_policy = reference")
    rng = random.Random(seed)
    for _ in range(n):
        schema = rng.choice((SCHEMA1, SCHEMA2))
        p = rand_policy(rng, schema, depth)
        rel = normalize(p, schema)
        ref = ref_relation(p, schema)
        ok = True
        for pk in schema.packets():
            got = {b.index for a, b in rel if a.index == pk.index}
            ev = {b.index for b in eval_policy(p, pk)}
            want = {j for i, j in ref if i == pk.index}
            if not (got == ev == want):
                ok = False
                break
        res.record(ok, p)
    return res


def _le(p, q, schema) -> bool:
    return nk_equiv(Plus(p, q), q, schema)


def netkat_axiom_instances(rng, schema):
    """One instance of every dup-free NetKAT axiom: name -> (lhs, rhs)."""
    P = lambda: rand_policy(rng, schema, 3)  # noqa: E731
    A = lambda: rand_pred(rng, schema, 2)  # noqa: E731
    p, q, r = P(), P(), P()
    a, b, c = A(), A(), A()
    fs = list(schema.fields)
    f = rng.choice(fs)
    dom = schema.domains[schema.field_pos(f)]
    n, n2 = rng.sample(dom, 2)
    inst = {
        "KA-PLUS-ASSOC": (Plus(p, Plus(q, r)), Plus(Plus(p, q), r)),
        "KA-PLUS-COMM": (Plus(p, q), Plus(q, p)),
        "KA-PLUS-ZERO": (Plus(p, ZERO), p),
        "KA-PLUS-IDEM": (Plus(p, p), p),
        "KA-SEQ-ASSOC": (Seq(p, Seq(q, r)), Seq(Seq(p, q), r)),
        "KA-ONE-SEQ": (Seq(ONE, p), p),
        "KA-SEQ-ONE": (Seq(p, ONE), p),
        "KA-SEQ-DIST-L": (Seq(p, Plus(q, r)), Plus(Seq(p, q), Seq(p, r))),
        "KA-SEQ-DIST-R": (Seq(Plus(p, q), r), Plus(Seq(p, r), Seq(q, r))),
        "KA-ZERO-SEQ": (Seq(ZERO, p), ZERO),
        "KA-SEQ-ZERO": (Seq(p, ZERO), ZERO),
        "KA-UNROLL-L": (Plus(ONE, Seq(p, Star(p))), Star(p)),
        "KA-UNROLL-R": (Plus(ONE, Seq(Star(p), p)), Star(p)),
        "BA-PLUS-DIST": (Plus(a, Seq(b, c)), Seq(Plus(a, b), Plus(a, c))),
        "BA-PLUS-ONE": (Plus(a, ONE), ONE),
        "BA-EXCL-MID": (Plus(a, Not(a)), ONE),
        "BA-SEQ-COMM": (Seq(a, b), Seq(b, a)),
        "BA-CONTRA": (Seq(a, Not(a)), ZERO),
        "BA-SEQ-IDEM": (Seq(a, a), a),
        "PA-MOD-FILTER": (Seq(Assign(f, n), Test(f, n)), Assign(f, n)),
        "PA-FILTER-MOD": (Seq(Test(f, n), Assign(f, n)), Test(f, n)),
        "PA-MOD-MOD": (Seq(Assign(f, n), Assign(f, n2)), Assign(f, n2)),
        "PA-CONTRA": (Seq(Test(f, n), Test(f, n2)), ZERO),
        "PA-MATCH-ALL": (plus(*(Test(f, v) for v in dom)), ONE),
    }
    if len(fs) > 1:
        g = next(x for x in fs if x != f)
        m = rng.choice(schema.domains[schema.field_pos(g)])
        inst["PA-MOD-MOD-COMM"] = (Seq(Assign(f, n), Assign(g, m)), Seq(Assign(g, m), Assign(f, n)))
        inst["PA-MOD-FILTER-COMM"] = (Seq(Assign(f, n), Test(g, m)), Seq(Test(g, m), Assign(f, n)))
    return inst


def netkat_axiom_suite(n: int = 200, seed: int = 11) -> dict[str, SuiteResult]:
    """Every axiom on ``n`` random instances, plus the two least fixed point
    rules as implications (and on instances where the premise holds)."""
    rng = random.Random(seed)
    out: dict[str, SuiteResult] = {}
    for i in range(n):
        schema = (SCHEMA2, SCHEMA3)[i % 2]
        for name, (lhs, rhs) in netkat_axiom_instances(rng, schema).items():
            out.setdefault(name, SuiteResult(name)).record(nk_equiv(lhs, rhs, schema), (lhs, rhs))
        p, q, s = (rand_policy(rng, schema, 3) for _ in range(3))
        # premise made true: r = p* . (q + s)
        r = Seq(Star(p), Plus(q, s)) if rng.random() < 0.5 else rand_policy(rng, schema, 3)
        prem = _le(Plus(q, Seq(p, r)), r, schema)
        ok = (not prem) or _le(Seq(Star(p), q), r, schema)
        out.setdefault("KA-LFP-L", SuiteResult("KA-LFP-L")).record(ok, (p, q, r))
        r2 = Seq(Plus(p, s), Star(q)) if rng.random() < 0.5 else rand_policy(rng, schema, 3)
        # p + q . r <= q  =>  p . r* <= q, with roles renamed to (p, q, r) = (p, r2, q)
        prem = _le(Plus(p, Seq(r2, q)), r2, schema)
        ok = (not prem) or _le(Seq(p, Star(q)), r2, schema)
        out.setdefault("KA-LFP-R", SuiteResult("KA-LFP-R")).record(ok, (p, q, r2))
    return out


# DyNetKAT axioms ------------------------------------------------------------------------

AXIOMS = (
    "A0", "A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10", "A11", "A12", "A13", "A14", "A15",
    "delta-bot", "delta-seq", "delta-seq-bot", "delta-oplus",
    "pi-0", "pi-bot", "pi-seq", "pi-oplus",
)


def _action(rng, schema, flow_pairs: bool = False):
    """A prefix constructor ``cont -> at ; cont`` and its label (None for flows)."""
    k = rng.random()
    if k < 0.35:
        if flow_pairs:
            a, b = rng.randrange(schema.size), rng.randrange(schema.size)
            pol = pair_policy(schema, a, b)
        else:
            pol = rand_policy(rng, schema, 2)
        return (lambda cont: SeqN(pol, cont)), None
    ctor, lab = rng.choice(((Recv, RecvL), (Send, SendL), (Rcfg, RcfgL)))
    chan = rng.choice(CHANNELS)
    pol = comm_policy(rng, schema)
    return (lambda cont: ctor(chan, pol, cont)), lab(chan, normalize(pol, schema), pol)


def _a15(rng, schema, p, q):
    kind = rng.randrange(5)
    z1, z2 = comm_policy(rng, schema), comm_policy(rng, schema)
    x1, x2 = rng.choice(CHANNELS), rng.choice(CHANNELS)
    if kind == 0:
        return CommMerge(SeqN(rand_policy(rng, schema, 2), p), q)
    if kind == 1:
        return CommMerge(Recv(x1, z1, p), Recv(x2, z2, q))
    if kind == 2:
        return CommMerge(Send(x1, z1, p), Send(x2, z2, q))
    if kind == 3:
        while x1 == x2 and nk_equiv(z1, z2, schema):
            x2 = rng.choice(CHANNELS)
            z2 = comm_policy(rng, schema)
        return CommMerge(Recv(x1, z1, p), Send(x2, z2, q))
    return CommMerge(Rcfg(x1, z1, p), q)


def axiom_instance(name: str, rng: random.Random, depth: int = 3):
    """(schema, defs, lhs, rhs) for one random closed instance of an axiom."""
    schema, defs, mk = rand_closed(rng, depth)
    p, q, r = mk(), mk(), mk()
    z, y = rand_policy(rng, schema, 2), rand_policy(rng, schema, 2)
    n = rng.randrange(0, 4)
    if name == "A0":
        pair = (SeqN(ZERO, p), BOT)
    elif name == "A1":
        pair = (SeqN(Plus(z, y), p), OPlus(SeqN(z, p), SeqN(y, p)))
    elif name == "A2":
        pair = (OPlus(p, q), OPlus(q, p))
    elif name == "A3":
        pair = (OPlus(OPlus(p, q), r), OPlus(p, OPlus(q, r)))
    elif name == "A4":
        pair = (OPlus(p, p), p)
    elif name == "A5":
        pair = (OPlus(p, BOT), p)
    elif name == "A6":
        pair = (Par(p, q), Par(q, p))
    elif name == "A7":
        pair = (Par(p, BOT), p)
    elif name == "A8":
        pair = (Par(p, q), OPlus(LeftMerge(p, q), OPlus(LeftMerge(q, p), CommMerge(p, q))))
    elif name == "A9":
        pair = (LeftMerge(BOT, p), BOT)
    elif name == "A10":
        at, _ = _action(rng, schema)
        pair = (LeftMerge(at(p), q), at(Par(p, q)))
    elif name == "A11":
        pair = (LeftMerge(OPlus(p, q), r), OPlus(LeftMerge(p, r), LeftMerge(q, r)))
    elif name == "A12":
        x = rng.choice(CHANNELS)
        zz = rand_policy(rng, schema, 2) if rng.random() < 0.5 else comm_policy(rng, schema)
        pair = (CommMerge(Recv(x, zz, p), Send(x, zz, q)), Rcfg(x, zz, Par(p, q)))
    elif name == "A13":
        pair = (CommMerge(OPlus(p, q), r), OPlus(CommMerge(p, r), CommMerge(q, r)))
    elif name == "A14":
        pair = (CommMerge(p, q), CommMerge(q, p))
    elif name == "A15":
        pair = (_a15(rng, schema, p, q), BOT)
    elif name == "delta-bot":
        pair = (Delta(rand_restriction(rng, schema), BOT), BOT)
    elif name == "delta-seq":
        L = rand_restriction(rng, schema)
        while True:
            at, lab = _action(rng, schema, flow_pairs=True)
            if lab is None or not L.blocks(lab):
                break
        pair = (Delta(L, at(p)), at(Delta(L, p)))
    elif name == "delta-seq-bot":
        while True:
            at, lab = _action(rng, schema, flow_pairs=True)
            if isinstance(lab, (RecvL, SendL)):
                break
        L = rand_restriction(rng, schema)
        L = RestrictionSet.of(schema, list(L) + [Action(lab.direction, lab.chan, lab.policy)])
        pair = (Delta(L, at(p)), BOT)
    elif name == "delta-oplus":
        L = rand_restriction(rng, schema)
        pair = (Delta(L, OPlus(p, q)), OPlus(Delta(L, p), Delta(L, q)))
    elif name == "pi-0":
        pair = (Proj(0, p), BOT)
    elif name == "pi-bot":
        pair = (Proj(n, BOT), BOT)
    elif name == "pi-seq":
        at, _ = _action(rng, schema, flow_pairs=True)
        pair = (Proj(n + 1, at(p)), at(Proj(n, p)))
    elif name == "pi-oplus":
        pair = (Proj(n, OPlus(p, q)), OPlus(Proj(n, p), Proj(n, q)))
    else:
        raise KeyError(name)
    return schema, defs, pair[0], pair[1]


def axiom_suite(n: int = 100, seed: int = 3, names=AXIOMS, normalizer_depth: int = 0) -> dict[str, SuiteResult]:
    """Bisimilarity of both sides on ``n`` instances per axiom.

    With ``normalizer_depth`` > 0 the rewriting engine is checked as well:
    the two sides must agree under bounded_equiv up to that depth.
    """
    out = {}
    for name in names:
        rng = random.Random(f"{seed}-{name}")
        res = SuiteResult(name)
        for _ in range(n):
            schema, defs, lhs, rhs = axiom_instance(name, rng)
            v = bisimilar(lhs, rhs, defs, schema)
            ok = v.equivalent
            if ok and normalizer_depth:
                ok = bounded_equiv(lhs, rhs, defs, schema, normalizer_depth)
            res.record(ok, (str(lhs), str(rhs), v.outcome))
        out[name] = res
    return out


# semantic layering ----------------------------------------------------------------------


def _related_policy(rng, p, schema):
    k = rng.randrange(6)
    if k == 0:
        return relation_to_policy(normalize(p, schema))
    if k == 1:
        return Plus(p, p)
    if k == 2:
        return Seq(ONE, Plus(p, ZERO))
    if k == 3:
        return Seq(p, Star(ZERO))
    return rand_policy(rng, schema, 3)


def layering_suite(n: int = 100, seed: int = 17) -> SuiteResult:
    res = SuiteResult("nk_equiv(p, q) <=> bisimilar(p ; d, q ; d)")
    rng = random.Random(seed)
    equal = 0
    for _ in range(n):
        schema, defs, mk = rand_closed(rng, 2)
        p = rand_policy(rng, schema, 3)
        q = _related_policy(rng, p, schema)
        d = mk()
        lr = semantic_layering_check(p, q, d, defs, schema)
        equal += lr.nk_equivalent
        res.record(lr.consistent, (p, q, d))
    res.notes.append(f"{equal} of {n} pairs NetKAT-equivalent")
    return res


# safety -----------------------------------------------------------------------------


def _rand_regexp(rng, A: Alphabet, depth: int):
    """A regexp over ``A`` whose forbidden words have length at most 3."""
    letters = list(A.letters)

    def atom():
        k = rng.random()
        a = rng.choice(letters)
        if k < 0.2:
            return TrueAct()
        if k < 0.4:
            return NotAct(Letter(a))
        return Letter(a)

    def go(d):
        if d <= 0:
            return atom()
        k = rng.random()
        if k < 0.3:
            return Alt(go(d - 1), go(d - 1))
        if k < 0.6:
            return Cat(go(d - 1), go(d - 1))
        if k < 0.75:
            return Power(atom(), rng.randrange(0, 3))
        return atom()

    return go(depth)


def _rand_safety_instance(rng):
    """A restricted term over flows and reconfigurations of a 2-packet
    schema, an alphabet of at most 4 letters covering its traces, and a
    property whose forbidden words have length at most 3."""
    from dynetkat.analysis import restrict_all

    schema = SCHEMA1
    while True:
        _, defs, mk = rand_closed(rng, 3, schema=schema)
        t = restrict_all(mk(), defs, CHANNELS)
        try:
            A0 = derive_alphabet(t, defs, schema, depth=3)
        except AlphabetError:  # no letters at all
            continue
        if len(A0) > 4:
            continue
        extras = [Flow(schema.packet(a), schema.packet(b)) for a in range(2) for b in range(2)]
        extras.append(RcfgL("x", normalize(ONE, schema), ONE))
        labels = list(A0.letters)
        rng.shuffle(extras)
        for e in extras:
            if len(labels) >= 4 or (len(labels) >= 1 and rng.random() < 0.4):
                break
            if e not in labels:
                labels.append(e)
        A = Alphabet(labels)
        for _ in range(20):
            r = _rand_regexp(rng, A, 2)
            words = forbidden_words(r, A, schema)
            M = max((len(w) for w in words), default=0)
            # forbidding the empty word is unsatisfiable and has no oracle
            if 1 <= M <= 3 and () not in words:
                return schema, defs, t, A, SafetyProp("r", r)


def safety_oracle(t, prop, A, defs, schema) -> bool:
    """Trace inclusion into the behaviour built by prop_to_dnk."""
    spec, defs2 = prop_to_dnk(prop, A, schema, defs)
    words = forbidden_words(prop, A, schema)
    M = max((len(w) for w in words), default=0)
    mine = Normalizer(defs2, schema).traces(t, M)
    allowed = Normalizer(defs2, schema).traces(spec, M)
    return mine <= allowed


def safety_suite(n: int = 50, seed: int = 23) -> SuiteResult:
    res = SuiteResult("check_safe = prop_to_dnk trace inclusion")
    rng = random.Random(seed)
    unsafe = 0
    for _ in range(n):
        schema, defs, t, A, prop = _rand_safety_instance(rng)
        got = check_safe(t, prop, A, defs, schema)
        want = safety_oracle(t, prop, A, defs, schema)
        unsafe += not want
        ok = got.safe == want
        if ok and not got.safe:
            ok = is_trace(t, got.witness, defs, schema)
        res.record(ok, (str(t), str(prop), got, want))
    res.notes.append(f"{unsafe} of {n} instances unsafe")
    return res


# AIP ------------------------------------------------------------------------------------


def _bisimilar_variant(rng, p, defs, schema):
    k = rng.randrange(6)
    if k == 0:
        return OPlus(p, p)
    if k == 1:
        return OPlus(BOT, p)
    if k == 2:
        return Par(p, BOT)
    if k == 3:
        return Normalizer(defs, schema).hnf(p).to_term()
    if k == 4 and isinstance(p, Par):
        return Par(p.right, p.left)
    return OPlus(p, Proj(0, p))


def aip_suite(n: int = 50, seed: int = 29, max_n: int = 8) -> SuiteResult:
    """Bisimilar pairs agree on every projection up to ``max_n``; for
    inequivalent pairs some projection up to ``max_n`` differs, or the
    distinguishing witness is longer than ``max_n``."""
    res = SuiteResult("bisimilar vs bounded_equiv up to 8")
    rng = random.Random(seed)
    eq_pairs = 0
    long_witness = 0
    tried = 0
    while eq_pairs < n:
        tried += 1
        schema, defs, mk = rand_closed(rng, 2)
        p = mk()
        q = _bisimilar_variant(rng, p, defs, schema) if rng.random() < 0.6 else mk()
        v = bisimilar(p, q, defs, schema)
        if v.outcome == "inconclusive":
            continue
        if v.equivalent:
            eq_pairs += 1
            ok = all(bounded_equiv(p, q, defs, schema, k) for k in range(max_n + 1))
            res.record(ok, ("equivalent pair differs on a projection", str(p), str(q)))
        else:
            L = len(v.witness.word)
            if L > max_n:
                long_witness += 1
                res.record(True)
                continue
            # the witness is as long as the first projection that differs
            ok = not bounded_equiv(p, q, defs, schema, L) and all(
                bounded_equiv(p, q, defs, schema, k) for k in range(L)
            )
            res.record(ok, ("witness shorter than the bound but projections agree", str(p), str(q), L))
    res.notes.append(f"{eq_pairs} equivalent pairs among {tried} tried; {long_witness} witnesses longer than {max_n}")
    return res
