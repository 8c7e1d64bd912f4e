"""Safety properties ``[r] false``: the forbidden-word language of ``r`` must
not occur as a prefix of any trace of the network."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence, Union

from .netkat import Policy, format_policy, normalize, pair_policy, relation_to_policy
from .packets import FieldSchema, Packet
from .semantics import Flow, RcfgL, StateBudgetExceeded, format_word, state_budget, term_step
from .terms import BOT, Definitions, Rcfg, SeqN, Term, Var, canonical, oplus, term_key


class SafetyError(ValueError):
    pass


class AlphabetError(SafetyError):
    pass


# regular expressions ---------------------------------------------------------


@dataclass(frozen=True)
class FlowAct:
    test: Policy
    assign: Policy

    def __str__(self):
        return f"flow({format_policy(self.test)}, {format_policy(self.assign)})"


@dataclass(frozen=True)
class RcfgAct:
    chan: str
    policy: Policy

    def __str__(self):
        return f"rcfg({self.chan}, {format_policy(self.policy)})"


@dataclass(frozen=True)
class Letter:
    """An act already bound to a transition label of a schema."""

    label: object

    def __str__(self):
        return letter_text(self.label)


@dataclass(frozen=True)
class NotAct:
    act: object

    def __str__(self):
        return f"!{self.act}"


@dataclass(frozen=True)
class TrueAct:
    def __str__(self):
        return "true"


@dataclass(frozen=True)
class Alt:
    left: object
    right: object

    def __str__(self):
        return f"{_ropnd(self.left, 2)} + {_ropnd(self.right, 1)}"


@dataclass(frozen=True)
class Cat:
    left: object
    right: object

    def __str__(self):
        return f"{_ropnd(self.left, 3)} . {_ropnd(self.right, 2)}"


@dataclass(frozen=True)
class Power:
    body: object
    n: Union[int, str]

    def __str__(self):
        return f"{_ropnd(self.body, 4)}^{self.n}"


@dataclass(frozen=True)
class Empty:
    """The empty language (an empty sum)."""

    def __str__(self):
        return "empty"


@dataclass(frozen=True)
class Eps:
    """The language holding only the empty word."""

    def __str__(self):
        return "eps"


Regexp = Union[FlowAct, RcfgAct, Letter, NotAct, TrueAct, Alt, Cat, Power, Empty, Eps]


def _rprec(r) -> int:
    return {Alt: 1, Cat: 2, Power: 3, NotAct: 3}.get(type(r), 4)


def _ropnd(r, need: int) -> str:
    s = str(r)
    return f"({s})" if _rprec(r) < need else s


def format_regexp(r) -> str:
    return str(r)


@dataclass(frozen=True)
class SafetyProp:
    name: str
    regexp: Regexp

    @property
    def is_family(self) -> bool:
        return _has_symbolic_power(self.regexp)

    def at(self, n: int) -> "SafetyProp":
        return SafetyProp(self.name, instantiate(self.regexp, n))

    def __str__(self):
        return f"[{self.regexp}] false"


def _has_symbolic_power(r) -> bool:
    if isinstance(r, Power):
        return isinstance(r.n, str) or _has_symbolic_power(r.body)
    if isinstance(r, (Alt, Cat)):
        return _has_symbolic_power(r.left) or _has_symbolic_power(r.right)
    return False


def instantiate(r, n: int):
    """Replace the symbolic exponent of a property family by ``n``."""
    if isinstance(r, Power):
        k = n if isinstance(r.n, str) else r.n
        return Power(instantiate(r.body, n), k)
    if isinstance(r, (Alt, Cat)):
        return type(r)(instantiate(r.left, n), instantiate(r.right, n))
    return r


# alphabets -------------------------------------------------------------------------


def letter_text(label) -> str:
    if isinstance(label, Flow):
        s = label.src.schema
        test = " . ".join(f"{f}={v}" for f, v in zip(s.fields, label.src.values))
        asg = " . ".join(f"{f}<-{v}" for f, v in zip(s.fields, label.dst.values))
        return f"flow({test}, {asg})"
    if isinstance(label, RcfgL):
        pol = format_policy(label.policy) if label.policy is not None else format_policy(relation_to_policy(label.relation))
        return f"rcfg({label.chan}, {pol})"
    raise SafetyError(f"not an alphabet letter: {label}")


def bind_act(act, schema: FieldSchema):
    """The transition label an act stands for."""
    if isinstance(act, Letter):
        return act.label
    if isinstance(act, FlowAct):
        t = normalize(act.test, schema)
        if len(t) != 1 or any(a != b for a, b in t.pairs):
            raise SafetyError(f"{format_policy(act.test)} is not a complete test")
        src = next(iter(t.pairs))[0]
        asg = normalize(act.assign, schema)
        outs = {b for _, b in asg.pairs}
        if len(asg) != schema.size or len(outs) != 1:
            raise SafetyError(f"{format_policy(act.assign)} is not a complete assignment")
        return Flow(Packet(schema, src), Packet(schema, outs.pop()))
    if isinstance(act, RcfgAct):
        return RcfgL(act.chan, normalize(act.policy, schema), act.policy)
    raise SafetyError(f"not an act: {act}")


class Alphabet:
    """A finite, non-empty, canonically ordered set of flow and rcfg letters."""

    def __init__(self, labels: Iterable):
        labs = []
        seen = set()
        for a in labels:
            if not isinstance(a, (Flow, RcfgL)):
                raise AlphabetError(f"alphabet letters are flows and reconfigurations, not {a}")
            if a not in seen:
                seen.add(a)
                labs.append(a)
        if not labs:
            raise AlphabetError("empty alphabet")
        self.letters = tuple(sorted(labs, key=lambda a: a.sort_key()))
        self._set = frozenset(self.letters)

    @classmethod
    def from_acts(cls, acts: Iterable, schema: FieldSchema) -> "Alphabet":
        return cls(bind_act(a, schema) for a in acts)

    def __contains__(self, label) -> bool:
        return label in self._set

    def __iter__(self):
        return iter(self.letters)

    def __len__(self):
        return len(self.letters)

    @property
    def flows(self) -> tuple:
        return tuple(a for a in self.letters if isinstance(a, Flow))

    @property
    def rcfgs(self) -> tuple:
        return tuple(a for a in self.letters if isinstance(a, RcfgL))

    def __str__(self):
        return "alphabet { " + " ".join(letter_text(a) + ";" for a in self.letters) + " }"


def _sum(labels: Sequence) -> Regexp:
    if not labels:
        return Empty()
    acc = Letter(labels[-1])
    for a in reversed(labels[:-1]):
        acc = Alt(Letter(a), acc)
    return acc


def desugar(r: Regexp, A: Alphabet, schema: FieldSchema) -> Regexp:
    """Remove negation, ``true`` and powers using the alphabet."""
    if isinstance(r, (FlowAct, RcfgAct, Letter)):
        a = bind_act(r, schema)
        if a not in A:
            raise AlphabetError(f"{letter_text(a)} is not in the alphabet")
        return Letter(a)
    if isinstance(r, TrueAct):
        return _sum(A.letters)
    if isinstance(r, NotAct):
        if not isinstance(r.act, (FlowAct, RcfgAct, Letter)):
            raise SafetyError("negation applies to a single flow or rcfg act")
        a = bind_act(r.act, schema)
        if a not in A:
            raise AlphabetError(f"{letter_text(a)} is not in the alphabet")
        pool = A.flows if isinstance(a, Flow) else A.rcfgs
        return _sum([b for b in pool if b != a])
    if isinstance(r, (Alt, Cat)):
        return type(r)(desugar(r.left, A, schema), desugar(r.right, A, schema))
    if isinstance(r, Power):
        if isinstance(r.n, str):
            raise SafetyError(f"power {r.n} must be instantiated first")
        if r.n < 0:
            raise SafetyError("negative power")
        if r.n == 0:
            return Eps()
        body = desugar(r.body, A, schema)
        acc = body
        for _ in range(r.n - 1):
            acc = Cat(body, acc)
        return acc
    if isinstance(r, (Empty, Eps)):
        return r
    raise SafetyError(f"not a regular expression: {r!r}")


def hnf(r: Regexp) -> tuple[tuple, ...]:
    """The words of a desugared expression, by distributing concatenation
    over sums. Order follows the expression; duplicates are dropped."""
    if isinstance(r, Letter):
        return ((r.label,),)
    if isinstance(r, Empty):
        return ()
    if isinstance(r, Eps):
        return ((),)
    if isinstance(r, Alt):
        return _uniq(hnf(r.left) + hnf(r.right))
    if isinstance(r, Cat):
        return _uniq(tuple(u + v for u in hnf(r.left) for v in hnf(r.right)))
    raise SafetyError(f"desugar before computing words: {r}")


def _uniq(words) -> tuple:
    seen = set()
    out = []
    for w in words:
        if w not in seen:
            seen.add(w)
            out.append(w)
    return tuple(out)


def forbidden_words(prop: SafetyProp | Regexp, A: Alphabet, schema: FieldSchema) -> tuple[tuple, ...]:
    r = prop.regexp if isinstance(prop, SafetyProp) else prop
    if _has_symbolic_power(r):
        raise SafetyError("property family: choose n first")
    return hnf(desugar(r, A, schema))


# semantic map ---------------------------------------------------------------------


def letter_term(a, cont: Term) -> Term:
    if isinstance(a, Flow):
        return SeqN(pair_policy(a.src.schema, a.src.index, a.dst.index), cont)
    pol = a.policy if a.policy is not None else relation_to_policy(a.relation)
    return Rcfg(a.chan, pol, cont)


def word_term(word: Sequence, cont: Term) -> Term:
    t = cont
    for a in reversed(word):
        t = letter_term(a, t)
    return t


THETA = "Theta__"


def prop_to_dnk(
    prop: SafetyProp | Regexp,
    A: Alphabet,
    schema: FieldSchema,
    defs: Definitions | None = None,
    budget: int = 100_000,
) -> tuple[Term, Definitions]:
    """The largest behaviour satisfying the property, as a term.

    Words shorter than the longest forbidden word ``M`` that avoid every
    forbidden prefix end in ``bot``; avoiding words of length ``M`` continue
    either with ``bot`` or with ``Theta``, which can do anything over ``A``.
    """
    W = set(forbidden_words(prop, A, schema))
    if () in W:
        # every behaviour has the empty trace, so none satisfies the property
        raise SafetyError("the property forbids the empty word")
    M = max((len(w) for w in W), default=0)
    if len(A) ** M > budget:
        raise SafetyError(f"|A|^M = {len(A) ** M} exceeds the budget; use check_safe")
    theta = Var(THETA)
    summands: list[Term] = []

    def avoids(w):
        return not any(w[:k] in W for k in range(1, len(w) + 1))

    for m in range(1, M + 1):
        for w in product(A.letters, repeat=m):
            if not avoids(w):
                continue
            summands.append(word_term(w, BOT))
            if m == M:
                summands.append(word_term(w, theta))
    theta_body = oplus(*(t for a in A.letters for t in (letter_term(a, BOT), letter_term(a, theta))))
    out = defs.copy() if defs is not None else Definitions(schema=schema)
    if THETA in out:
        raise SafetyError(f"name {THETA} already defined")
    out.bodies[THETA] = theta_body
    return oplus(*summands), out


# decision ------------------------------------------------------------------------------


@dataclass
class SafetyResult:
    safe: bool
    witness: tuple | None = None
    forbidden: int = 0
    depth: int = 0

    def __bool__(self):
        return self.safe

    def describe(self) -> str:
        if self.safe:
            return f"safe ({self.forbidden} forbidden words, depth {self.depth})"
        return "unsafe: " + format_word(self.witness)


def check_safe(
    i: Term,
    prop: SafetyProp | Regexp,
    A: Alphabet,
    defs: Definitions,
    schema: FieldSchema,
    max_states: int | None = None,
) -> SafetyResult:
    """Search the traces of ``i`` up to the longest forbidden word for a
    forbidden prefix.

    Every label seen within that depth must belong to ``A``; unrestricted
    sends and receives therefore need a restriction around ``i`` first.
    """
    words = forbidden_words(prop, A, schema)
    W = set(words)
    M = max((len(w) for w in W), default=0)
    prefixes = {w[:k] for w in W for k in range(len(w) + 1)}
    budget = state_budget(max_states)
    if () in W:
        return SafetyResult(False, (), len(W), 0)
    memo: dict = {}
    t0 = canonical(i, memo)
    seen = {(term_key(t0), ())}
    queue = deque([(t0, (), ())])
    while queue:
        u, pref, word = queue.popleft()
        if len(word) >= M:
            continue
        for a, u2 in sorted(term_step(u, defs, schema), key=lambda x: x[0].sort_key()):
            if a not in A:
                hint = " (restrict sends and receives first)" if not isinstance(a, (Flow, RcfgL)) else ""
                raise AlphabetError(f"label {a} outside the alphabet{hint}")
            w2 = word + (a,)
            p2 = None
            if pref is not None:
                cand = pref + (a,)
                if cand in W:
                    return SafetyResult(False, w2, len(W), M)
                if cand in prefixes:
                    p2 = cand
            u2 = canonical(u2, memo)
            k = (term_key(u2), p2)
            if k in seen:
                continue
            if len(seen) >= budget:
                raise StateBudgetExceeded(f"more than {budget} search states")
            seen.add(k)
            queue.append((u2, p2, w2))
    return SafetyResult(True, None, len(W), M)


def derive_alphabet(
    i: Term, defs: Definitions, schema: FieldSchema, depth: int | None = None, max_states: int | None = None
) -> Alphabet:
    """All flow and rcfg labels ``i`` can perform (within ``depth`` steps)."""
    budget = state_budget(max_states)
    memo: dict = {}
    t0 = canonical(i, memo)
    seen = {term_key(t0)}
    queue = deque([(t0, 0)])
    labels = set()
    while queue:
        u, d = queue.popleft()
        if depth is not None and d >= depth:
            continue
        for a, u2 in term_step(u, defs, schema):
            if isinstance(a, (Flow, RcfgL)):
                labels.add(a)
            u2 = canonical(u2, memo)
            k = term_key(u2)
            if k not in seen:
                if len(seen) >= budget:
                    raise StateBudgetExceeded(f"more than {budget} states")
                seen.add(k)
                queue.append((u2, d + 1))
    return Alphabet(labels)
