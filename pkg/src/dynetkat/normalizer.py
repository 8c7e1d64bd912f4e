"""Axiom-directed rewriting of terms into head normal form.

A head normal form is a choice of summands ``at ; D`` where ``at`` is a
complete test/assignment pair, a send, a receive or a reconfiguration. The
rewriting only uses the equations of the DyNetKAT theory (distribution of
sequencing over NetKAT sums, the expansion of parallel composition into left
and communication merges, and the restriction and projection equations).
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

from .netkat import Canonical, NkRelation, pair_policy, relation_to_policy
from .packets import CompletePoint, FieldSchema, Packet
from .semantics import Flow, Label, RcfgL, RecvL, SendL, UnguardedError
from .terms import (
    BOT,
    Bot,
    CommMerge,
    Definitions,
    Delta,
    LeftMerge,
    OPlus,
    Par,
    Proj,
    Rcfg,
    Recv,
    Send,
    SeqN,
    SumOver,
    Term,
    TermError,
    Var,
    format_term,
    oplus,
)
from .netkat import normalize


@dataclass(frozen=True)
class Summand:
    """One summand ``label ; cont`` of a head normal form."""

    label: Label
    cont: Term

    @property
    def is_flow(self) -> bool:
        return isinstance(self.label, Flow)

    @property
    def alpha(self) -> CompletePoint:
        return CompletePoint(self.label.src.schema, self.label.src.index, "test")

    @property
    def pi(self) -> CompletePoint:
        return CompletePoint(self.label.dst.schema, self.label.dst.index, "assign")


class NormalForm(tuple):
    """A tuple of Summand, read as their choice (empty means ``bot``)."""

    def to_term(self) -> Term:
        return oplus(*(summand_term(s) for s in self))

    def __str__(self):
        return format_term(self.to_term())


def summand_term(s: Summand) -> Term:
    a = s.label
    if isinstance(a, Flow):
        return SeqN(pair_policy(a.src.schema, a.src.index, a.dst.index), s.cont)
    pol = a.policy if a.policy is not None else relation_to_policy(a.relation)
    ctor = {RecvL: Recv, SendL: Send, RcfgL: Rcfg}[type(a)]
    return ctor(a.chan, pol, s.cont)


def _dedupe(summands: Iterable[Summand]) -> NormalForm:
    seen = set()
    out = []
    for s in summands:
        if s in seen:
            continue
        seen.add(s)
        out.append(s)
    return NormalForm(out)


class Normalizer:
    """Head normalisation with a memo shared across calls."""

    def __init__(self, defs: Definitions, schema: FieldSchema):
        self.defs = defs
        self.schema = schema
        self._memo: dict[int, tuple[Term, NormalForm]] = {}

    def hnf(self, t: Term) -> NormalForm:
        return self._hnf(t, ())

    def _hnf(self, t: Term, unfolding: tuple) -> NormalForm:
        hit = self._memo.get(id(t))
        if hit is not None and hit[0] is t:
            return hit[1]
        nf = self._compute(t, unfolding)
        self._memo[id(t)] = (t, nf)
        return nf

    def _compute(self, t: Term, unfolding: tuple) -> NormalForm:
        s = self.schema
        if isinstance(t, Bot):
            return NormalForm()
        if isinstance(t, SeqN):
            # sequencing distributes over the normal form of the policy;
            # an empty relation leaves nothing (zero ; p = bot)
            rel = normalize(t.policy, s)
            return NormalForm(
                Summand(Flow(Packet(s, a), Packet(s, b)), t.rest) for a, b in rel.key
            )
        if isinstance(t, Recv):
            return NormalForm([Summand(RecvL(t.chan, normalize(t.policy, s), t.policy), t.rest)])
        if isinstance(t, Send):
            return NormalForm([Summand(SendL(t.chan, normalize(t.policy, s), t.policy), t.rest)])
        if isinstance(t, Rcfg):
            return NormalForm([Summand(RcfgL(t.chan, normalize(t.policy, s), t.policy), t.rest)])
        if isinstance(t, OPlus):
            return _dedupe(self._hnf(t.left, unfolding) + self._hnf(t.right, unfolding))
        if isinstance(t, Var):
            if t in unfolding:
                raise UnguardedError(f"unguarded recursion through {format_term(t)}")
            return self._hnf(self.defs.body(t), unfolding + (t,))
        if isinstance(t, Par):
            hp = self._hnf(t.left, unfolding)
            hq = self._hnf(t.right, unfolding)
            # p || q = p lmerge q (+) q lmerge p (+) p cmerge q
            return _dedupe(
                left_merge(hp, t.right, first=True)
                + left_merge(hq, t.left, first=True)
                + comm_merge(hp, hq)
            )
        if isinstance(t, LeftMerge):
            return left_merge(self._hnf(t.left, unfolding), t.right, first=True)
        if isinstance(t, CommMerge):
            return comm_merge(self._hnf(t.left, unfolding), self._hnf(t.right, unfolding))
        if isinstance(t, Delta):
            body = self._hnf(t.body, unfolding)
            wrap: dict[int, Term] = {}
            out = []
            for x in body:
                if t.blocked.blocks(x.label):
                    continue
                c = wrap.get(id(x.cont))
                if c is None:
                    c = wrap[id(x.cont)] = Delta(t.blocked, x.cont)
                out.append(Summand(x.label, c))
            return NormalForm(out)
        if isinstance(t, Proj):
            if t.n <= 0:
                return NormalForm()
            body = self._hnf(t.body, unfolding)
            wrap = {}
            out = []
            for x in body:
                c = wrap.get(id(x.cont))
                if c is None:
                    c = wrap[id(x.cont)] = Proj(t.n - 1, x.cont)
                out.append(Summand(x.label, c))
            return NormalForm(out)
        if isinstance(t, SumOver):
            raise TermError("indexed sums must be expanded before normalising")
        raise TypeError(f"not a term: {t!r}")

    # bounded unfolding -------------------------------------------------------

    def unfold(self, t: Term, depth: int, memo: dict | None = None) -> Term:
        """A finite term equal to the projection of ``t`` to ``depth`` steps.

        Shared subterms are built once, so the result is a DAG.
        """
        if memo is None:
            memo = {}
        return self._unfold(t, depth, memo)

    def _unfold(self, t: Term, depth: int, memo: dict) -> Term:
        if depth <= 0:
            return BOT
        key = (id(t), depth)
        hit = memo.get(key)
        if hit is not None:
            return hit[1]
        nf = self.hnf(t)
        flows: dict[int, list] = defaultdict(list)
        conts: dict[int, Term] = {}
        parts = []
        for x in nf:
            sub = self._unfold(x.cont, depth - 1, memo)
            if isinstance(x.label, Flow):
                conts[id(sub)] = sub
                flows[id(sub)].append((x.label.src.index, x.label.dst.index))
            else:
                a = x.label
                pol = a.policy if a.policy is not None else Canonical(a.relation)
                ctor = {RecvL: Recv, SendL: Send, RcfgL: Rcfg}[type(a)]
                parts.append(ctor(a.chan, pol, sub))
        for k, pairs in flows.items():
            parts.insert(0, SeqN(Canonical(NkRelation(self.schema, pairs)), conts[k]))
        res = oplus(*parts)
        memo[key] = (t, res)
        return res

    # bounded traces ----------------------------------------------------------

    def traces(self, t: Term, depth: int) -> frozenset[tuple]:
        memo: dict = {}

        def go(u: Term, d: int) -> frozenset:
            key = (id(u), d)
            hit = memo.get(key)
            if hit is not None:
                return hit[1]
            words = {()}
            if d > 0:
                for x in self.hnf(u):
                    for w in go(x.cont, d - 1):
                        words.add((x.label,) + w)
            res = frozenset(words)
            memo[key] = (u, res)
            return res

        return go(t, depth)


def head_normal_form(t: Term, defs: Definitions, schema: FieldSchema) -> NormalForm:
    return Normalizer(defs, schema).hnf(t)


def left_merge(hp: NormalForm, q: Term, first: bool = True) -> NormalForm:
    """(at ; p') lmerge q = at ; (p' || q), distributed over the summands."""
    wrap: dict[int, Term] = {}
    out = []
    for x in hp:
        c = wrap.get(id(x.cont))
        if c is None:
            c = wrap[id(x.cont)] = Par(x.cont, q) if first else Par(q, x.cont)
        out.append(Summand(x.label, c))
    return NormalForm(out)


def comm_merge(hp: NormalForm, hq: NormalForm) -> NormalForm:
    """Only a matching receive/send pair communicates; every other pair of
    summands contributes ``bot``."""
    out = []
    sends_q = [y for y in hq if isinstance(y.label, (SendL, RecvL))]
    if not sends_q:
        return NormalForm()
    for x in hp:
        a = x.label
        if not isinstance(a, (SendL, RecvL)):
            continue
        for y in sends_q:
            b = y.label
            if type(a) is type(b) or a.chan != b.chan or a.relation != b.relation:
                continue
            pol = a.policy if a.policy is not None else b.policy
            out.append(Summand(RcfgL(a.chan, a.relation, pol), Par(x.cont, y.cont)))
    return _dedupe(out)


def unfold(t: Term, defs: Definitions, schema: FieldSchema, depth: int) -> Term:
    return Normalizer(defs, schema).unfold(t, depth)


def trace_expand(t: Term, defs: Definitions, schema: FieldSchema, depth: int) -> frozenset[tuple]:
    """All label words of length at most ``depth`` (prefix closed)."""
    return Normalizer(defs, schema).traces(t, depth)


# comparison of finite trees ------------------------------------------------------


class _TreeInterner:
    def __init__(self, schema: FieldSchema):
        self.schema = schema
        self.ids: dict[frozenset, int] = {}
        self.memo: dict[int, tuple[Term, int]] = {}

    def tree_id(self, t: Term) -> int:
        hit = self.memo.get(id(t))
        if hit is not None and hit[0] is t:
            return hit[1]
        items = set()
        stack = [t]
        while stack:
            u = stack.pop()
            if isinstance(u, Bot):
                continue
            if isinstance(u, OPlus):
                stack.append(u.left)
                stack.append(u.right)
            elif isinstance(u, SeqN):
                sub = self.tree_id(u.rest)
                s = self.schema
                for a, b in normalize(u.policy, s).key:
                    items.add((Flow(Packet(s, a), Packet(s, b)), sub))
            elif isinstance(u, (Recv, Send, Rcfg)):
                sub = self.tree_id(u.rest)
                ctor = {Recv: RecvL, Send: SendL, Rcfg: RcfgL}[type(u)]
                items.add((ctor(u.chan, normalize(u.policy, self.schema)), sub))
            else:
                raise TermError(f"not a finite tree: {format_term(u)}")
        key = frozenset(items)
        i = self.ids.setdefault(key, len(self.ids))
        self.memo[id(t)] = (t, i)
        return i


def aci_equal(t1: Term | NormalForm, t2: Term | NormalForm, schema: FieldSchema) -> bool:
    """Equality of finite trees up to associativity, commutativity and
    idempotence of choice, with NetKAT policies compared by their relations."""
    if isinstance(t1, NormalForm):
        t1 = t1.to_term()
    if isinstance(t2, NormalForm):
        t2 = t2.to_term()
    interner = _TreeInterner(schema)
    return interner.tree_id(t1) == interner.tree_id(t2)
