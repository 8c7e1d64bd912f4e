"""Dup-free NetKAT: policies, their packet-relation semantics and decision.

Every dup-free policy denotes a relation on packets. ``normalize`` computes
that relation (the normal form, a sum of complete test/assignment pairs), which
makes equivalence and emptiness plain set comparisons.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Sequence

from ._node import Node, node
from .packets import (
    CompletePoint,
    FieldSchema,
    Packet,
    SchemaError,
    Value,
)


class Policy(Node):
    def __str__(self):
        return format_policy(self)

    def __repr__(self):
        return f"{type(self).__name__}<{format_policy(self)}>"


@node
class Zero(Policy):
    pass


@node
class One(Policy):
    pass


@node
class Test(Policy):
    field: str
    value: Value


@node
class Assign(Policy):
    field: str
    value: Value


@node
class Not(Policy):
    arg: Policy


@node
class Plus(Policy):
    left: Policy
    right: Policy


@node
class Seq(Policy):
    left: Policy
    right: Policy


@node
class Star(Policy):
    arg: Policy


@node
class Ref(Policy):
    """A named abbreviation, resolved when a program is elaborated."""

    name: str


@node
class Canonical(Policy):
    """A policy given directly by its packet relation.

    Denotes the same thing as the sum of complete test/assignment pairs of the
    relation, but avoids materialising that sum as a syntax tree.
    """

    relation: "NkRelation"


ZERO = Zero()
ONE = One()


def is_predicate(p: Policy) -> bool:
    if isinstance(p, (Zero, One, Test)):
        return True
    if isinstance(p, Not):
        return is_predicate(p.arg)
    if isinstance(p, (Plus, Seq)):
        return is_predicate(p.left) and is_predicate(p.right)
    return False


def plus(*ps: Policy) -> Policy:
    """Right-nested sum; ``zero`` when empty."""
    if not ps:
        return ZERO
    acc = ps[-1]
    for p in reversed(ps[:-1]):
        acc = Plus(p, acc)
    return acc


def seq(*ps: Policy) -> Policy:
    """Right-nested composition; ``one`` when empty."""
    if not ps:
        return ONE
    acc = ps[-1]
    for p in reversed(ps[:-1]):
        acc = Seq(p, acc)
    return acc


def balanced_plus(ps: Sequence[Policy]) -> Policy:
    """Sum as a balanced tree, keeping recursion shallow for large tables."""
    ps = list(ps)
    if not ps:
        return ZERO
    while len(ps) > 1:
        nxt = [Plus(ps[i], ps[i + 1]) for i in range(0, len(ps) - 1, 2)]
        if len(ps) % 2:
            nxt.append(ps[-1])
        ps = nxt
    return ps[0]


def point_policy(point: CompletePoint) -> Policy:
    s = point.schema
    vals = Packet(s, point.index).values
    ctor = Test if point.role == "test" else Assign
    return seq(*(ctor(f, v) for f, v in zip(s.fields, vals)))


# relations ---------------------------------------------------------------


class NkRelation:
    """A relation on the packets of a schema, stored as index pairs."""

    __slots__ = ("schema", "pairs", "_succ", "_key", "_hash")

    def __init__(self, schema: FieldSchema, pairs: Iterable[tuple[int, int]]):
        self.schema = schema
        self.pairs = frozenset(pairs)
        self._succ = None
        self._key = None
        self._hash = None

    @classmethod
    def from_succ(cls, schema: FieldSchema, succ: dict[int, Iterable[int]]) -> "NkRelation":
        return cls(schema, ((a, b) for a, outs in succ.items() for b in outs))

    @property
    def succ(self) -> dict[int, tuple[int, ...]]:
        if self._succ is None:
            d: dict[int, list[int]] = defaultdict(list)
            for a, b in self.key:
                d[a].append(b)
            self._succ = {a: tuple(bs) for a, bs in d.items()}
        return self._succ

    @property
    def key(self) -> tuple[tuple[int, int], ...]:
        if self._key is None:
            self._key = tuple(sorted(self.pairs))
        return self._key

    def __eq__(self, other):
        if not isinstance(other, NkRelation):
            return NotImplemented
        return self.pairs == other.pairs and self.schema == other.schema

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self.pairs)
        return self._hash

    def __len__(self):
        return len(self.pairs)

    def __bool__(self):
        return bool(self.pairs)

    def __iter__(self):
        s = self.schema
        for a, b in self.key:
            yield Packet(s, a), Packet(s, b)

    def __contains__(self, pair) -> bool:
        a, b = pair
        return (a.index, b.index) in self.pairs

    def is_empty(self) -> bool:
        return not self.pairs

    def __repr__(self):
        body = ", ".join(f"({a}, {b})" for a, b in self)
        return "{" + body + "}"


# semantics -----------------------------------------------------------------


def _check(schema: FieldSchema, fname: str, value: Value) -> tuple[int, int]:
    fpos = schema.field_pos(fname)
    return fpos, schema.value_pos(fpos, value)


def eval_pred(a: Policy, pk: Packet) -> bool:
    """Truth of a predicate on a packet."""
    s = pk.schema
    if isinstance(a, Zero):
        return False
    if isinstance(a, One):
        return True
    if isinstance(a, Test):
        fpos, vpos = _check(s, a.field, a.value)
        return s.digit(pk.index, fpos) == vpos
    if isinstance(a, Not):
        return not eval_pred(a.arg, pk)
    if isinstance(a, Plus):
        return eval_pred(a.left, pk) or eval_pred(a.right, pk)
    if isinstance(a, Seq):
        return eval_pred(a.left, pk) and eval_pred(a.right, pk)
    raise TypeError(f"not a predicate: {format_policy(a)}")


def eval_policy(p: Policy, pk: Packet) -> frozenset[Packet]:
    """Packets produced by ``p`` on input ``pk`` (one packet at a time)."""
    s = pk.schema
    return frozenset(Packet(s, i) for i in _eval(p, pk.index, s))


def _eval(p: Policy, i: int, s: FieldSchema) -> set[int]:
    if isinstance(p, Zero):
        return set()
    if isinstance(p, One):
        return {i}
    if isinstance(p, Test):
        fpos, vpos = _check(s, p.field, p.value)
        return {i} if s.digit(i, fpos) == vpos else set()
    if isinstance(p, Assign):
        fpos, vpos = _check(s, p.field, p.value)
        return {s.with_digit(i, fpos, vpos)}
    if isinstance(p, Not):
        return set() if eval_pred(p.arg, Packet(s, i)) else {i}
    if isinstance(p, Plus):
        return _eval(p.left, i, s) | _eval(p.right, i, s)
    if isinstance(p, Seq):
        out: set[int] = set()
        for j in _eval(p.left, i, s):
            out |= _eval(p.right, j, s)
        return out
    if isinstance(p, Star):
        # union of all finite iterates
        acc = {i}
        frontier = {i}
        while frontier:
            nxt: set[int] = set()
            for j in frontier:
                nxt |= _eval(p.arg, j, s)
            frontier = nxt - acc
            acc |= frontier
        return acc
    if isinstance(p, Canonical):
        return set(p.relation.succ.get(i, ()))
    if isinstance(p, Ref):
        raise SchemaError(f"unresolved policy name {p.name!r}")
    raise TypeError(f"not a policy: {p!r}")


def _flatten_plus(p: Policy, out: list) -> list:
    stack = [p]
    while stack:
        q = stack.pop()
        if isinstance(q, Plus):
            stack.append(q.right)
            stack.append(q.left)
        else:
            out.append(q)
    return out


def _leading_test(p: Policy):
    while isinstance(p, Seq):
        p = p.left
    if isinstance(p, Test):
        return p
    return None


def _image(p: Policy, dom: Iterable[int], s: FieldSchema) -> dict[int, set[int]]:
    """Successor sets under ``p`` for every packet index in ``dom``."""
    if isinstance(p, Zero):
        return {}
    if isinstance(p, One):
        return {i: {i} for i in dom}
    if isinstance(p, Test):
        fpos, vpos = _check(s, p.field, p.value)
        return {i: {i} for i in dom if s.digit(i, fpos) == vpos}
    if isinstance(p, Assign):
        fpos, vpos = _check(s, p.field, p.value)
        return {i: {s.with_digit(i, fpos, vpos)} for i in dom}
    if isinstance(p, Not):
        if not is_predicate(p.arg):
            raise TypeError(f"negation of a non-predicate: {format_policy(p.arg)}")
        keep = _image(p.arg, dom, s)
        return {i: {i} for i in dom if i not in keep}
    if isinstance(p, Plus):
        return _image_sum(_flatten_plus(p, []), dom, s)
    if isinstance(p, Seq):
        first = _image(p.left, dom, s)
        mids: set[int] = set()
        for outs in first.values():
            mids |= outs
        second = _image(p.right, mids, s)
        res = {}
        for i, outs in first.items():
            acc: set[int] = set()
            for j in outs:
                acc |= second.get(j, set())
            if acc:
                res[i] = acc
        return res
    if isinstance(p, Star):
        step: dict[int, set[int]] = {}
        todo = set(dom)
        while todo:
            img = _image(p.arg, todo, s)
            for i in todo:
                step[i] = img.get(i, set())
            todo = set()
            for outs in img.values():
                todo |= {j for j in outs if j not in step}
        closure: dict[int, set[int]] = {}
        for i in dom:
            seen = {i}
            stack = [i]
            while stack:
                j = stack.pop()
                for k in step[j]:
                    if k not in seen:
                        seen.add(k)
                        stack.append(k)
            closure[i] = seen
        return closure
    if isinstance(p, Canonical):
        succ = p.relation.succ
        return {i: set(succ[i]) for i in dom if i in succ}
    if isinstance(p, Ref):
        raise SchemaError(f"unresolved policy name {p.name!r}")
    raise TypeError(f"not a policy: {p!r}")


def _image_sum(summands: list[Policy], dom: Iterable[int], s: FieldSchema) -> dict[int, set[int]]:
    dom = list(dom)
    res: dict[int, set[int]] = {}

    def merge(img):
        for i, outs in img.items():
            cur = res.get(i)
            if cur is None:
                res[i] = set(outs)
            else:
                cur |= outs

    # summands guarded by a test on a common field only see matching packets
    by_field: dict[str, list] = defaultdict(list)
    rest = []
    for q in summands:
        t = _leading_test(q)
        if t is None:
            rest.append(q)
        else:
            by_field[t.field].append((t, q))
    for q in rest:
        merge(_image(q, dom, s))
    for fname, group in by_field.items():
        if len(group) < 4:
            for _, q in group:
                merge(_image(q, dom, s))
            continue
        fpos = s.field_pos(fname)
        buckets: dict[int, list[int]] = defaultdict(list)
        for i in dom:
            buckets[s.digit(i, fpos)].append(i)
        for t, q in group:
            vpos = s.value_pos(fpos, t.value)
            part = buckets.get(vpos)
            if part:
                merge(_image(q, part, s))
    return res


def normalize(p: Policy, schema: FieldSchema) -> NkRelation:
    """The packet relation denoted by ``p`` (its normal form)."""
    hit = schema._memo.get(id(p))
    if hit is not None and hit[0] is p:
        return hit[1]
    if isinstance(p, Canonical):
        if p.relation.schema != schema:
            raise SchemaError("relation belongs to a different schema")
        rel = p.relation
    else:
        img = _image(p, range(schema.size), schema)
        rel = NkRelation.from_succ(schema, img)
    schema._memo[id(p)] = (p, rel)
    return rel


def nk_equiv(p: Policy, q: Policy, schema: FieldSchema) -> bool:
    return normalize(p, schema) == normalize(q, schema)


def nk_is_zero(p: Policy, schema: FieldSchema) -> bool:
    return normalize(p, schema).is_empty()


def relation_to_policy(rel: NkRelation) -> Policy:
    """The sum of complete test/assignment pairs, written out as syntax."""
    s = rel.schema
    terms = [
        Seq(point_policy(CompletePoint(s, a, "test")), point_policy(CompletePoint(s, b, "assign")))
        for a, b in rel.key
    ]
    return plus(*terms)


def pair_policy(schema: FieldSchema, src: int, dst: int) -> Policy:
    return Seq(
        point_policy(CompletePoint(schema, src, "test")),
        point_policy(CompletePoint(schema, dst, "assign")),
    )


# printing --------------------------------------------------------------------

_PREC = {Plus: 1, Seq: 2, Star: 3, Not: 3}


def _prec(p: Policy) -> int:
    return _PREC.get(type(p), 4)


def format_policy(p: Policy) -> str:
    if isinstance(p, Zero):
        return "zero"
    if isinstance(p, One):
        return "one"
    if isinstance(p, Ref):
        return p.name
    if isinstance(p, Test):
        return f"{p.field} = {p.value}"
    if isinstance(p, Assign):
        return f"{p.field} <- {p.value}"
    if isinstance(p, Canonical):
        return format_policy(relation_to_policy(p.relation))
    if isinstance(p, Plus):
        return f"{_operand(p.left, 2)} + {_operand(p.right, 1)}"
    if isinstance(p, Seq):
        return f"{_operand(p.left, 3)} . {_operand(p.right, 2)}"
    if isinstance(p, Star):
        return f"{_operand(p.arg, 4)}*"
    if isinstance(p, Not):
        return f"~{_operand(p.arg, 4)}"
    raise TypeError(f"not a policy: {p!r}")


def _operand(p: Policy, need: int) -> str:
    text = format_policy(p)
    if isinstance(p, (Test, Assign)) or isinstance(p, Canonical) or _prec(p) < need:
        return f"({text})"
    return text


def format_relation(rel: NkRelation) -> str:
    return format_policy(relation_to_policy(rel))
