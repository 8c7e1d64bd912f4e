"""Operational semantics: labelled steps of terms and configurations, and
bounded construction of the resulting transition systems."""

from __future__ import annotations

import json
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Union

from .netkat import NkRelation, Policy, format_policy, normalize, relation_to_policy
from .packets import FieldSchema, Packet
from .terms import (
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
    canonical,
    format_term,
    term_key,
)

DEFAULT_STATE_BUDGET = 100_000
DEFAULT_DEPTH = 12


def state_budget(explicit: int | None = None) -> int:
    if explicit is not None:
        return explicit
    env = os.environ.get("DNK_STATE_BUDGET")
    return int(env) if env else DEFAULT_STATE_BUDGET


class StateBudgetExceeded(RuntimeError):
    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class UnguardedError(TermError):
    pass


# labels ----------------------------------------------------------------------


@dataclass(frozen=True)
class Flow:
    src: Packet
    dst: Packet

    def sort_key(self):
        return (0, "", self.src.index, self.dst.index)

    def __str__(self):
        return f"({self.src}, {self.dst})"


def _pol_text(policy, relation) -> str:
    if policy is not None:
        return format_policy(policy)
    return format_policy(relation_to_policy(relation))


@dataclass(frozen=True)
class _Comm:
    chan: str
    relation: NkRelation
    policy: Policy | None = field(default=None, compare=False, repr=False)

    def sort_key(self):
        return (self.rank, self.chan, len(self.relation), self.relation.key)


@dataclass(frozen=True)
class SendL(_Comm):
    direction = "!"
    rank = 2

    def __str__(self):
        return f"{self.chan}!{_pol_text(self.policy, self.relation)}"


@dataclass(frozen=True)
class RecvL(_Comm):
    direction = "?"
    rank = 1

    def __str__(self):
        return f"{self.chan}?{_pol_text(self.policy, self.relation)}"


@dataclass(frozen=True)
class RcfgL(_Comm):
    rank = 3

    def __str__(self):
        return f"rcfg<{self.chan},{_pol_text(self.policy, self.relation)}>"


Label = Union[Flow, SendL, RecvL, RcfgL]


def format_label(label: Label) -> str:
    return str(label)


def format_word(word: Iterable[Label]) -> str:
    return " . ".join(str(l) for l in word) or "<empty>"


def label_json(label: Label) -> dict:
    if isinstance(label, Flow):
        return {"kind": "flow", "in": label.src.as_dict(), "out": label.dst.as_dict()}
    kind = {SendL: "send", RecvL: "recv", RcfgL: "rcfg"}[type(label)]
    return {
        "kind": kind,
        "chan": label.chan,
        "policy": _pol_text(label.policy, label.relation),
        "pairs": [[a, b] for a, b in label.relation.key],
    }


def _matches(a: Label, b: Label) -> bool:
    if isinstance(a, SendL) and isinstance(b, RecvL) or isinstance(a, RecvL) and isinstance(b, SendL):
        return a.chan == b.chan and a.relation == b.relation
    return False


# steps -------------------------------------------------------------------------


def term_step(t: Term, defs: Definitions, schema: FieldSchema) -> list[tuple[Label, Term]]:
    """All labelled one-step successors of ``t``."""
    out = _step(t, defs, schema, ())
    seen = set()
    res = []
    for pair in out:
        k = (pair[0], id(pair[1]))
        if k in seen:
            continue
        seen.add(k)
        res.append(pair)
    return res


def _sync(left, right) -> list[tuple[Label, Term]]:
    res = []
    for a, l2 in left:
        if not isinstance(a, (SendL, RecvL)):
            continue
        for b, r2 in right:
            if _matches(a, b):
                res.append((RcfgL(a.chan, a.relation, a.policy), Par(l2, r2)))
    return res


def _step(t: Term, defs: Definitions, schema: FieldSchema, unfolding: tuple) -> list[tuple[Label, Term]]:
    if isinstance(t, Bot):
        return []
    if isinstance(t, SeqN):
        rel = normalize(t.policy, schema)
        return [(Flow(Packet(schema, a), Packet(schema, b)), t.rest) for a, b in rel.key]
    if isinstance(t, Recv):
        return [(RecvL(t.chan, normalize(t.policy, schema), t.policy), t.rest)]
    if isinstance(t, Send):
        return [(SendL(t.chan, normalize(t.policy, schema), t.policy), t.rest)]
    if isinstance(t, Rcfg):
        return [(RcfgL(t.chan, normalize(t.policy, schema), t.policy), t.rest)]
    if isinstance(t, OPlus):
        return _step(t.left, defs, schema, unfolding) + _step(t.right, defs, schema, unfolding)
    if isinstance(t, Par):
        sl = _step(t.left, defs, schema, unfolding)
        sr = _step(t.right, defs, schema, unfolding)
        res = [(a, Par(l2, t.right)) for a, l2 in sl]
        res += [(b, Par(t.left, r2)) for b, r2 in sr]
        res += _sync(sl, sr)
        return res
    if isinstance(t, Var):
        if t in unfolding:
            raise UnguardedError(f"unguarded recursion through {format_term(t)}")
        return _step(defs.body(t), defs, schema, unfolding + (t,))
    if isinstance(t, Delta):
        return [(a, Delta(t.blocked, d2)) for a, d2 in _step(t.body, defs, schema, unfolding) if not t.blocked.blocks(a)]
    if isinstance(t, Proj):
        if t.n <= 0:
            return []
        return [(a, Proj(t.n - 1, d2)) for a, d2 in _step(t.body, defs, schema, unfolding)]
    if isinstance(t, LeftMerge):
        return [(a, Par(l2, t.right)) for a, l2 in _step(t.left, defs, schema, unfolding)]
    if isinstance(t, CommMerge):
        sl = _step(t.left, defs, schema, unfolding)
        sr = _step(t.right, defs, schema, unfolding)
        return _sync(sl, sr)
    if isinstance(t, SumOver):
        raise TermError("indexed sums must be expanded before stepping")
    raise TypeError(f"not a term: {t!r}")


@dataclass(frozen=True)
class Config:
    """A term with the packets still to be processed and those already output."""

    term: Term
    pending: tuple = ()
    done: tuple = ()

    def __str__(self):
        pend = "::".join(str(p) for p in self.pending) or "<>"
        done = "::".join(str(p) for p in self.done) or "<>"
        return f"({format_term(self.term)}, {pend}, {done})"


def config_step(c: Config, defs: Definitions, schema: FieldSchema) -> list[tuple[Label, Config]]:
    res = []
    for a, t2 in term_step(c.term, defs, schema):
        if isinstance(a, Flow):
            if c.pending and c.pending[0] == a.src:
                res.append((a, Config(t2, c.pending[1:], (a.dst,) + c.done)))
        else:
            res.append((a, Config(t2, c.pending, c.done)))
    return res


# transition systems ------------------------------------------------------------


@dataclass
class Lts:
    states: list
    keys: list[str]
    transitions: list[tuple[int, Label, int]]
    initial: int = 0
    complete: bool = True

    def __len__(self):
        return len(self.states)

    @property
    def num_states(self) -> int:
        return len(self.states)

    def successors(self, i: int) -> list[tuple[Label, int]]:
        if not hasattr(self, "_succ"):
            succ: dict[int, list] = {}
            for s, a, d in self.transitions:
                succ.setdefault(s, []).append((a, d))
            self._succ = succ
        return self._succ.get(i, [])

    def labels(self) -> set:
        return {a for _, a, _ in self.transitions}

    def to_text(self) -> str:
        lines = [f"state {i} {k}" for i, k in enumerate(self.keys)]
        lines += [f"trans {s} {a} {d}" for s, a, d in self.transitions]
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            "initial": self.initial,
            "complete": self.complete,
            "states": [{"id": i, "term": k} for i, k in enumerate(self.keys)],
            "transitions": [
                {"src": s, "label": str(a), "detail": label_json(a), "dst": d}
                for s, a, d in self.transitions
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _label_sort(a: Label):
    return a.sort_key()


class _Keyer:
    def __init__(self, merge: str):
        if merge not in ("aci", "syntactic"):
            raise ValueError(f"unknown merge mode {merge!r}")
        self.merge = merge
        self.memo: dict = {}

    def term(self, t: Term) -> tuple[Term, str]:
        if self.merge == "aci":
            t = canonical(t, self.memo)
        return t, term_key(t)

    def state(self, s) -> tuple[object, str]:
        if isinstance(s, Config):
            t, k = self.term(s.term)
            pend = ",".join(str(p.index) for p in s.pending)
            done = ",".join(str(p.index) for p in s.done)
            return Config(t, s.pending, s.done), f"{k} | {pend} | {done}"
        return self.term(s)


def build_lts(
    start: Term | Config,
    defs: Definitions,
    schema: FieldSchema,
    max_states: int | None = None,
    merge: str = "aci",
) -> Lts:
    """Breadth-first exploration of the states reachable from ``start``.

    States are identified modulo ACI of choice and parallel composition unless
    ``merge='syntactic'``. Raises StateBudgetExceeded (carrying the partial
    system) when more than ``max_states`` states are found.
    """
    budget = state_budget(max_states)
    keyer = _Keyer(merge)
    first, k0 = keyer.state(start)
    index = {k0: 0}
    states = [first]
    keys = [k0]
    trans: list[tuple[int, Label, int]] = []
    queue = deque([0])
    step = config_step if isinstance(start, Config) else term_step
    while queue:
        i = queue.popleft()
        succs = []
        for a, s2 in step(states[i], defs, schema):
            rep, k = keyer.state(s2)
            succs.append((a, k, rep))
        succs.sort(key=lambda x: (_label_sort(x[0]), x[1]))
        seen_edges = set()
        for a, k, rep in succs:
            j = index.get(k)
            if j is None:
                if len(states) >= budget:
                    lts = Lts(states, keys, trans, 0, complete=False)
                    raise StateBudgetExceeded(f"more than {budget} states", lts)
                j = len(states)
                index[k] = j
                states.append(rep)
                keys.append(k)
                queue.append(j)
            if (a, j) not in seen_edges:
                seen_edges.add((a, j))
                trans.append((i, a, j))
    return Lts(states, keys, trans, 0)
