"""DyNetKAT process terms, recursive definitions and their static checks."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterable, Mapping, Sequence

from ._node import Node, node
from .netkat import (
    ONE,
    ZERO,
    Canonical,
    NkRelation,
    Not,
    Plus,
    Policy,
    Ref,
    Seq,
    Star,
    format_policy,
    normalize,
)
from .packets import FieldSchema


class TermError(ValueError):
    pass


class UndefinedVariable(TermError):
    pass


class ArityError(TermError):
    pass


class Term(Node):
    def __str__(self):
        return format_term(self)

    def __repr__(self):
        return f"{type(self).__name__}<{format_term(self)}>"


@node
class Bot(Term):
    pass


@node
class SeqN(Term):
    """A NetKAT policy followed by a process."""

    policy: Policy
    rest: Term


@node
class Recv(Term):
    chan: str
    policy: Policy
    rest: Term


@node
class Send(Term):
    chan: str
    policy: Policy
    rest: Term


@node
class Rcfg(Term):
    chan: str
    policy: Policy
    rest: Term


@node
class Par(Term):
    left: Term
    right: Term


@node
class OPlus(Term):
    left: Term
    right: Term


@node
class Var(Term):
    name: str
    args: tuple = ()


@node
class Delta(Term):
    """Restriction: removes the listed send/receive actions of ``body``."""

    blocked: object  # RestrictionSet once elaborated, a tuple of Action in source form
    body: Term


@node
class Proj(Term):
    n: int
    body: Term


@node
class LeftMerge(Term):
    left: Term
    right: Term


@node
class CommMerge(Term):
    left: Term
    right: Term


@node
class SumOver(Term):
    """Source-level indexed sum, expanded when a program is elaborated."""

    var: str
    index: str
    body: Term


BOT = Bot()
PREFIXES = (SeqN, Recv, Send, Rcfg)
COMM_PREFIXES = (Recv, Send, Rcfg)


def oplus(*ts: Term) -> Term:
    """Right-nested choice; ``bot`` when empty."""
    if not ts:
        return BOT
    acc = ts[-1]
    for t in reversed(ts[:-1]):
        acc = OPlus(t, acc)
    return acc


def par(*ts: Term) -> Term:
    if not ts:
        return BOT
    acc = ts[-1]
    for t in reversed(ts[:-1]):
        acc = Par(t, acc)
    return acc


def expand_sum(family: Callable[[object], Term], index: Iterable) -> Term:
    return oplus(*(family(i) for i in index))


# restrictions ----------------------------------------------------------------


@dataclass(frozen=True)
class Action:
    """A send ('!') or receive ('?') on a channel; ``policy`` None matches any."""

    direction: str
    chan: str
    policy: Policy | None = None

    def __str__(self):
        pol = "*" if self.policy is None else format_policy(self.policy)
        return f"{self.chan} {self.direction} {pol}"


class RestrictionSet:
    """Send/receive actions with policies compared by their relations."""

    def __init__(self, entries: Iterable[tuple[str, str, NkRelation | None]], display: Sequence[Action] = ()):
        self.entries = frozenset(entries)
        self.display = tuple(display)
        self._wild = {(d, c) for d, c, r in self.entries if r is None}

    @classmethod
    def of(cls, schema: FieldSchema, actions: Iterable[Action]) -> "RestrictionSet":
        actions = list(actions)
        entries = [
            (a.direction, a.chan, None if a.policy is None else normalize(a.policy, schema))
            for a in actions
        ]
        return cls(entries, actions)

    @classmethod
    def everything(cls, channels: Iterable[str]) -> "RestrictionSet":
        acts = [Action(d, c) for c in sorted(set(channels)) for d in ("?", "!")]
        return cls([(a.direction, a.chan, None) for a in acts], acts)

    def blocks(self, label) -> bool:
        kind = getattr(label, "direction", None)
        if kind is None:
            return False
        if (kind, label.chan) in self._wild:
            return True
        return (kind, label.chan, label.relation) in self.entries

    def __eq__(self, other):
        return isinstance(other, RestrictionSet) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __iter__(self):
        return iter(self.display)

    def __len__(self):
        return len(self.entries)

    def __str__(self):
        return "{" + ", ".join(str(a) for a in self.display) + "}"


# definitions -----------------------------------------------------------------


@dataclass
class Template:
    params: tuple[str, ...]
    body: Term


class Definitions:
    """Recursion variables with their bodies.

    Plain variables map to bodies directly. Indexed families such as
    ``SDN[X1, ..., X6]`` are kept as templates and instantiated on demand,
    one concrete body per argument tuple.
    """

    def __init__(
        self,
        bodies: Mapping[str, Term] | None = None,
        templates: Mapping[str, Template] | None = None,
        policies: Mapping[str, Policy] | None = None,
        sets: Mapping[str, Sequence[str]] | None = None,
        schema: FieldSchema | None = None,
    ):
        self.schema = schema
        self.bodies: dict[str, Term] = dict(bodies or {})
        self.templates: dict[str, Template] = dict(templates or {})
        self.policies: dict[str, Policy] = {"zero": ZERO, "one": ONE}
        self.policies.update(policies or {})
        self.sets: dict[str, tuple[str, ...]] = {k: tuple(v) for k, v in (sets or {}).items()}
        self.instances: frozenset[Var] | None = None
        self._cache: dict[Var, Term] = {}

    def copy(self) -> "Definitions":
        d = Definitions(self.bodies, self.templates, self.policies, self.sets, self.schema)
        d.instances = self.instances
        d._cache = self._cache
        return d

    def __contains__(self, name: str) -> bool:
        return name in self.bodies or name in self.templates

    def names(self) -> list[str]:
        return sorted(set(self.bodies) | set(self.templates))

    def body(self, v: Var) -> Term:
        if not v.args:
            try:
                return self.bodies[v.name]
            except KeyError:
                if v.name in self.templates:
                    raise ArityError(
                        f"{v.name} expects {len(self.templates[v.name].params)} arguments"
                    ) from None
                raise UndefinedVariable(f"undefined variable {v.name}") from None
        hit = self._cache.get(v)
        if hit is not None:
            return hit
        tpl = self.templates.get(v.name)
        if tpl is None:
            raise UndefinedVariable(f"undefined variable {v.name}")
        if len(tpl.params) != len(v.args):
            raise ArityError(f"{v.name} expects {len(tpl.params)} arguments, got {len(v.args)}")
        env = dict(zip(tpl.params, v.args))
        res = resolve_term(tpl.body, env, self)
        self._cache[v] = res
        return res

    def policy(self, name: str) -> Policy:
        try:
            return self.policies[name]
        except KeyError:
            raise UndefinedVariable(f"undefined policy name {name}") from None


def resolve_policy(p: Policy, env: Mapping[str, str], defs: Definitions) -> Policy:
    """Replace named references by the policies they stand for."""
    if isinstance(p, Ref):
        return defs.policy(env.get(p.name, p.name))
    if isinstance(p, (Plus, Seq)):
        left = resolve_policy(p.left, env, defs)
        right = resolve_policy(p.right, env, defs)
        if left is p.left and right is p.right:
            return p
        return type(p)(left, right)
    if isinstance(p, (Star, Not)):
        arg = resolve_policy(p.arg, env, defs)
        return p if arg is p.arg else type(p)(arg)
    return p


def resolve_term(t: Term, env: Mapping[str, str], defs: Definitions) -> Term:
    """Substitute names, resolve policy references and expand indexed sums."""
    if isinstance(t, Bot):
        return t
    if isinstance(t, SeqN):
        return SeqN(resolve_policy(t.policy, env, defs), resolve_term(t.rest, env, defs))
    if isinstance(t, COMM_PREFIXES):
        return type(t)(t.chan, resolve_policy(t.policy, env, defs), resolve_term(t.rest, env, defs))
    if isinstance(t, (Par, OPlus, LeftMerge, CommMerge)):
        return type(t)(resolve_term(t.left, env, defs), resolve_term(t.right, env, defs))
    if isinstance(t, Var):
        args = tuple(env.get(a, a) for a in t.args)
        if t.name in defs.templates:
            if len(args) != len(defs.templates[t.name].params):
                raise ArityError(
                    f"{t.name} expects {len(defs.templates[t.name].params)} arguments, got {len(args)}"
                )
            for a in args:
                defs.policy(a)
        elif t.name in defs.bodies:
            if args:
                raise ArityError(f"{t.name} takes no arguments")
        else:
            raise UndefinedVariable(f"undefined variable {t.name}")
        return Var(t.name, args)
    if isinstance(t, Delta):
        blocked = t.blocked
        if not isinstance(blocked, RestrictionSet):
            schema = defs.schema
            if schema is None:
                raise TermError("restrictions need a packet schema")
            acts = [
                Action(a.direction, a.chan, None if a.policy is None else resolve_policy(a.policy, env, defs))
                for a in blocked
            ]
            blocked = RestrictionSet.of(schema, acts)
        return Delta(blocked, resolve_term(t.body, env, defs))
    if isinstance(t, Proj):
        return Proj(t.n, resolve_term(t.body, env, defs))
    if isinstance(t, SumOver):
        try:
            names = defs.sets[t.index]
        except KeyError:
            raise UndefinedVariable(f"undefined index set {t.index}") from None
        return expand_sum(lambda n: resolve_term(t.body, {**env, t.var: n}, defs), names)
    raise TypeError(f"not a term: {t!r}")


# static analysis -------------------------------------------------------------


def var_occurrences(t: Term, guarded: bool = False, out: list | None = None) -> list[tuple[Var, bool, tuple]]:
    """All variable occurrences as (var, guarded, enclosing sum binders)."""
    if out is None:
        out = []
    stack = [(t, guarded, ())]
    while stack:
        u, g, binders = stack.pop()
        if isinstance(u, Var):
            out.append((u, g, binders))
        elif isinstance(u, PREFIXES):
            stack.append((u.rest, True, binders))
        elif isinstance(u, LeftMerge):
            stack.append((u.left, g, binders))
            stack.append((u.right, True, binders))
        elif isinstance(u, (Par, OPlus, CommMerge)):
            stack.append((u.left, g, binders))
            stack.append((u.right, g, binders))
        elif isinstance(u, (Delta, Proj)):
            stack.append((u.body, g, binders))
        elif isinstance(u, SumOver):
            stack.append((u.body, g, binders + ((u.var, u.index),)))
    return out


@dataclass
class GuardReport:
    ok: bool
    cycle: list[str] = field(default_factory=list)

    @property
    def message(self) -> str:
        if self.ok:
            return "guarded"
        return "unguarded recursion: " + " -> ".join(self.cycle)

    def __bool__(self):
        return self.ok


def _raw_body(defs: Definitions, name: str) -> Term:
    if name in defs.templates:
        return defs.templates[name].body
    if name in defs.bodies:
        return defs.bodies[name]
    raise UndefinedVariable(f"undefined variable {name}")


def check_guarded(defs: Definitions, goal: Term) -> GuardReport:
    """Every recursive reference must pass through an action prefix.

    Builds the graph of unguarded references between reachable definitions and
    reports a cycle if there is one.
    """
    reach: list[str] = []
    seen: set[str] = set()
    todo = deque(v.name for v, _, _ in var_occurrences(goal))
    while todo:
        n = todo.popleft()
        if n in seen:
            continue
        seen.add(n)
        reach.append(n)
        todo.extend(v.name for v, _, _ in var_occurrences(_raw_body(defs, n)))
    edges = {
        n: sorted({v.name for v, g, _ in var_occurrences(_raw_body(defs, n)) if not g}) for n in reach
    }
    state: dict[str, int] = {}
    path: list[str] = []

    def dfs(n: str) -> list[str] | None:
        state[n] = 1
        path.append(n)
        for m in edges.get(n, ()):
            if state.get(m) == 1:
                return path[path.index(m):] + [m]
            if m not in state:
                c = dfs(m)
                if c:
                    return c
        path.pop()
        state[n] = 2
        return None

    for n in reach:
        if n not in state:
            c = dfs(n)
            if c:
                return GuardReport(False, c)
    return GuardReport(True)


def instantiate_indexed_vars(defs: Definitions, roots: Iterable[Var]) -> tuple[Definitions, int]:
    """Close a family of indexed variables under reachability.

    Only argument tuples are explored; bodies are still built on demand. The
    returned definitions record the reachable instances in ``instances``.
    """
    # per definition: [(callee, binder pools, arg sources)] where an argument
    # source is ('p', i) for a parameter, ('b', j) for a sum binder or
    # ('c', name) for a constant
    plans: dict[str, list] = {}

    def plan(name: str) -> list:
        if name in plans:
            return plans[name]
        if name in defs.templates:
            params = defs.templates[name].params
            body = defs.templates[name].body
        elif name in defs.bodies:
            params, body = (), defs.bodies[name]
        else:
            raise UndefinedVariable(f"undefined variable {name}")
        out = []
        for w, _, binders in var_occurrences(body):
            bnames = [b[0] for b in binders]
            pools = [defs.sets[b[1]] for b in binders]
            srcs = []
            for a in w.args:
                if a in bnames:
                    srcs.append(("b", len(bnames) - 1 - bnames[::-1].index(a)))
                elif a in params:
                    srcs.append(("p", params.index(a)))
                else:
                    srcs.append(("c", a))
            if w.name in defs.templates and len(w.args) != len(defs.templates[w.name].params):
                raise ArityError(f"{w.name} expects {len(defs.templates[w.name].params)} arguments")
            out.append((w.name, pools, tuple(srcs)))
        plans[name] = out
        return out

    seen: set[tuple] = set()
    todo = deque((v.name, tuple(v.args)) for v in roots)
    for name, args in todo:
        if name in defs.templates and len(args) != len(defs.templates[name].params):
            raise ArityError(f"{name} expects {len(defs.templates[name].params)} arguments")
    while todo:
        v = todo.popleft()
        if v in seen:
            continue
        seen.add(v)
        name, args = v
        for callee, pools, srcs in plan(name):
            combos = product(*pools) if pools else [()]
            for combo in combos:
                new = tuple(
                    args[x] if k == "p" else combo[x] if k == "b" else x for k, x in srcs
                )
                w = (callee, new)
                if w not in seen:
                    todo.append(w)
    out = defs.copy()
    out.instances = frozenset(Var(n, a) for n, a in seen)
    return out, len(seen)


def channels_of(t: Term, defs: Definitions | None = None) -> set[str]:
    """Channel names used by ``t`` and every definition it can reach."""
    chans: set[str] = set()
    seen: set[str] = set()
    todo = [t]
    while todo:
        u = todo.pop()
        stack = [u]
        while stack:
            w = stack.pop()
            if isinstance(w, COMM_PREFIXES):
                chans.add(w.chan)
                stack.append(w.rest)
            elif isinstance(w, SeqN):
                stack.append(w.rest)
            elif isinstance(w, (Par, OPlus, LeftMerge, CommMerge)):
                stack.extend((w.left, w.right))
            elif isinstance(w, (Delta, Proj, SumOver)):
                stack.append(w.body)
            elif isinstance(w, Var) and defs is not None and w.name not in seen:
                seen.add(w.name)
                todo.append(_raw_body(defs, w.name))
    return chans


# ACI canonical form ----------------------------------------------------------


def _flatten(t: Term, cls) -> list[Term]:
    out = []
    stack = [t]
    while stack:
        u = stack.pop()
        if isinstance(u, cls):
            stack.append(u.right)
            stack.append(u.left)
        else:
            out.append(u)
    return out


def canonical(t: Term, memo: dict | None = None) -> Term:
    """Representative modulo associativity, commutativity and idempotence of
    choice (with unit ``bot``) and associativity, commutativity and unit of
    parallel composition."""
    if memo is None:
        memo = {}
    hit = memo.get(id(t))
    if hit is not None:
        return hit[1]
    if isinstance(t, (OPlus, Par)):
        cls = type(t)
        parts = [canonical(u, memo) for u in _flatten(t, cls)]
        flat = []
        for u in parts:
            flat.extend(_flatten(u, cls))
        flat = [u for u in flat if not isinstance(u, Bot)]
        keyed = {}
        for u in flat:
            k = term_key(u)
            if cls is OPlus:
                keyed.setdefault(k, u)
            else:
                keyed.setdefault(k, [])
                keyed[k].append(u)
        if cls is OPlus:
            items = [keyed[k] for k in sorted(keyed)]
        else:
            items = [u for k in sorted(keyed) for u in keyed[k]]
        res = BOT if not items else (oplus(*items) if cls is OPlus else par(*items))
    elif isinstance(t, SeqN):
        res = SeqN(t.policy, canonical(t.rest, memo))
    elif isinstance(t, COMM_PREFIXES):
        res = type(t)(t.chan, t.policy, canonical(t.rest, memo))
    elif isinstance(t, (LeftMerge, CommMerge)):
        res = type(t)(canonical(t.left, memo), canonical(t.right, memo))
    elif isinstance(t, (Delta, Proj)):
        first = t.blocked if isinstance(t, Delta) else t.n
        res = type(t)(first, canonical(t.body, memo))
    else:
        res = t
    memo[id(t)] = (t, res)
    return res


def term_key(t: Term) -> str:
    k = t.__dict__.get("_key")
    if k is None:
        k = format_term(t)
        object.__setattr__(t, "_key", k)
    return k


# printing --------------------------------------------------------------------


def format_restriction(blocked) -> str:
    acts = list(blocked)
    return "{" + ", ".join(str(a) for a in acts) + "}"


def _tprec(t: Term) -> int:
    if isinstance(t, OPlus):
        return 1
    if isinstance(t, Par):
        return 2
    if isinstance(t, PREFIXES) or isinstance(t, SumOver):
        return 3
    return 4


def _top(t: Term, need: int) -> str:
    s = format_term(t)
    return f"({s})" if _tprec(t) < need else s


def format_term(t: Term) -> str:
    if isinstance(t, Bot):
        return "bot"
    if isinstance(t, SeqN):
        pol = t.policy
        ptxt = format_policy(pol)
        if isinstance(pol, Canonical):
            ptxt = f"({ptxt})"
        return f"{ptxt} ; {_top(t.rest, 3)}"
    if isinstance(t, Recv):
        return f"{t.chan} ? {_comm_policy(t.policy)} ; {_top(t.rest, 3)}"
    if isinstance(t, Send):
        return f"{t.chan} ! {_comm_policy(t.policy)} ; {_top(t.rest, 3)}"
    if isinstance(t, Rcfg):
        return f"rcfg({t.chan}, {format_policy(t.policy)}) ; {_top(t.rest, 3)}"
    if isinstance(t, OPlus):
        return f"{_top(t.left, 2)} (+) {_top(t.right, 1)}"
    if isinstance(t, Par):
        return f"{_top(t.left, 3)} || {_top(t.right, 2)}"
    if isinstance(t, Var):
        if t.args:
            return f"{t.name}[{', '.join(t.args)}]"
        return t.name
    if isinstance(t, Delta):
        return f"delta{format_restriction(t.blocked)}({format_term(t.body)})"
    if isinstance(t, Proj):
        return f"pi[{t.n}]({format_term(t.body)})"
    if isinstance(t, LeftMerge):
        return f"lmerge({format_term(t.left)}, {format_term(t.right)})"
    if isinstance(t, CommMerge):
        return f"cmerge({format_term(t.left)}, {format_term(t.right)})"
    if isinstance(t, SumOver):
        return f"sum({t.var} in {t.index}) {_top(t.body, 3)}"
    raise TypeError(f"not a term: {t!r}")


def _comm_policy(p: Policy) -> str:
    s = format_policy(p)
    return f"({s})" if isinstance(p, Canonical) else s
