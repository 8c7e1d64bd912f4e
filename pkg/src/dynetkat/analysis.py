"""Reachability and waypoint analysis of the NetKAT configurations a DyNetKAT
network goes through.

``head`` collects the flow behaviour available before the next
reconfiguration, ``tail`` moves past selected reconfiguration events; the
resulting NetKAT policies are then checked with the NetKAT decision procedure.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from importlib import resources
from typing import Iterable

from .netkat import (
    ONE,
    Canonical,
    NkRelation,
    Not,
    Policy,
    Seq,
    Star,
    normalize,
    seq,
)
from .normalizer import Normalizer
from .packets import FieldSchema, Packet
from .semantics import Flow, RcfgL, RecvL, SendL
from .terms import BOT, Definitions, Delta, RestrictionSet, Term, TermError, channels_of, oplus, term_key, canonical


class PreconditionError(TermError):
    pass


class DepthExhausted(RuntimeError):
    def __init__(self, message: str, partial: Term | None = None):
        super().__init__(message)
        self.partial = partial


def restrict_all(t: Term, defs: Definitions, channels: Iterable[str] | None = None) -> Term:
    """Block every unmatched send and receive of ``t``."""
    chans = set(channels) if channels is not None else channels_of(t, defs)
    if not chans:
        return t
    return Delta(RestrictionSet.everything(chans), t)


def _no_bare_comm(summand, where: Term):
    if isinstance(summand.label, (SendL, RecvL)):
        raise PreconditionError(
            f"unrestricted {summand.label} offered; restrict sends and receives first"
        )


def head(t: Term, defs: Definitions, schema: FieldSchema, normalizer: Normalizer | None = None) -> Policy:
    """The flows ``t`` can perform before its next reconfiguration, as a
    NetKAT policy (a sum of complete test/assignment pairs)."""
    nz = normalizer or Normalizer(defs, schema)
    pairs: set[tuple[int, int]] = set()
    memo: dict = {}
    start = canonical(t, memo)
    seen = {term_key(start)}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for x in nz.hnf(u):
            _no_bare_comm(x, u)
            if isinstance(x.label, Flow):
                pairs.add((x.label.src.index, x.label.dst.index))
                c = canonical(x.cont, memo)
                k = term_key(c)
                if k not in seen:
                    seen.add(k)
                    queue.append(c)
    return Canonical(NkRelation(schema, pairs))


def _event_set(events, schema: FieldSchema) -> set[tuple[str, NkRelation]]:
    out = set()
    for e in events:
        if isinstance(e, RcfgL):
            out.add((e.chan, e.relation))
        else:
            chan, pol = e
            out.add((chan, normalize(pol, schema)))
    return out


def tail(
    t: Term,
    events,
    defs: Definitions,
    schema: FieldSchema,
    depth: int | None = None,
    normalizer: Normalizer | None = None,
) -> Term:
    """The continuations of ``t`` after any reconfiguration in ``events``.

    Flows are stepped over, reconfigurations outside ``events`` lead nowhere,
    and after a selected event both the continuation and its own tail are
    kept. ``events`` holds RcfgL labels or (channel, policy) pairs.
    """
    nz = normalizer or Normalizer(defs, schema)
    R = _event_set(events, schema)
    if depth is None:
        depth = sum(1 for x in nz.hnf(t) if isinstance(x.label, RcfgL)) + 2
    memo: dict = {}
    start = canonical(t, memo)
    seen = {term_key(start)}
    frontier = [start]
    results: dict[str, Term] = {}
    level = 0
    while frontier:
        if level >= depth:
            raise DepthExhausted(
                f"tail did not close within depth {depth}", oplus(*results.values()) if results else BOT
            )
        nxt = []
        for u in frontier:
            for x in nz.hnf(u):
                _no_bare_comm(x, u)
                a = x.label
                if isinstance(a, RcfgL) and (a.chan, a.relation) not in R:
                    continue
                c = canonical(x.cont, memo)
                k = term_key(c)
                if isinstance(a, RcfgL):
                    results.setdefault(k, c)
                if k not in seen:
                    seen.add(k)
                    nxt.append(c)
        frontier = nxt
        level += 1
    if not results:
        return BOT
    return oplus(*(results[k] for k in sorted(results)))


@dataclass
class ReachResult:
    reachable: bool
    pairs: tuple = ()

    def __bool__(self):
        return self.reachable

    @property
    def witness(self) -> tuple[Packet, Packet] | None:
        return self.pairs[0] if self.pairs else None


def reach_policy(inp: Policy, outp: Policy, p: Policy, t: Policy = ONE, star: bool = True) -> Policy:
    if star:
        return seq(inp, Star(Seq(p, t)), outp)
    return seq(inp, p, outp)


def check_reach(
    inp: Policy, outp: Policy, p: Policy, schema: FieldSchema, t: Policy = ONE, star: bool = True
) -> ReachResult:
    """Whether some packet satisfying ``inp`` can end up satisfying ``outp``
    (``in . (p . t)* . out`` is not empty, or ``in . p . out`` without star)."""
    rel = normalize(reach_policy(inp, outp, p, t, star), schema)
    return ReachResult(bool(rel), tuple(rel)[:5])


def waypoint_policies(inp: Policy, outp: Policy, via: Policy, p: Policy, t: Policy = ONE) -> tuple[Policy, Policy]:
    step = Seq(p, t)
    through = seq(inp, Star(seq(Not(outp), step)), via, Star(seq(Not(inp), step)), outp)
    every = seq(inp, Star(step), outp)
    from .netkat import Plus

    return Plus(every, through), through


@dataclass
class WaypointResult:
    holds: bool
    bypass: tuple = ()

    def __bool__(self):
        return self.holds


def check_waypoint(
    inp: Policy, outp: Policy, via: Policy, p: Policy, schema: FieldSchema, t: Policy = ONE
) -> WaypointResult:
    """Whether every path from ``inp`` to ``outp`` passes through ``via``."""
    lhs, rhs = waypoint_policies(inp, outp, via, p, t)
    l = normalize(lhs, schema)
    r = normalize(rhs, schema)
    if l == r:
        return WaypointResult(True)
    extra = sorted(l.pairs - r.pairs)[:5]
    return WaypointResult(False, tuple((Packet(schema, a), Packet(schema, b)) for a, b in extra))


# fixtures -------------------------------------------------------------------------------

FIXTURES = {
    "firewall": "firewall.dnk",
    "controllers-independent": "controllers_independent.dnk",
    "controllers-sync": "controllers_sync.dnk",
}


def fixture_text(name: str) -> str:
    try:
        fname = FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}") from None
    return resources.files("dynetkat").joinpath("fixtures", fname).read_text()


def load_fixture(name: str):
    from .syntax import load_model

    return load_model(fixture_text(name), source=name)


def fixtures() -> dict:
    return {name: load_fixture(name) for name in FIXTURES}
