"""Bisimilarity, bounded equivalence and bounded trace properties."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Protocol

from .netkat import Policy, nk_equiv
from .normalizer import Normalizer, aci_equal
from .packets import FieldSchema
from .semantics import (
    DEFAULT_DEPTH,
    Label,
    Lts,
    StateBudgetExceeded,
    build_lts,
    format_word,
    term_step,
)
from .terms import Definitions, SeqN, Term, canonical, term_key


@dataclass
class Witness:
    """A path distinguishing two systems.

    ``word`` is the sequence of labels taken, ``sides`` names the system that
    chose each step ('left' or 'right'), and ``reason`` says why the other
    system fails at the end: it has no transition with the last label.
    """

    word: tuple
    sides: tuple
    reason: str = "missing transition"

    @property
    def side(self) -> str:
        return self.sides[-1] if self.sides else "left"

    def __str__(self):
        other = "right" if self.side == "left" else "left"
        return f"{self.side} can do {format_word(self.word)}; {other} cannot match ({self.reason})"


@dataclass
class Verdict:
    outcome: str  # 'equivalent' | 'inequivalent' | 'inconclusive'
    witness: Witness | None = None
    detail: str = ""

    @property
    def equivalent(self) -> bool:
        return self.outcome == "equivalent"

    def __bool__(self):
        return self.equivalent


def refine(num_states: int, transitions: Iterable[tuple[int, Label, int]]) -> list[list[int]]:
    """Signature-based partition refinement.

    Returns the block assignment after every round; the last entry is the
    coarsest bisimulation.
    """
    succ: list[list[tuple[Label, int]]] = [[] for _ in range(num_states)]
    for s, a, d in transitions:
        succ[s].append((a, d))
    blocks = [0] * num_states
    history = [blocks]
    count = 1
    while True:
        sigs: dict = {}
        new = []
        for i in range(num_states):
            sig = (blocks[i], frozenset((a, blocks[j]) for a, j in succ[i]))
            new.append(sigs.setdefault(sig, len(sigs)))
        history.append(new)
        if len(sigs) == count:
            return history
        count = len(sigs)
        blocks = new


def _witness(history, succ, x: int, y: int, split: int) -> Witness:
    """Walk the refinement history from the pair (x, y); states below
    ``split`` belong to the left system."""
    word: list = []
    sides: list = []
    side_of = lambda i: "left" if i < split else "right"  # noqa: E731
    while True:
        r = next(k for k in range(len(history)) if history[k][x] != history[k][y])
        prev = history[r - 1]
        sx = {(a, prev[j]) for a, j in succ[x]}
        sy = {(a, prev[j]) for a, j in succ[y]}
        diff = sorted(sx - sy, key=lambda e: e[0].sort_key())
        if not diff:
            x, y = y, x
            sx, sy = sy, sx
            diff = sorted(sx - sy, key=lambda e: e[0].sort_key())
        a, blk = diff[0]
        nx = next(j for b, j in succ[x] if b == a and prev[j] == blk)
        word.append(a)
        sides.append(side_of(x))
        others = [j for b, j in succ[y] if b == a]
        if not others:
            return Witness(tuple(word), tuple(sides))
        # an answer still equivalent one round earlier keeps the word as
        # short as the round in which the two states separate
        earlier = history[r - 2] if r >= 2 else prev
        others.sort(key=lambda j: earlier[j] != earlier[nx])
        x, y = nx, others[0]


def bisimilar(
    t1: Term,
    t2: Term,
    defs: Definitions,
    schema: FieldSchema,
    max_states: int | None = None,
    merge: str = "aci",
) -> Verdict:
    """Strong bisimilarity of the two terms' transition systems."""
    try:
        l1 = build_lts(t1, defs, schema, max_states, merge)
        l2 = build_lts(t2, defs, schema, max_states, merge)
    except StateBudgetExceeded as e:
        return Verdict("inconclusive", detail=str(e))
    return compare_lts(l1, l2)


def compare_lts(l1: Lts, l2: Lts) -> Verdict:
    n1 = len(l1)
    trans = list(l1.transitions) + [(s + n1, a, d + n1) for s, a, d in l2.transitions]
    total = n1 + len(l2)
    history = refine(total, trans)
    final = history[-1]
    if final[l1.initial] == final[n1 + l2.initial]:
        return Verdict("equivalent", detail=f"{n1}+{len(l2)} states")
    succ: list[list] = [[] for _ in range(total)]
    for s, a, d in trans:
        succ[s].append((a, d))
    w = _witness(history, succ, l1.initial, n1 + l2.initial, n1)
    return Verdict("inequivalent", w, detail=f"{n1}+{len(l2)} states")


def bounded_equiv(t1: Term, t2: Term, defs: Definitions, schema: FieldSchema, n: int) -> bool:
    """Bisimilarity of the ``n``-step projections of the two terms."""
    nz = Normalizer(defs, schema)
    return aci_equal(nz.unfold(t1, n), nz.unfold(t2, n), schema)


@dataclass
class LayeringResult:
    nk_equivalent: bool
    bisimilar: bool

    @property
    def consistent(self) -> bool:
        return self.nk_equivalent == self.bisimilar


def semantic_layering_check(p: Policy, q: Policy, d: Term, defs: Definitions, schema: FieldSchema) -> LayeringResult:
    """Compare NetKAT equivalence of ``p`` and ``q`` with bisimilarity of
    ``p ; d`` and ``q ; d``."""
    nk = nk_equiv(p, q, schema)
    b = bisimilar(SeqN(p, d), SeqN(q, d), defs, schema)
    if b.outcome == "inconclusive":
        raise StateBudgetExceeded(b.detail)
    return LayeringResult(nk, b.equivalent)


# trace properties ---------------------------------------------------------------


class Monitor(Protocol):
    def start(self): ...

    def step(self, state, label: Label):
        """Next monitor state, or None when the word so far violates."""


@dataclass
class ForbidLabel:
    """Violated by any word containing one of the given labels."""

    labels: frozenset

    def start(self):
        return 0

    def step(self, state, label):
        return None if label in self.labels else 0


@dataclass
class Precedence:
    """Violated when a ``guarded`` label occurs before any ``enabling`` label."""

    guarded: Callable[[Label], bool]
    enabling: Callable[[Label], bool]

    def start(self):
        return False

    def step(self, seen, label):
        if self.enabling(label):
            return True
        if not seen and self.guarded(label):
            return None
        return seen


@dataclass
class WordPredicate:
    """Wraps a predicate on whole words; the monitor state is the word itself."""

    ok: Callable[[tuple], bool]

    def start(self):
        return ()

    def step(self, word, label):
        w = word + (label,)
        return w if self.ok(w) else None


@dataclass
class TraceResult:
    holds: bool
    witness: tuple | None = None
    explored: int = 0
    exhausted: bool = True

    def __bool__(self):
        return self.holds


def trace_included(
    t: Term,
    monitor: Monitor,
    defs: Definitions,
    schema: FieldSchema,
    depth: int | None = DEFAULT_DEPTH,
    max_states: int | None = None,
) -> TraceResult:
    """Check every trace of ``t`` up to ``depth`` labels against ``monitor``.

    Breadth-first over (state, monitor state) pairs, so a returned witness is
    a shortest violating word. ``depth=None`` explores to closure.
    """
    from .semantics import state_budget

    budget = state_budget(max_states)
    memo: dict = {}
    t0 = canonical(t, memo)
    m0 = monitor.start()
    seen = {(term_key(t0), m0)}
    queue = deque([(t0, m0, ())])
    while queue:
        u, m, word = queue.popleft()
        if depth is not None and len(word) >= depth:
            continue
        succs = sorted(
            term_step(u, defs, schema),
            key=lambda x: x[0].sort_key(),
        )
        for a, u2 in succs:
            m2 = monitor.step(m, a)
            w2 = word + (a,)
            if m2 is None:
                return TraceResult(False, w2, len(seen))
            u2 = canonical(u2, memo)
            k = (term_key(u2), m2)
            if k in seen:
                continue
            if len(seen) >= budget:
                raise StateBudgetExceeded(f"more than {budget} product states")
            seen.add(k)
            queue.append((u2, m2, w2))
    return TraceResult(True, None, len(seen))


def lts_trace_check(lts: Lts, monitor: Monitor) -> TraceResult:
    """Monitor every path of an already built transition system."""
    m0 = monitor.start()
    seen = {(lts.initial, m0)}
    queue = deque([(lts.initial, m0, ())])
    while queue:
        i, m, word = queue.popleft()
        for a, j in sorted(lts.successors(i), key=lambda x: (x[0].sort_key(), x[1])):
            m2 = monitor.step(m, a)
            if m2 is None:
                return TraceResult(False, word + (a,), len(seen))
            if (j, m2) not in seen:
                seen.add((j, m2))
                queue.append((j, m2, word + (a,)))
    return TraceResult(True, None, len(seen))


def is_trace(t: Term, word: Iterable[Label], defs: Definitions, schema: FieldSchema) -> bool:
    """Whether ``t`` can perform the given word."""
    memo: dict = {}
    current = {term_key(canonical(t, memo)): canonical(t, memo)}
    for a in word:
        nxt = {}
        for u in current.values():
            for b, u2 in term_step(u, defs, schema):
                if b == a:
                    c = canonical(u2, memo)
                    nxt[term_key(c)] = c
        if not nxt:
            return False
        current = nxt
    return True
