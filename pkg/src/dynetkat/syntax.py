"""Concrete syntax for DyNetKAT programs and safety properties.

A program file declares the packet fields, channels, NetKAT abbreviations,
index sets, recursive process definitions, the initial process and,
optionally, a restriction, an alphabet and safety properties::

    fields { port : {int, ext}; }
    channels { secConReq; secConEnd; }
    netkat Fwd = (port = int) . (port <- ext);
    dnk Switch = Fwd ; Switch (+) secConReq ? one ; Switch';
    init = Host || Switch;
    prop s = [(!rcfg(secConReq, one))^n . flow(port = ext, port <- int)] false;

Choice ``(+)`` and parallel ``||`` associate to the right. A policy or
communication prefix without a continuation is followed by ``bot``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

from .netkat import (
    ONE,
    ZERO,
    Assign,
    Not,
    One,
    Plus,
    Policy,
    Ref,
    Seq,
    Star,
    Test,
    Zero,
    format_policy,
)
from .packets import FieldSchema, SchemaError, Value, parse_value
from .safety import (
    Alphabet,
    Alt,
    Cat,
    FlowAct,
    NotAct,
    Power,
    RcfgAct,
    SafetyError,
    SafetyProp,
    TrueAct,
)
from .terms import (
    BOT,
    Action,
    ArityError,
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
    RestrictionSet,
    Send,
    SeqN,
    SumOver,
    Template,
    Term,
    UndefinedVariable,
    Var,
    check_guarded,
    format_restriction,
    format_term,
    oplus,
    resolve_policy,
    resolve_term,
)


class DnkParseError(ValueError):
    kind = "error"

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        self.msg = message
        where = f"line {line}, col {col}: " if line else ""
        super().__init__(f"{where}{self.kind}: {message}")


class LexError(DnkParseError):
    kind = "lexical error"


class DnkSyntaxError(DnkParseError):
    kind = "syntax error"


class ArityMismatch(DnkParseError):
    kind = "arity error"


class UndefinedName(DnkParseError):
    kind = "undefined name"


class GuardednessError(DnkParseError):
    kind = "unguarded recursion"


class ElaborationError(DnkParseError):
    kind = "invalid program"


# lexer ------------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*|//[^\n]*)
  | (?P<op>\(\+\)|\|\||<-|\.\.)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*'*)
  | (?P<sym>[{}()\[\];:,=+.*~?!^])
    """,
    re.VERBOSE,
)

DECL_KEYWORDS = {"fields", "channels", "netkat", "set", "dnk", "init", "restrict", "alphabet", "prop"}
TERM_KEYWORDS = {"bot", "rcfg", "delta", "pi", "lmerge", "cmerge", "sum"}
RESERVED = DECL_KEYWORDS | TERM_KEYWORDS | {"zero", "one"}


@dataclass
class Token:
    kind: str  # 'ident' | 'int' | 'sym' | 'eof'
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    toks = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise LexError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        s = m.group()
        if kind in ("op", "sym"):
            toks.append(Token("sym", s, line, pos - line_start + 1))
        elif kind in ("int", "ident"):
            toks.append(Token(kind, s, line, pos - line_start + 1))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = pos + s.rfind("\n") + 1
        pos = m.end()
    toks.append(Token("eof", "", line, pos - line_start + 1))
    return toks


# program AST ----------------------------------------------------------------------------


@dataclass
class ProgramFile:
    fields: list = field(default_factory=list)  # [(name, [values])]
    channels: list = field(default_factory=list)
    netkat: dict = field(default_factory=dict)  # name -> Policy
    sets: dict = field(default_factory=dict)  # name -> [names]
    dnk: dict = field(default_factory=dict)  # name -> (params or None, Term)
    init: Term | None = None
    restrict: list | None = None  # [Action]
    alphabet: list | None = None  # [FlowAct | RcfgAct]
    props: dict = field(default_factory=dict)  # name -> regexp
    positions: dict = field(default_factory=dict, compare=False, repr=False)

    def merged(self, other: "ProgramFile") -> "ProgramFile":
        """This program extended with the declarations of ``other``."""
        out = ProgramFile(
            list(self.fields) + [f for f in other.fields if f[0] not in dict(self.fields)],
            list(self.channels) + [c for c in other.channels if c not in self.channels],
            {**self.netkat, **other.netkat},
            {**self.sets, **other.sets},
            {**self.dnk, **other.dnk},
            other.init if other.init is not None else self.init,
            other.restrict if other.restrict is not None else self.restrict,
            other.alphabet if other.alphabet is not None else self.alphabet,
            {**self.props, **other.props},
        )
        out.positions = {**self.positions, **other.positions}
        return out


# parser --------------------------------------------------------------------------------


class _Backtrack(Exception):
    pass


class Parser:
    def __init__(self, text: str, dnk_names: Iterable[str] = ()):
        self.toks = tokenize(text)
        self.pos = 0
        self.dnk_names = set(dnk_names)
        self._prescan()

    def _prescan(self):
        t = self.toks
        for i in range(len(t) - 1):
            if t[i].kind == "ident" and t[i].text == "dnk" and t[i + 1].kind == "ident":
                if i == 0 or t[i - 1].text in (";", "}"):
                    self.dnk_names.add(t[i + 1].text)

    # token helpers
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, text: str, k: int = 0) -> bool:
        tok = self.peek(k)
        return tok.kind in ("sym", "ident") and tok.text == text

    def next(self) -> Token:
        tok = self.peek()
        self.pos += 1
        return tok

    def error(self, msg: str, tok: Token | None = None, cls=DnkSyntaxError):
        tok = tok or self.peek()
        return cls(msg, tok.line, tok.col)

    def expect(self, text: str) -> Token:
        tok = self.peek()
        if tok.text != text or tok.kind == "eof":
            found = "end of input" if tok.kind == "eof" else repr(tok.text)
            raise self.error(f"expected {text!r}, found {found}")
        return self.next()

    def ident(self, what: str = "a name", allow: Iterable[str] = ()) -> Token:
        tok = self.peek()
        if tok.kind != "ident" or (tok.text in RESERVED and tok.text not in allow):
            found = "end of input" if tok.kind == "eof" else repr(tok.text)
            raise self.error(f"expected {what}, found {found}")
        return self.next()

    def value(self) -> Value:
        tok = self.peek()
        if tok.kind == "int":
            self.next()
            return int(tok.text)
        if tok.kind == "ident":
            self.next()
            return parse_value(tok.text)
        raise self.error("expected a field value")

    def end(self):
        if self.peek().kind != "eof":
            raise self.error(f"unexpected {self.peek().text!r}")

    # policies
    def policy(self) -> Policy:
        left = self.pseq()
        if self.at("+"):
            self.next()
            return Plus(left, self.policy())
        return left

    def pseq(self) -> Policy:
        left = self.punary()
        if self.at("."):
            self.next()
            return Seq(left, self.pseq())
        return left

    def punary(self) -> Policy:
        if self.at("~"):
            self.next()
            return Not(self.punary())
        p = self.patom()
        while self.at("*"):
            self.next()
            p = Star(p)
        return p

    def patom(self) -> Policy:
        tok = self.peek()
        if tok.kind == "ident":
            if tok.text == "zero":
                self.next()
                return ZERO
            if tok.text == "one":
                self.next()
                return ONE
            if tok.text in RESERVED or tok.text in self.dnk_names:
                raise self.error(f"expected a policy, found {tok.text!r}")
            self.next()
            if self.at("="):
                self.next()
                return Test(tok.text, self.value())
            if self.at("<-"):
                self.next()
                return Assign(tok.text, self.value())
            return Ref(tok.text)
        if self.at("("):
            self.next()
            p = self.policy()
            self.expect(")")
            return p
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise self.error(f"expected a policy, found {found}")

    # terms
    def term(self) -> Term:
        left = self.tpar()
        if self.at("(+)"):
            self.next()
            return OPlus(left, self.term())
        return left

    def tpar(self) -> Term:
        left = self.tseq()
        if self.at("||"):
            self.next()
            return Par(left, self.tpar())
        return left

    def _starts_term(self, k: int = 0) -> bool:
        tok = self.peek(k)
        if tok.kind == "ident":
            return tok.text not in DECL_KEYWORDS
        return tok.kind == "sym" and tok.text in ("(", "~")

    def _continuation(self) -> Term:
        if self.at(";") and self._starts_term(1):
            self.next()
            return self.tseq()
        return BOT

    def tseq(self) -> Term:
        tok = self.peek()
        if tok.kind == "ident" and tok.text not in RESERVED and self.peek(1).text in ("?", "!") and self.peek(1).kind == "sym":
            self.next()
            op = self.next().text
            pol = self.policy()
            rest = self._continuation()
            return (Recv if op == "?" else Send)(tok.text, pol, rest)
        if tok.kind == "ident" and tok.text == "rcfg":
            self.next()
            self.expect("(")
            chan = self.ident("a channel").text
            self.expect(",")
            pol = self.policy()
            self.expect(")")
            return Rcfg(chan, pol, self._continuation())
        if tok.kind == "ident" and (tok.text in TERM_KEYWORDS or tok.text in self.dnk_names):
            return self.tatom()
        if self.at("("):
            save = self.pos
            try:
                pol = self.policy()
            except DnkSyntaxError:
                self.pos = save
                return self.tatom()
            nxt = self.peek()
            if nxt.kind == "eof" or nxt.text in (";", ")", "||", "(+)", ",") or nxt.text in DECL_KEYWORDS:
                return SeqN(pol, self._continuation())
            self.pos = save
            return self.tatom()
        pol = self.policy()
        return SeqN(pol, self._continuation())

    def tatom(self) -> Term:
        tok = self.peek()
        if self.at("("):
            self.next()
            t = self.term()
            self.expect(")")
            return t
        if tok.kind != "ident":
            raise self.error("expected a process term")
        kw = tok.text
        if kw == "bot":
            self.next()
            return BOT
        if kw == "delta":
            self.next()
            self.expect("{")
            acts = self.actions("}", ",")
            self.expect("(")
            body = self.term()
            self.expect(")")
            return Delta(tuple(acts), body)
        if kw == "pi":
            self.next()
            self.expect("[")
            n = self.peek()
            if n.kind != "int":
                raise self.error("expected a projection depth")
            self.next()
            self.expect("]")
            self.expect("(")
            body = self.term()
            self.expect(")")
            return Proj(int(n.text), body)
        if kw in ("lmerge", "cmerge"):
            self.next()
            self.expect("(")
            a = self.term()
            self.expect(",")
            b = self.term()
            self.expect(")")
            return (LeftMerge if kw == "lmerge" else CommMerge)(a, b)
        if kw == "sum":
            self.next()
            self.expect("(")
            var = self.ident("an index variable").text
            if not self.at("in"):
                raise self.error("expected 'in'")
            self.next()
            idx = self.ident("an index set").text
            self.expect(")")
            return SumOver(var, idx, self.tseq())
        if kw in RESERVED:
            raise self.error(f"unexpected {kw!r}")
        self.next()
        args: tuple = ()
        if self.at("["):
            self.next()
            names = [self.ident("an argument", allow=("zero", "one")).text]
            while self.at(","):
                self.next()
                names.append(self.ident("an argument", allow=("zero", "one")).text)
            self.expect("]")
            args = tuple(names)
        return Var(kw, args)

    def actions(self, close: str, sep: str) -> list[Action]:
        acts = []
        while not self.at(close):
            chan = self.ident("a channel").text
            tok = self.peek()
            if tok.text not in ("?", "!"):
                raise self.error("expected '?' or '!'")
            self.next()
            if self.at("*"):
                self.next()
                pol = None
            else:
                pol = self.policy()
            acts.append(Action(tok.text, chan, pol))
            if self.at(sep):
                self.next()
            elif not self.at(close):
                raise self.error(f"expected {sep!r} or {close!r}")
        self.expect(close)
        return acts

    # regular expressions
    def regexp(self):
        left = self.rcat()
        if self.at("+"):
            self.next()
            return Alt(left, self.regexp())
        return left

    def rcat(self):
        left = self.rpow()
        if self.at("."):
            self.next()
            return Cat(left, self.rcat())
        return left

    def rpow(self):
        r = self.ratom()
        while self.at("^"):
            self.next()
            tok = self.next()
            if tok.kind == "int":
                n = int(tok.text)
                if n < 0:
                    raise self.error("negative power", tok)
                r = Power(r, n)
            elif tok.kind == "ident":
                r = Power(r, tok.text)
            else:
                raise self.error("expected an exponent", tok)
        return r

    def ratom(self):
        if self.at("!"):
            self.next()
            return NotAct(self.ratom())
        if self.at("("):
            self.next()
            r = self.regexp()
            self.expect(")")
            return r
        return self.act()

    def act(self):
        tok = self.peek()
        if tok.kind == "ident" and tok.text == "true":
            self.next()
            return TrueAct()
        if tok.kind == "ident" and tok.text == "flow":
            self.next()
            self.expect("(")
            a = self.policy()
            self.expect(",")
            b = self.policy()
            self.expect(")")
            return FlowAct(a, b)
        if tok.kind == "ident" and tok.text == "rcfg":
            self.next()
            self.expect("(")
            chan = self.ident("a channel").text
            self.expect(",")
            p = self.policy()
            self.expect(")")
            return RcfgAct(chan, p)
        raise self.error("expected flow(...), rcfg(...), true or a parenthesised expression")

    # programs
    def program(self) -> ProgramFile:
        pf = ProgramFile()
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.kind != "ident" or tok.text not in DECL_KEYWORDS:
                raise self.error(f"expected a declaration, found {tok.text!r}")
            getattr(self, "decl_" + tok.text)(pf)
        return pf

    def _dup(self, table, name: str, tok: Token):
        if name in table:
            raise self.error(f"{name} is declared twice", tok)

    def decl_fields(self, pf: ProgramFile):
        self.next()
        self.expect("{")
        while not self.at("}"):
            ftok = self.ident("a field name")
            self.expect(":")
            self.expect("{")
            vals: list = []
            while not self.at("}"):
                v = self.value()
                if self.at(".."):
                    self.next()
                    hi = self.value()
                    if not isinstance(v, int) or not isinstance(hi, int) or hi < v:
                        raise self.error("bad range", ftok)
                    vals.extend(range(v, hi + 1))
                else:
                    vals.append(v)
                if self.at(","):
                    self.next()
                elif not self.at("}"):
                    raise self.error("expected ',' or '}'")
            self.expect("}")
            self.expect(";")
            if any(f[0] == ftok.text for f in pf.fields):
                raise self.error(f"field {ftok.text} declared twice", ftok)
            pf.fields.append((ftok.text, vals))
        self.expect("}")

    def decl_channels(self, pf: ProgramFile):
        self.next()
        self.expect("{")
        while not self.at("}"):
            pf.channels.append(self.ident("a channel").text)
            if self.at(";") or self.at(","):
                self.next()
            elif not self.at("}"):
                raise self.error("expected ';' or '}'")
        self.expect("}")

    def decl_netkat(self, pf: ProgramFile):
        self.next()
        tok = self.ident("a policy name")
        self._dup(pf.netkat, tok.text, tok)
        self.expect("=")
        pf.netkat[tok.text] = self.policy()
        pf.positions[tok.text] = (tok.line, tok.col)
        self.expect(";")

    def decl_set(self, pf: ProgramFile):
        self.next()
        tok = self.ident("a set name")
        self._dup(pf.sets, tok.text, tok)
        self.expect("=")
        self.expect("{")
        names = []
        while not self.at("}"):
            names.append(self.ident("a policy name", allow=("zero", "one")).text)
            if self.at(","):
                self.next()
            elif not self.at("}"):
                raise self.error("expected ',' or '}'")
        self.expect("}")
        self.expect(";")
        pf.sets[tok.text] = names
        pf.positions[tok.text] = (tok.line, tok.col)

    def decl_dnk(self, pf: ProgramFile):
        self.next()
        tok = self.ident("a process name")
        self._dup(pf.dnk, tok.text, tok)
        params = None
        if self.at("["):
            self.next()
            params = [self.ident("a parameter").text]
            while self.at(","):
                self.next()
                params.append(self.ident("a parameter").text)
            self.expect("]")
            params = tuple(params)
        self.expect("=")
        body = self.term()
        self.expect(";")
        pf.dnk[tok.text] = (params, body)
        pf.positions[tok.text] = (tok.line, tok.col)

    def decl_init(self, pf: ProgramFile):
        tok = self.next()
        if pf.init is not None:
            raise self.error("init declared twice", tok)
        self.expect("=")
        pf.init = self.term()
        pf.positions["init"] = (tok.line, tok.col)
        self.expect(";")

    def decl_restrict(self, pf: ProgramFile):
        self.next()
        self.expect("{")
        pf.restrict = (pf.restrict or []) + self.actions("}", ";")

    def decl_alphabet(self, pf: ProgramFile):
        self.next()
        self.expect("{")
        acts = []
        while not self.at("}"):
            a = self.act()
            if isinstance(a, TrueAct):
                raise self.error("alphabet entries are flow(...) or rcfg(...)")
            acts.append(a)
            self.expect(";")
        self.expect("}")
        pf.alphabet = (pf.alphabet or []) + acts

    def decl_prop(self, pf: ProgramFile):
        self.next()
        tok = self.ident("a property name")
        self._dup(pf.props, tok.text, tok)
        self.expect("=")
        self.expect("[")
        r = self.regexp()
        self.expect("]")
        f = self.peek()
        if f.text != "false":
            raise self.error("expected 'false'")
        self.next()
        self.expect(";")
        pf.props[tok.text] = r
        pf.positions[tok.text] = (tok.line, tok.col)


def parse_program(text: str) -> ProgramFile:
    p = Parser(text)
    return p.program()


def parse_policy(text: str) -> Policy:
    p = Parser(text)
    pol = p.policy()
    p.end()
    return pol


def parse_term(text: str, dnk_names: Iterable[str] = ()) -> Term:
    p = Parser(text, dnk_names)
    t = p.term()
    p.end()
    return t


def parse_regexp(text: str):
    p = Parser(text)
    r = p.regexp()
    p.end()
    return r


# printer ----------------------------------------------------------------------------------

INDENT = "    "


def _fmt_values(vals: list) -> str:
    if len(vals) >= 3 and all(isinstance(v, int) for v in vals) and vals == list(range(vals[0], vals[0] + len(vals))):
        return f"{{{vals[0]}..{vals[-1]}}}"
    return "{" + ", ".join(str(v) for v in vals) + "}"


def _fmt_body(t: Term) -> str:
    parts = []
    while isinstance(t, OPlus):
        parts.append(t.left)
        t = t.right
    parts.append(t)
    if len(parts) == 1:
        return " " + format_term(parts[0])
    lines = ["\n" + INDENT + _operand(parts[0])]
    lines += ["\n" + INDENT + "(+) " + _operand(p) for p in parts[1:-1]]
    lines.append("\n" + INDENT + "(+) " + format_term(parts[-1]))
    return "".join(lines)


def _operand(t: Term) -> str:
    s = format_term(t)
    return f"({s})" if isinstance(t, OPlus) else s


def format_program(pf: ProgramFile) -> str:
    out: list[str] = []
    if pf.fields:
        lines = [f"{INDENT}{name} : {_fmt_values(list(vals))};" for name, vals in pf.fields]
        out.append("fields {\n" + "\n".join(lines) + "\n}\n")
    if pf.channels:
        out.append("channels {\n" + "".join(f"{INDENT}{c};\n" for c in pf.channels) + "}\n")
    if pf.netkat:
        out.append("".join(f"netkat {n} = {format_policy(p)};\n" for n, p in pf.netkat.items()))
    if pf.sets:
        out.append("".join(f"set {n} = {{{', '.join(v)}}};\n" for n, v in pf.sets.items()))
    for name, (params, body) in pf.dnk.items():
        head = name if params is None else f"{name}[{', '.join(params)}]"
        out.append(f"dnk {head} ={_fmt_body(body)};\n")
    if pf.init is not None:
        out.append(f"init ={_fmt_body(pf.init)};\n")
    if pf.restrict is not None:
        out.append("restrict {\n" + "".join(f"{INDENT}{a};\n" for a in pf.restrict) + "}\n")
    if pf.alphabet is not None:
        out.append("alphabet {\n" + "".join(f"{INDENT}{a};\n" for a in pf.alphabet) + "}\n")
    if pf.props:
        out.append("".join(f"prop {n} = [{r}] false;\n" for n, r in pf.props.items()))
    return "\n".join(out)


# elaboration -----------------------------------------------------------------------------


@dataclass
class Model:
    """An elaborated program: schema, closed definitions and properties."""

    program: ProgramFile
    schema: FieldSchema
    defs: Definitions
    init: Term | None
    channels: tuple
    restriction: RestrictionSet | None = None
    alphabet: Alphabet | None = None
    props: dict = field(default_factory=dict)
    source: str = ""

    @property
    def policies(self) -> dict:
        return self.defs.policies

    def restricted(self, t: Term | None = None, auto: bool = True) -> Term:
        """``t`` (default: the initial process) under the declared
        restriction, or under a restriction of every channel when none is
        declared and ``auto`` is set."""
        t = self.init if t is None else t
        if t is None:
            raise ElaborationError("the program has no init declaration")
        if self.restriction is not None:
            return Delta(self.restriction, t)
        if not auto:
            return t
        from .terms import channels_of

        chans = set(self.channels) | channels_of(t, self.defs)
        return Delta(RestrictionSet.everything(chans), t) if chans else t

    def term(self, text: str) -> Term:
        t = parse_term(text, self.defs.names())
        try:
            return resolve_term(t, {}, self.defs)
        except UndefinedVariable as e:
            raise UndefinedName(str(e)) from None
        except ArityError as e:
            raise ArityMismatch(str(e)) from None

    def policy(self, text: str) -> Policy:
        p = parse_policy(text)
        try:
            pol = resolve_policy(p, {}, self.defs)
        except UndefinedVariable as e:
            raise UndefinedName(str(e)) from None
        _check_policy(pol, self.schema, (0, 0))
        return pol

    def prop(self, name: str | None = None) -> SafetyProp:
        if not self.props:
            raise ElaborationError("the program declares no property")
        if name is None:
            if len(self.props) > 1:
                raise ElaborationError(f"several properties; choose one of {sorted(self.props)}")
            name = next(iter(self.props))
        try:
            return self.props[name]
        except KeyError:
            raise UndefinedName(f"no property {name}") from None


def _check_policy(p: Policy, schema: FieldSchema, where: tuple[int, int]):
    stack = [p]
    while stack:
        q = stack.pop()
        if isinstance(q, (Test, Assign)):
            try:
                fpos = schema.field_pos(q.field)
                schema.value_pos(fpos, q.value)
            except SchemaError as e:
                raise ElaborationError(str(e), *where) from None
        elif isinstance(q, (Plus, Seq)):
            stack.extend((q.left, q.right))
        elif isinstance(q, (Star, Not)):
            stack.append(q.arg)
        elif isinstance(q, Ref):
            raise UndefinedName(f"undefined policy name {q.name}", *where)


def _term_policies(t: Term):
    stack = [t]
    while stack:
        u = stack.pop()
        if isinstance(u, (SeqN, Recv, Send, Rcfg)):
            yield u.policy
            stack.append(u.rest)
        elif isinstance(u, (Par, OPlus, LeftMerge, CommMerge)):
            stack.extend((u.left, u.right))
        elif isinstance(u, (Delta, Proj, SumOver)):
            stack.append(u.body)
            if isinstance(u, Delta):
                for a in u.blocked:
                    if a.policy is not None:
                        yield a.policy


def elaborate(pf: ProgramFile, source: str = "", check_guards: bool = True) -> Model:
    pos = pf.positions
    if not pf.fields:
        raise ElaborationError("no fields declared")
    try:
        schema = FieldSchema([(n, v) for n, v in pf.fields])
    except SchemaError as e:
        raise ElaborationError(str(e)) from None

    # policy abbreviations, resolved in dependency order
    resolved: dict[str, Policy] = {"zero": ZERO, "one": ONE}
    visiting: list[str] = []

    def resolve_name(name: str) -> Policy:
        if name in resolved:
            return resolved[name]
        if name not in pf.netkat:
            raise UndefinedName(f"undefined policy name {name}", *pos.get(visiting[-1] if visiting else "", (0, 0)))
        if name in visiting:
            raise ElaborationError(f"policy {name} is defined in terms of itself", *pos.get(name, (0, 0)))
        visiting.append(name)
        pol = _subst_refs(pf.netkat[name], resolve_name)
        visiting.pop()
        _check_policy(pol, schema, pos.get(name, (0, 0)))
        resolved[name] = pol
        return pol

    for name in pf.netkat:
        resolve_name(name)
    for sname, names in pf.sets.items():
        for n in names:
            if n not in resolved:
                raise UndefinedName(f"set {sname} mentions undefined policy {n}", *pos.get(sname, (0, 0)))

    concrete = {n: b for n, (params, b) in pf.dnk.items() if params is None}
    templates = {n: Template(tuple(params), b) for n, (params, b) in pf.dnk.items() if params is not None}
    defs = Definitions(concrete, templates, resolved, pf.sets, schema)
    for name, tpl in templates.items():
        clash = set(tpl.params) & (set(resolved) | set(pf.dnk))
        if clash:
            raise ElaborationError(f"parameter {sorted(clash)[0]} of {name} shadows a declaration", *pos.get(name, (0, 0)))
    for name, body in list(concrete.items()):
        defs.bodies[name] = _elab(body, {}, defs, pos.get(name, (0, 0)), schema)
    for name, tpl in templates.items():
        # a trial instantiation catches undefined names and arity errors early
        _elab(tpl.body, {p: "one" for p in tpl.params}, defs, pos.get(name, (0, 0)), schema)

    init = None
    if pf.init is not None:
        init = _elab(pf.init, {}, defs, pos.get("init", (0, 0)), schema)

    if check_guards:
        goal = oplus(*(Var(n, ("one",) * len(templates[n].params) if n in templates else ()) for n in defs.names()))
        report = check_guarded(defs, goal)
        if not report:
            first = report.cycle[0]
            raise GuardednessError(report.message, *pos.get(first, (0, 0)))

    restriction = None
    if pf.restrict is not None:
        acts = [Action(a.direction, a.chan, None if a.policy is None else _subst_refs(a.policy, resolve_name)) for a in pf.restrict]
        for a in acts:
            if a.policy is not None:
                _check_policy(a.policy, schema, (0, 0))
        restriction = RestrictionSet.of(schema, acts)

    alphabet = None
    if pf.alphabet is not None:
        acts = [_bind_refs(a, resolve_name) for a in pf.alphabet]
        try:
            alphabet = Alphabet.from_acts(acts, schema)
        except SafetyError as e:
            raise ElaborationError(str(e)) from None

    props = {n: SafetyProp(n, _regexp_refs(r, resolve_name)) for n, r in pf.props.items()}
    for n, prop in props.items():
        _check_regexp(prop.regexp, schema, pos.get(n, (0, 0)))

    from .terms import channels_of

    chans = list(pf.channels)
    used = set()
    for name in defs.names():
        used |= channels_of(Var(name, ("one",) * len(templates[name].params)) if name in templates else Var(name), defs)
    if init is not None:
        used |= channels_of(init, defs)
    for c in sorted(used):
        if c not in chans:
            chans.append(c)
    return Model(pf, schema, defs, init, tuple(chans), restriction, alphabet, props, source)


def _subst_refs(p: Policy, lookup) -> Policy:
    if isinstance(p, Ref):
        return lookup(p.name)
    if isinstance(p, (Plus, Seq)):
        return type(p)(_subst_refs(p.left, lookup), _subst_refs(p.right, lookup))
    if isinstance(p, (Star, Not)):
        return type(p)(_subst_refs(p.arg, lookup))
    return p


def _bind_refs(act, lookup):
    if isinstance(act, FlowAct):
        return FlowAct(_subst_refs(act.test, lookup), _subst_refs(act.assign, lookup))
    if isinstance(act, RcfgAct):
        return RcfgAct(act.chan, _subst_refs(act.policy, lookup))
    return act


def _regexp_refs(r, lookup):
    if isinstance(r, (FlowAct, RcfgAct)):
        return _bind_refs(r, lookup)
    if isinstance(r, NotAct):
        return NotAct(_regexp_refs(r.act, lookup))
    if isinstance(r, (Alt, Cat)):
        return type(r)(_regexp_refs(r.left, lookup), _regexp_refs(r.right, lookup))
    if isinstance(r, Power):
        return Power(_regexp_refs(r.body, lookup), r.n)
    return r


def _check_regexp(r, schema, where):
    if isinstance(r, FlowAct):
        _check_policy(r.test, schema, where)
        _check_policy(r.assign, schema, where)
    elif isinstance(r, RcfgAct):
        _check_policy(r.policy, schema, where)
    elif isinstance(r, NotAct):
        _check_regexp(r.act, schema, where)
    elif isinstance(r, (Alt, Cat)):
        _check_regexp(r.left, schema, where)
        _check_regexp(r.right, schema, where)
    elif isinstance(r, Power):
        _check_regexp(r.body, schema, where)


def _elab(t: Term, env: dict, defs: Definitions, where: tuple[int, int], schema: FieldSchema) -> Term:
    try:
        res = resolve_term(t, env, defs)
    except UndefinedVariable as e:
        raise UndefinedName(str(e), *where) from None
    except ArityError as e:
        raise ArityMismatch(str(e), *where) from None
    except SchemaError as e:
        raise ElaborationError(str(e), *where) from None
    for p in _term_policies(res):
        _check_policy(p, schema, where)
    return res


def load_model(text: str, source: str = "", props_text: str | None = None, check_guards: bool = True) -> Model:
    pf = parse_program(text)
    if props_text is not None:
        pf = pf.merged(parse_program(props_text))
    return elaborate(pf, source, check_guards)
