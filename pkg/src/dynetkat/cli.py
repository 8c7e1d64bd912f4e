"""Command line interface.

Exit codes: 0 the property holds (or the command succeeded), 1 the property
is violated (a witness is printed), 2 usage or input error, 3 a state budget
or depth bound was exhausted.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from pathlib import Path

from .analysis import FIXTURES, DepthExhausted, PreconditionError, check_reach, check_waypoint, fixture_text, head, tail
from .equivalence import bisimilar
from .normalizer import Normalizer
from .packets import SchemaError, parse_value
from .safety import SafetyError, check_safe, derive_alphabet, format_regexp
from .semantics import Config, StateBudgetExceeded, build_lts, format_word, label_json
from .syntax import DnkParseError, Model, load_model
from .terms import TermError, format_term

OK, VIOLATED, USAGE, BUDGET = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# input ---------------------------------------------------------------------------------


def _read(spec: str) -> tuple[str, str]:
    path = Path(spec)
    if path.exists():
        return path.read_text(), str(path)
    if spec in FIXTURES:
        return fixture_text(spec), spec
    raise UsageError(f"no such file or fixture: {spec} (fixtures: {', '.join(sorted(FIXTURES))})")


def _model(args) -> Model:
    src = args.program or args.file
    if src is None:
        raise UsageError("a program FILE (or --program) is required")
    text, name = _read(src)
    props = _read(args.props)[0] if args.props else None
    return load_model(text, source=name, props_text=props)


def _term(model: Model, args, text: str | None = None):
    t = model.term(text) if text else model.init
    if t is None:
        raise UsageError("the program has no init; pass --term")
    return model.restricted(t, auto=not args.no_auto_delta)


_RCFG = re.compile(r"^\s*rcfg\s*\(\s*([A-Za-z_][\w']*)\s*,(.*)\)\s*$")


def _events(model: Model, specs: list[str]):
    events = []
    for spec in specs or []:
        m = _RCFG.match(spec)
        if not m:
            raise UsageError(f"bad event {spec!r}; expected rcfg(channel, policy)")
        events.append((m.group(1), model.policy(m.group(2))))
    return events


def _packets(model: Model, text: str):
    """``port=int,port=ext`` style packets separated by ``;``."""
    out = []
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        vals = {}
        for item in chunk.split(","):
            if "=" not in item:
                raise UsageError(f"bad packet {chunk!r}; expected field=value,...")
            f, v = (s.strip() for s in item.split("=", 1))
            vals[f] = parse_value(v)
        try:
            out.append(model.schema.make(**vals))
        except SchemaError as e:
            raise UsageError(str(e)) from None
    return tuple(out)


def _emit(args, payload: dict, text: str):
    if args.json:
        print(json.dumps(payload, indent=2, default=str))
    else:
        print(text)


def _pairs(pairs) -> list:
    return [[a.as_dict(), b.as_dict()] for a, b in pairs]


# commands ------------------------------------------------------------------------------


def cmd_normalize(args) -> int:
    model = _model(args)
    t = _term(model, args, args.term)
    nz = Normalizer(model.defs, model.schema)
    nf = nz.unfold(t, args.depth) if args.depth is not None else nz.hnf(t).to_term()
    text = format_term(nf)
    _emit(args, {"command": "normalize", "depth": args.depth, "normal_form": text}, text)
    return OK


def cmd_lts(args) -> int:
    model = _model(args)
    t = _term(model, args, args.term)
    start = Config(t, _packets(model, args.packets)) if args.packets is not None else t
    lts = build_lts(start, model.defs, model.schema, args.state_budget, "syntactic" if args.syntactic else "aci")
    body = lts.dumps() if args.json else lts.to_text()
    if args.out:
        Path(args.out).write_text(body)
    summary = f"{len(lts)} states, {len(lts.transitions)} transitions"
    if args.json:
        print(body if not args.out else json.dumps({"command": "lts", "states": len(lts), "transitions": len(lts.transitions)}))
    else:
        print(body if not args.out else summary, end="" if not args.out else "\n")
    return OK


def cmd_bisim(args) -> int:
    model = _model(args)
    left = _term(model, args, args.left)
    right = _term(model, args, args.right)
    v = bisimilar(left, right, model.defs, model.schema, args.state_budget)
    if v.outcome == "inconclusive":
        raise StateBudgetExceeded(v.detail)
    payload = {"command": "bisim", "verdict": v.outcome, "detail": v.detail}
    text = f"{v.outcome} ({v.detail})"
    if v.witness is not None:
        payload["witness"] = {
            "word": [str(a) for a in v.witness.word],
            "labels": [label_json(a) for a in v.witness.word],
            "sides": list(v.witness.sides),
        }
        text += "\nwitness: " + str(v.witness)
    _emit(args, payload, text)
    return OK if v.equivalent else VIOLATED


def cmd_traces(args) -> int:
    model = _model(args)
    t = _term(model, args, args.term)
    nz = Normalizer(model.defs, model.schema)
    words = nz.traces(t, args.depth)
    maximal = sorted(
        (w for w in words if not any(len(v) == len(w) + 1 and v[: len(w)] == w for v in words)),
        key=lambda w: [a.sort_key() for a in w],
    )
    text = "\n".join(format_word(w) for w in maximal)
    _emit(
        args,
        {"command": "traces", "depth": args.depth, "count": len(words), "maximal": [[str(a) for a in w] for w in maximal]},
        text,
    )
    return OK


def _config_policy(model: Model, args):
    t = _term(model, args, args.term)
    nz = Normalizer(model.defs, model.schema)
    if args.policy == "head-of-tail":
        t = tail(t, _events(model, args.events), model.defs, model.schema, args.depth, nz)
    elif args.events:
        raise UsageError("--events only applies with --policy head-of-tail")
    return head(t, model.defs, model.schema, nz)


def cmd_check_reach(args) -> int:
    model = _model(args)
    p = _config_policy(model, args)
    topo = model.policy(args.topology) if args.topology else None
    kw = {"t": topo} if topo is not None else {}
    res = check_reach(model.policy(args.inp), model.policy(args.out), p, model.schema, star=args.star or topo is not None, **kw)
    verdict = "reachable" if res.reachable else "unreachable"
    ok = verdict == args.expect
    payload = {"command": "check-reach", "verdict": verdict, "expected": args.expect, "holds": ok, "pairs": _pairs(res.pairs)}
    text = verdict
    if res.reachable:
        text += "\n" + "\n".join(f"  {a} -> {b}" for a, b in res.pairs)
    _emit(args, payload, text)
    return OK if ok else VIOLATED


def cmd_check_waypoint(args) -> int:
    model = _model(args)
    p = _config_policy(model, args)
    topo = model.policy(args.topology) if args.topology else None
    kw = {"t": topo} if topo is not None else {}
    res = check_waypoint(model.policy(args.inp), model.policy(args.out), model.policy(args.via), p, model.schema, **kw)
    payload = {"command": "check-waypoint", "holds": res.holds, "bypass": _pairs(res.bypass)}
    text = "waypoint holds" if res.holds else "waypoint violated\n" + "\n".join(f"  {a} -> {b}" for a, b in res.bypass)
    _emit(args, payload, text)
    return OK if res.holds else VIOLATED


def cmd_check_safety(args) -> int:
    model = _model(args)
    prop = model.prop(args.prop)
    t = _term(model, args, args.term)
    A = model.alphabet or derive_alphabet(t, model.defs, model.schema, max_states=args.state_budget)
    ns = range(args.n_min, args.n_max + 1) if prop.is_family else [None]
    results = []
    lines = []
    status = OK
    for n in ns:
        inst = prop.at(n) if n is not None else prop
        r = check_safe(t, inst, A, model.defs, model.schema, args.state_budget)
        name = prop.name if n is None else f"{prop.name}_{n}"
        entry = {"name": name, "n": n, "safe": r.safe, "forbidden_words": r.forbidden, "depth": r.depth}
        if not r.safe:
            entry["witness"] = [str(a) for a in r.witness]
            status = VIOLATED
        results.append(entry)
        lines.append(f"{name}: {r.describe()}")
    payload = {"command": "check-safety", "prop": format_regexp(prop.regexp), "results": results, "holds": status == OK}
    _emit(args, payload, "\n".join(lines))
    return status


def cmd_bench(args) -> int:
    from .fattree import rows_to_csv, run_benchmark
    from .plotting import plot_bench

    try:
        ks = [int(k) for k in args.k.split(",") if k.strip()]
    except ValueError:
        raise UsageError(f"bad --k {args.k!r}; expected e.g. 2,4") from None
    if args.runs < 1:
        raise UsageError("--runs must be positive")
    try:
        rows = run_benchmark(ks, args.runs, args.parallel, args.classical, args.seed)
    except ValueError as e:
        raise UsageError(str(e)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "bench.csv").write_text(rows_to_csv(rows))
    data = {"runs": args.runs, "seed": args.seed, "parallel": args.parallel, "rows": [r.as_dict() for r in rows]}
    (out / "bench.json").write_text(json.dumps(data, indent=2))
    plot_bench(rows, out / "bench.png")
    ok = all(r.verdict_i and r.verdict_ii and r.verdict_iii and r.oracle_agrees for r in rows)
    lines = [f"{'k':>3} {'switches':>8} {'packets':>8} {'pre(s)':>9} {'(i)(s)':>9} {'(ii)(s)':>9} {'(iii)(s)':>9} {'share':>6}  verdicts"]
    for r in rows:
        v = "".join("T" if x else "F" for x in (r.verdict_i, r.verdict_ii, r.verdict_iii))
        lines.append(
            f"{r.k:>3} {r.switches:>8} {r.packets:>8} {r.preprocess_s:>9.4f} {r.prop_i_s:>9.4f} "
            f"{r.prop_ii_s:>9.4f} {r.prop_iii_s:>9.4f} {r.decision_share:>6.1%}  {v}{'' if r.oracle_agrees else ' (oracle disagrees)'}"
        )
    lines.append(f"wrote {out / 'bench.csv'}, {out / 'bench.json'}, {out / 'bench.png'}")
    _emit(args, dict(data, holds=ok), "\n".join(lines))
    return OK if ok else VIOLATED


# argument parsing ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json", action="store_true", help="structured output")
    common.add_argument("--state-budget", type=int, default=None, help="state budget (default $DNK_STATE_BUDGET or 100000)")

    prog = _Parser(add_help=False)
    prog.add_argument("file", nargs="?", help="program file or fixture name")
    prog.add_argument("--program", help="program file (instead of FILE)")
    prog.add_argument("--props", help="extra file with alphabet and prop declarations")
    prog.add_argument("--no-auto-delta", action="store_true", help="do not restrict bare sends and receives")
    prog.add_argument("--term", help="term to analyse instead of init")

    p = _Parser(prog="dynetkat", description="DyNetKAT verification toolkit")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("normalize", parents=[common, prog], help="head normal form, or n-step unfolding")
    s.add_argument("--depth", type=int, default=None)
    s.set_defaults(func=cmd_normalize)

    s = sub.add_parser("lts", parents=[common, prog], help="export the labelled transition system")
    s.add_argument("--packets", help="initial packet list for the configuration system, e.g. 'port=int;port=ext'")
    s.add_argument("--syntactic", action="store_true", help="identify states syntactically, not modulo ACI")
    s.add_argument("--out", help="write the system to this file")
    s.set_defaults(func=cmd_lts)

    s = sub.add_parser("bisim", parents=[common, prog], help="strong bisimilarity of two terms")
    s.add_argument("--left", required=True)
    s.add_argument("--right", required=True)
    s.set_defaults(func=cmd_bisim)

    s = sub.add_parser("traces", parents=[common, prog], help="maximal traces up to a depth")
    s.add_argument("--depth", type=int, default=4)
    s.set_defaults(func=cmd_traces)

    checks = (
        ("check-reach", cmd_check_reach, "reachability between ingress and egress predicates"),
        ("check-waypoint", cmd_check_waypoint, "all ingress to egress traffic passes a waypoint"),
    )
    for name, func, text in checks:
        s = sub.add_parser(name, parents=[common, prog], help=text)
        s.add_argument("--in", dest="inp", required=True, help="ingress predicate")
        s.add_argument("--out", required=True, help="egress predicate")
        if name == "check-waypoint":
            s.add_argument("--via", required=True, help="waypoint predicate")
        else:
            s.add_argument("--star", action="store_true", help="iterate configuration (and topology)")
            s.add_argument("--expect", choices=["reachable", "unreachable"], default="unreachable")
        s.add_argument("--policy", choices=["head", "head-of-tail"], default="head")
        s.add_argument("--events", action="append", help="rcfg(channel, policy); repeatable")
        s.add_argument("--topology", help="link policy composed after the configuration")
        s.add_argument("--depth", type=int, default=None, help="tail unfolding depth")
        s.set_defaults(func=func)

    s = sub.add_parser("check-safety", parents=[common, prog], help="bounded safety of a declared property")
    s.add_argument("--prop", help="property name (needed when several are declared)")
    s.add_argument("--n-max", type=int, default=4)
    s.add_argument("--n-min", type=int, default=0)
    s.set_defaults(func=cmd_check_safety)

    s = sub.add_parser("bench", parents=[common], help="FatTree firewall-migration benchmark")
    s.add_argument("--k", default="2,4", help="comma separated pod counts")
    s.add_argument("--runs", type=int, default=10)
    s.add_argument("--parallel", action="store_true", help="also time the properties on one thread each")
    s.add_argument("--classical", action="store_true", help="k/2 ToR switches per pod")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="bench-out", help="directory for CSV, JSON and PNG output")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return USAGE
    except SystemExit as e:  # --help
        return int(e.code or 0)
    except DnkParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE
    except (SafetyError, PreconditionError, TermError, SchemaError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE
    except (StateBudgetExceeded, DepthExhausted) as e:
        print(f"budget exhausted: {e}", file=sys.stderr)
        return BUDGET


if __name__ == "__main__":
    sys.exit(main())
