"""FatTree topologies and a firewall-migration scenario used as a benchmark.

A firewall guarding traffic from ToR ``Ta`` to ToR ``Tb`` (in another pod)
moves from aggregation switch ``Ax`` to ``Ax2`` through four updates pushed by
a controller. After every update prefix we check that (i) non-SSH traffic
from ``Ta`` reaches ``Tb``, (ii) SSH traffic never does, and after all updates
(iii) every path passes through ``Ax2``.
"""

from __future__ import annotations

import random
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import networkx as nx

from .analysis import check_reach, check_waypoint, head, tail
from .netkat import Assign, Policy, Ref, Test, balanced_plus, seq
from .normalizer import Normalizer
from .syntax import Model, ProgramFile, elaborate, format_program
from .terms import BOT, Recv, Send, SeqN, Var, oplus, par

HOST_PORT = 0


@dataclass
class FatTree:
    k: int
    classical: bool
    cores: list[str]
    aggs: dict[int, list[str]]
    tors: dict[int, list[str]]
    graph: nx.Graph
    ports: dict[tuple[str, str], int]

    @property
    def switches(self) -> list[str]:
        return list(self.graph.nodes)

    @property
    def all_tors(self) -> list[str]:
        return [t for p in sorted(self.tors) for t in self.tors[p]]

    def pod_of(self, sw: str) -> int | None:
        return self.graph.nodes[sw].get("pod")

    def neighbor_at(self, sw: str, port: int) -> str | None:
        for n in self.graph.neighbors(sw):
            if self.ports[(sw, n)] == port:
                return n
        return None

    @property
    def max_port(self) -> int:
        return max(self.ports.values())


def gen_fattree(k: int, classical: bool = False) -> FatTree:
    """A k-pod FatTree.

    Each pod has k/2 aggregation switches; there are (k/2)^2 cores. With
    ``classical`` each pod has k/2 ToR switches, otherwise k^2/4 (k^3/4 in
    total). Every ToR connects to every aggregation switch of its pod and
    aggregation switch j of each pod connects to cores j*k/2 .. j*k/2+k/2-1.
    """
    if k < 2 or k % 2:
        raise ValueError("k must be an even number >= 2")
    half = k // 2
    per_pod = half if classical else k * k // 4
    g = nx.Graph()
    cores = [f"c{i}" for i in range(half * half)]
    aggs = {p: [f"a{p}_{j}" for j in range(half)] for p in range(k)}
    tors = {p: [f"t{p}_{j}" for j in range(per_pod)] for p in range(k)}
    for c in cores:
        g.add_node(c, kind="core", pod=None)
    for p in range(k):
        for a in aggs[p]:
            g.add_node(a, kind="agg", pod=p)
        for t in tors[p]:
            g.add_node(t, kind="tor", pod=p)
    for p in range(k):
        for t in tors[p]:
            for a in aggs[p]:
                g.add_edge(t, a)
        for j, a in enumerate(aggs[p]):
            for m in range(half):
                g.add_edge(a, cores[j * half + m])
    ports = {}
    for sw in g.nodes:
        for i, n in enumerate(sorted(g.neighbors(sw), key=_order(g))):
            ports[(sw, n)] = i + 1
    return FatTree(k, classical, cores, aggs, tors, g, ports)


def _order(g: nx.Graph):
    index = {n: i for i, n in enumerate(g.nodes)}
    return lambda n: index[n]


def shortest_next_hops(ft: FatTree) -> dict[tuple[str, str], str | None]:
    """Next hop towards every ToR from every switch (None at the ToR itself).

    Among equally short choices the first neighbour in node order wins.
    """
    order = _order(ft.graph)
    table: dict[tuple[str, str], str | None] = {}
    for d in ft.all_tors:
        dist = nx.single_source_shortest_path_length(ft.graph, d)
        for sw in ft.graph.nodes:
            if sw == d:
                table[(sw, d)] = None
                continue
            cands = [n for n in ft.graph.neighbors(sw) if dist.get(n) == dist[sw] - 1]
            table[(sw, d)] = min(cands, key=order)
    return table


# scenario ------------------------------------------------------------------------------------


@dataclass
class Update:
    switch: str
    channel: str
    overrides: dict  # dst -> next hop (None = deliver)
    firewall: bool


@dataclass
class Migration:
    ft: FatTree
    ta: str
    tb: str
    ax: str
    ax2: str
    routes: dict  # (sw, dst) -> next hop, the initial tables
    updates: list[Update]
    seed: int = 0
    model: Model | None = None
    program: ProgramFile | None = None

    def text(self) -> str:
        return format_program(self.program)

    def tables_after(self, j: int) -> tuple[dict, set]:
        """Forwarding tables and firewalled switches after ``j`` updates."""
        routes = dict(self.routes)
        fw = {self.ax}
        for u in self.updates[:j]:
            for d, nh in u.overrides.items():
                routes[(u.switch, d)] = nh
            if u.firewall:
                fw.add(u.switch)
            else:
                fw.discard(u.switch)
        return routes, fw


def gen_migration(k: int, seed: int = 0, classical: bool = False) -> Migration:
    ft = gen_fattree(k, classical)
    rng = random.Random(seed)
    pa, pb = rng.sample(range(k), 2)
    ta = rng.choice(ft.tors[pa])
    tb = rng.choice(ft.tors[pb])
    routes = shortest_next_hops(ft)
    ax = routes[(ta, tb)]
    core_old = routes[(ax, tb)]
    if len(ft.aggs[pa]) > 1:
        ax2 = next(a for a in ft.aggs[pa] if a != ax)
        core_new = sorted((n for n in ft.graph.neighbors(ax2) if ft.graph.nodes[n]["kind"] == "core"), key=_order(ft.graph))[0]
    else:
        # a single aggregation switch per pod: the firewall moves to the
        # destination pod's aggregation switch on the same path
        ax2 = routes[(core_old, tb)]
        core_new = core_old
    b_new = next(n for n in ft.graph.neighbors(core_new) if ft.pod_of(n) == pb)
    updates = [
        Update(ax2, "up1", {tb: core_new if ax2 in ft.aggs[pa] else routes[(ax2, tb)]}, True),
        Update(core_new, "up2", {tb: b_new}, False),
        Update(ta, "up3", {tb: ax2 if ax2 in ft.aggs[pa] else routes[(ta, tb)]}, False),
        Update(ax, "up4", {}, False),
    ]
    mig = Migration(ft, ta, tb, ax, ax2, routes, updates, seed)
    mig.program = _program(mig)
    mig.model = elaborate(mig.program, source=f"fattree-k{k}-seed{seed}")
    return mig


def _switch_policy(ft: FatTree, sw: str, routes: dict, firewall: bool, tb: str) -> Policy:
    rules = []
    for d in ft.all_tors:
        nh = routes[(sw, d)]
        port = HOST_PORT if nh is None else ft.ports[(sw, nh)]
        guard = [Test("sw", sw), Test("dst", d)]
        if firewall and d == tb:
            guard.append(Test("type", "other"))
        rules.append(seq(*guard, Assign("pt", port)))
    return balanced_plus(rules)


def _topology_policy(ft: FatTree) -> Policy:
    links = []
    for (a, b), pa in sorted(ft.ports.items(), key=lambda x: (x[0][0], x[1])):
        links.append(seq(Test("sw", a), Test("pt", pa), Assign("sw", b), Assign("pt", ft.ports[(b, a)])))
    return balanced_plus(links)


def _program(mig: Migration) -> ProgramFile:
    ft = mig.ft
    pf = ProgramFile()
    pf.fields = [
        ("sw", list(ft.switches)),
        ("pt", list(range(0, ft.max_port + 1))),
        ("dst", ft.all_tors),
        ("type", ["ssh", "other"]),
    ]
    pf.channels = [u.channel for u in mig.updates]
    updated = {u.switch for u in mig.updates}
    static = [
        _switch_policy(ft, sw, mig.routes, sw == mig.ax, mig.tb) for sw in ft.switches if sw not in updated
    ]
    pf.netkat["static"] = balanced_plus(static)
    pf.netkat["topo"] = _topology_policy(ft)
    routes = dict(mig.routes)
    fw = {mig.ax}
    for i, u in enumerate(mig.updates, 1):
        pf.netkat[f"old{i}"] = _switch_policy(ft, u.switch, routes, u.switch in fw, mig.tb)
        new_routes = dict(routes)
        for d, nh in u.overrides.items():
            new_routes[(u.switch, d)] = nh
        pf.netkat[f"new{i}"] = _switch_policy(ft, u.switch, new_routes, u.firewall, mig.tb)
    pf.dnk["Static"] = (None, SeqN(Ref("static"), Var("Static")))
    for i, u in enumerate(mig.updates, 1):
        pf.dnk[f"U{i}"] = (None, oplus(SeqN(Ref(f"old{i}"), Var(f"U{i}")), Recv(u.channel, Ref(f"new{i}"), Var(f"V{i}"))))
        pf.dnk[f"V{i}"] = (None, SeqN(Ref(f"new{i}"), Var(f"V{i}")))
    ctl = BOT
    for i, u in reversed(list(enumerate(mig.updates, 1))):
        ctl = Send(u.channel, Ref(f"new{i}"), ctl)
    pf.dnk["Ctl"] = (None, ctl)
    pf.init = par(Var("Static"), *(Var(f"U{i}") for i in range(1, 5)), Var("Ctl"))
    return pf


# checks --------------------------------------------------------------------------------------


def _predicates(mig: Migration):
    base = [Test("sw", mig.ta), Test("pt", HOST_PORT), Test("dst", mig.tb)]
    inp_other = seq(*base, Test("type", "other"))
    inp_ssh = seq(*base, Test("type", "ssh"))
    inp_all = seq(*base)
    out = Test("sw", mig.tb)
    via = Test("sw", mig.ax2)
    return inp_other, inp_ssh, inp_all, out, via


def configurations(mig: Migration) -> list[Policy]:
    """The NetKAT configuration after each prefix of the update sequence."""
    m = mig.model
    nz = Normalizer(m.defs, m.schema)
    t = m.restricted()
    configs = [head(t, m.defs, m.schema, nz)]
    for i, u in enumerate(mig.updates, 1):
        t = tail(t, [(u.channel, m.policies[f"new{i}"])], m.defs, m.schema, normalizer=nz)
        configs.append(head(t, m.defs, m.schema, nz))
    return configs


def prop_reach_other(mig: Migration, configs: list[Policy]) -> list[bool]:
    inp, _, _, out, _ = _predicates(mig)
    topo = mig.model.policies["topo"]
    return [check_reach(inp, out, c, mig.model.schema, topo).reachable for c in configs]


def prop_ssh_blocked(mig: Migration, configs: list[Policy]) -> list[bool]:
    _, inp, _, out, _ = _predicates(mig)
    topo = mig.model.policies["topo"]
    return [not check_reach(inp, out, c, mig.model.schema, topo).reachable for c in configs]


def prop_waypoint(mig: Migration, configs: list[Policy]) -> bool:
    _, _, inp, out, via = _predicates(mig)
    topo = mig.model.policies["topo"]
    return check_waypoint(inp, out, via, configs[-1], mig.model.schema, topo).holds


def oracle(mig: Migration) -> dict:
    """The three properties by walking the forwarding tables directly."""
    ft = mig.ft

    def walk(j: int, ssh: bool) -> tuple[bool, list[str]]:
        routes, fw = mig.tables_after(j)
        sw, path = mig.ta, [mig.ta]
        while True:
            if ssh and sw in fw:
                return False, path
            nh = routes[(sw, mig.tb)]
            if nh is None:
                return sw == mig.tb, path
            if nh in path:
                return False, path
            sw = nh
            path.append(sw)

    n = len(mig.updates)
    other = [walk(j, False) for j in range(n + 1)]
    ssh = [walk(j, True) for j in range(n + 1)]
    return {
        "i": [ok for ok, _ in other],
        "ii": [not ok for ok, _ in ssh],
        "iii": other[-1][0] and mig.ax2 in other[-1][1],
    }


# benchmark -----------------------------------------------------------------------------------


@dataclass
class BenchRow:
    k: int
    variant: str
    switches: int
    tors: int
    packets: int
    build_s: float
    preprocess_s: float
    prop_i_s: float
    prop_ii_s: float
    prop_iii_s: float
    parallel_s: float | None
    verdict_i: bool
    verdict_ii: bool
    verdict_iii: bool
    oracle_agrees: bool
    runs: int

    @property
    def decision_s(self) -> float:
        return self.prop_i_s + self.prop_ii_s + self.prop_iii_s

    @property
    def total_s(self) -> float:
        return self.preprocess_s + self.decision_s

    @property
    def decision_share(self) -> float:
        return self.decision_s / self.total_s if self.total_s else 0.0

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["decision_s"] = self.decision_s
        d["total_s"] = self.total_s
        d["decision_share"] = self.decision_share
        return d


def _timed(fn, *args):
    t0 = time.perf_counter()
    res = fn(*args)
    return res, time.perf_counter() - t0


def run_once(k: int, seed: int = 0, classical: bool = False, parallel: bool = False) -> dict:
    mig, t_build = _timed(gen_migration, k, seed, classical)
    configs, t_pre = _timed(configurations, mig)
    r1, t1 = _timed(prop_reach_other, mig, configs)
    r2, t2 = _timed(prop_ssh_blocked, mig, configs)
    r3, t3 = _timed(prop_waypoint, mig, configs)
    t_par = None
    if parallel:
        # fresh model so nothing is served from the normalisation memo
        mig2 = gen_migration(k, seed, classical)
        configs2 = configurations(mig2)
        t0 = time.perf_counter()
        with ThreadPoolExecutor(max_workers=3) as pool:
            futs = [pool.submit(f, mig2, configs2) for f in (prop_reach_other, prop_ssh_blocked, prop_waypoint)]
            par_res = [f.result() for f in futs]
        t_par = time.perf_counter() - t0
        if par_res != [r1, r2, r3]:
            raise AssertionError("parallel and sequential verdicts differ")
    expect = oracle(mig)
    return {
        "mig": mig,
        "build": t_build,
        "pre": t_pre,
        "t": (t1, t2, t3),
        "par": t_par,
        "verdicts": {"i": r1, "ii": r2, "iii": r3},
        "oracle": expect,
    }


def run_benchmark(
    ks=(2, 4), runs: int = 10, parallel: bool = False, classical: bool = False, seed: int = 0
) -> list[BenchRow]:
    """Time preprocessing and each property check; medians over ``runs``."""
    rows = []
    for k in ks:
        results = [run_once(k, seed, classical, parallel) for _ in range(runs)]
        first = results[0]
        mig = first["mig"]
        v = first["verdicts"]
        agree = all(r["verdicts"] == r["oracle"] for r in results)
        med = lambda xs: statistics.median(xs)  # noqa: E731
        rows.append(
            BenchRow(
                k=k,
                variant="classical" if classical else "k3/4",
                switches=len(mig.ft.switches),
                tors=len(mig.ft.all_tors),
                packets=mig.model.schema.size,
                build_s=med([r["build"] for r in results]),
                preprocess_s=med([r["pre"] for r in results]),
                prop_i_s=med([r["t"][0] for r in results]),
                prop_ii_s=med([r["t"][1] for r in results]),
                prop_iii_s=med([r["t"][2] for r in results]),
                parallel_s=med([r["par"] for r in results]) if parallel else None,
                verdict_i=all(v["i"]),
                verdict_ii=all(v["ii"]),
                verdict_iii=v["iii"],
                oracle_agrees=agree,
                runs=runs,
            )
        )
    return rows


CSV_COLUMNS = [
    "k", "variant", "switches", "tors", "packets", "runs", "build_s", "preprocess_s",
    "prop_i_s", "prop_ii_s", "prop_iii_s", "parallel_s", "decision_s", "total_s",
    "decision_share", "verdict_i", "verdict_ii", "verdict_iii", "oracle_agrees",
]


def rows_to_csv(rows: list[BenchRow]) -> str:
    import csv
    import io

    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        d = r.as_dict()
        for key, val in d.items():
            if isinstance(val, float):
                d[key] = f"{val:.6f}"
        w.writerow(d)
    return buf.getvalue()
