"""Command line entry point: ``sstdma {gen-graph,simulate,bounds,fig4,fig6}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import random
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import analysis
from .protocol import FrameConfig
from .simulator import (
    TRACE_HEADER,
    FaultKind,
    inject_fault,
    make_world,
    measure_round_metrics,
    run_round,
    run_until_safe,
)
from .topology import InterferenceGraph, dump_graph, fig4_range, generate_rgg, graph_stats, load_graph

log = logging.getLogger("sstdma")

BOUNDS_HEADER = ["quantity", "value"]
FIG4_HEADER = ["k", "empirical_cdf", "bound", "sigma", "runs"]
FIG6_HEADER = ["n", "N", "s", "alpha", "k"]
FAULT_PARAMS = {
    "fraction", "nodes", "add_edges", "remove_edges", "random_edge_changes", "add_nodes", "attach", "remove_nodes",
}


class UsageError(Exception):
    pass


def write_atomic(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def format_csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# -- experiment config ---------------------------------------------------------------


@dataclass
class FaultSpec:
    round: int
    kind: str
    params: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    T: int = 15
    n: int = 2
    seed: int = 0
    max_rounds: int = 200
    init: str = "ready"
    graph: dict | str | None = None
    rgg: dict | None = None
    faults: list[FaultSpec] = field(default_factory=list)
    priority_partition: list[list[int]] | None = None
    backoff: list[int] | None = None

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        faults = [FaultSpec(f["round"], f["kind"], {k: v for k, v in f.items() if k not in ("round", "kind")})
                  for f in doc.pop("faults", [])]
        unknown = set(doc) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**doc, faults=faults)
        cfg.validate()
        return cfg

    def frame(self) -> FrameConfig:
        part = tuple(tuple(r) for r in self.priority_partition) if self.priority_partition else None
        return FrameConfig(self.T, self.n, part, tuple(self.backoff) if self.backoff else None)

    def validate(self) -> None:
        try:
            self.frame()
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if self.max_rounds < 1:
            raise UsageError("max_rounds must be >= 1")
        if (self.graph is None) == (self.rgg is None):
            raise UsageError("config needs exactly one of 'graph' or 'rgg'")
        if self.init not in ("ready", "random", "safe"):
            raise UsageError(f"init must be ready, random or safe, got {self.init!r}")
        for f in self.faults:
            try:
                FaultKind(f.kind)
            except ValueError:
                raise UsageError(f"unknown fault kind {f.kind!r}") from None
            if f.round < 0:
                raise UsageError("fault rounds must be >= 0")
            bad = set(f.params) - FAULT_PARAMS
            if bad:
                raise UsageError(f"unknown fault parameters: {sorted(bad)}")

    def build_graph(self) -> InterferenceGraph:
        try:
            if self.rgg is not None:
                return generate_rgg(self.rgg["n_nodes"], self.rgg["range"], self.rgg.get("seed", self.seed))
            if isinstance(self.graph, str) and not self.graph.lstrip().startswith("{"):
                return load_graph(Path(self.graph).read_text())
            return load_graph(self.graph)
        except (KeyError, ValueError, OSError) as exc:
            raise UsageError(f"graph: {exc}") from None


def simulate(cfg: ExperimentConfig, trace_out=None) -> dict:
    """Run the configured experiment, applying faults at their scheduled boundaries."""
    graph = cfg.build_graph()
    world = make_world(graph, cfg.frame(), seed=cfg.seed, init=cfg.init)
    fault_rng = random.Random(f"sstdma-faults/{cfg.seed}")
    per_round: list[dict] = []

    def record(w, trace):
        m = measure_round_metrics(trace)
        per_round.append({"round": trace.round_index, "W": m["W"], "L": m["L"]})

    phases = []
    pending = sorted(cfg.faults, key=lambda f: f.round)
    result = run_until_safe(world, cfg.max_rounds, trace_out=trace_out, on_round=record)
    phases.append({"start_round": 0, **result.to_dict()})
    for fault in pending:
        # idle (already safe) rounds up to the fault boundary
        while world.round_index < fault.round:
            _, tr = run_round(world, trace_out)
            record(world, tr)
        inject_fault(world, fault.kind, fault_rng, **fault.params)
        log.info("injected %s at round %d", fault.kind, world.round_index)
        result = run_until_safe(world, cfg.max_rounds, trace_out=trace_out, on_round=record)
        phases.append({"start_round": world.round_index - result.rounds, "fault": fault.kind, **result.to_dict()})
    final = phases[-1]
    alloc = [a for a in final["allocation_round"] if a is not None]
    return {
        "config": {**asdict(cfg), "faults": [asdict(f) for f in cfg.faults]},
        "converged": all(p["converged"] for p in phases),
        "t_max": final["t_max"],
        "mean_allocation_round": sum(alloc) / len(alloc) if alloc else None,
        "phases": phases,
        "per_round": per_round,
    }


# -- fig4 / fig6 -------------------------------------------------------------------------


def fig4_run(args: tuple[int, int, int, int, int]) -> dict:
    N, T, n, max_rounds, seed = args
    g = generate_rgg(N, fig4_range(N), seed)
    res = run_until_safe(make_world(g, FrameConfig(T, n), seed=seed), max_rounds)
    alloc = [a for a in res.allocation_round if a is not None]
    return {
        "seed": seed,
        "converged": res.converged,
        "t_max": res.t_max,
        "mean_allocation_round": sum(alloc) / len(alloc),
        "mean_degree": graph_stats(g).mean_degree,
    }


def fig4_runs(N: int, seeds: list[int], T: int = 15, n: int = 2, max_rounds: int = 200, workers: int = 1) -> list[dict]:
    jobs = [(N, T, n, max_rounds, s) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            runs = list(pool.map(fig4_run, jobs))
    else:
        runs = [fig4_run(j) for j in jobs]
    return sorted(runs, key=lambda r: r["seed"])


def fig4_table(runs: list[dict], N: int, q: float = 0.25, k_max: int | None = None) -> list[list]:
    """Empirical P(t_max < k) next to the bound, for k = 1..k_max."""
    t = [r["t_max"] if r["converged"] else math.inf for r in runs]
    if k_max is None:
        finite = [x for x in t if x != math.inf]
        k_max = max(max(finite, default=1) + 2, math.ceil(analysis.rounds_for_confidence(0.01, N, 1, 2)) + 1)
    rows = []
    for k in range(1, k_max + 1):
        emp = sum(1 for x in t if x < k) / len(t)
        b = analysis.tmax_cdf_bound(k, q, N)
        rows.append([k, emp, b, math.sqrt(b * (1 - b) / len(t)), len(t)])
    return rows


def fig6_grid(n_values, N_values, s: float = 1.0, alpha: float = 0.01) -> list[list]:
    return [[n, N, s, alpha, analysis.rounds_for_confidence(alpha, N, s, n)] for n in n_values for N in N_values]


def bounds_rows(s: float, n: int, N: int, alpha: float) -> list[list]:
    return [
        ["s", s],
        ["n", n],
        ["N", N],
        ["alpha", alpha],
        ["only_one_lb", analysis.only_one_lb(s, n)],
        ["q_lb", analysis.q_lb(s, n)],
        ["local_bound_eq3", analysis.local_bound_eq3(s, n)],
        ["local_bound_from_q", analysis.local_bound_from_q(s, n)],
        ["global_bound", analysis.global_bound(s, n)],
        ["expected_retransmissions", analysis.expected_retransmissions(s, n)],
        ["expected_winners_lb", analysis.expected_winners_lb(N, s, n)],
        ["rounds_for_confidence", analysis.rounds_for_confidence(alpha, N, s, n)],
    ]


# -- commands -------------------------------------------------------------------------------


def cmd_gen_graph(a) -> None:
    try:
        rng_range = a.range if a.range is not None else fig4_range(a.nodes)
        g = generate_rgg(a.nodes, rng_range, a.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(dump_graph(g) + "\n", a.out)
    st = graph_stats(g)
    log.info("N=%d A=%d mean degree %.3f max degree %d", g.node_count, st.edge_count, st.mean_degree, st.max_degree)


def cmd_simulate(a) -> None:
    if a.config:
        try:
            doc = json.loads(Path(a.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"config: {exc}") from None
    else:
        doc = {}
    for key, val in (("T", a.frame_size), ("n", a.periods), ("seed", a.seed), ("max_rounds", a.max_rounds),
                     ("init", a.init)):
        if val is not None:
            doc[key] = val
    if a.graph:
        doc["graph"] = a.graph
        doc.pop("rgg", None)
    elif a.nodes is not None:
        if a.nodes < 1:
            raise UsageError("--nodes must be positive")
        doc["rgg"] = {"n_nodes": a.nodes, "range": a.range if a.range is not None else fig4_range(a.nodes)}
        doc.pop("graph", None)
    try:
        cfg = ExperimentConfig.from_dict(doc)
    except TypeError as exc:
        raise UsageError(str(exc)) from None
    trace_buf = io.StringIO() if a.trace else None
    if trace_buf is not None:
        trace_buf.write(TRACE_HEADER + "\n")
    summary = simulate(cfg, trace_buf)
    _emit(json.dumps(summary, indent=2) + "\n", a.out)
    if trace_buf is not None:
        write_atomic(a.trace, trace_buf.getvalue())


def cmd_bounds(a) -> None:
    try:
        rows = bounds_rows(a.s, a.periods, a.nodes, a.alpha)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(format_csv(BOUNDS_HEADER, rows), a.out)


def cmd_fig4(a) -> None:
    if a.seeds < 1 or a.nodes < 1:
        raise UsageError("--seeds and --nodes must be >= 1")
    seeds = list(range(a.seed, a.seed + a.seeds))
    try:
        FrameConfig(a.frame_size, a.periods)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    runs = fig4_runs(a.nodes, seeds, a.frame_size, a.periods, a.max_rounds, a.workers)
    rows = fig4_table(runs, a.nodes, a.q, a.k_max)
    _emit(format_csv(FIG4_HEADER, rows), a.out)
    if a.out:
        meta = {
            "N": a.nodes, "T": a.frame_size, "n": a.periods, "range": fig4_range(a.nodes), "q": a.q,
            "max_rounds": a.max_rounds, "seeds": seeds, "runs": runs,
        }
        write_atomic(str(a.out) + ".meta.json", json.dumps(meta, indent=2) + "\n")


def cmd_fig6(a) -> None:
    if a.n_min < 2 or a.n_max < a.n_min:
        raise UsageError("need 2 <= --n-min <= --n-max")
    try:
        rows = fig6_grid(range(a.n_min, a.n_max + 1), a.N_values, a.s, a.alpha)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _emit(format_csv(FIG6_HEADER, rows), a.out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sstdma", description="Self-stabilizing TDMA slot allocation experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, T=15, n=2):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("-T", "--frame-size", type=int, default=T)
        sp.add_argument("-n", "--periods", type=int, default=n)

    g = sub.add_parser("gen-graph", help="random geometric interference graph as JSON")
    g.add_argument("-N", "--nodes", type=int, default=500)
    g.add_argument("--range", type=float, default=None, help="interference range (default 0.1/sqrt(N/500))")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_graph)

    s = sub.add_parser("simulate", help="run the protocol until safe, with optional faults")
    s.add_argument("--config", help="ExperimentConfig JSON file")
    s.add_argument("--graph", help="graph JSON file")
    s.add_argument("-N", "--nodes", type=int, help="generate an RGG with this many nodes")
    s.add_argument("--range", type=float, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out")
    s.add_argument("-T", "--frame-size", type=int, default=None)
    s.add_argument("-n", "--periods", type=int, default=None)
    s.add_argument("--max-rounds", type=int, default=None)
    s.add_argument("--init", choices=["ready", "random", "safe"], default=None)
    s.add_argument("--trace", help="write round,slot,period,node,event records here")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bounds", help="tabulate the closed-form bounds")
    b.add_argument("-s", type=float, default=1.0, help="load ratio d/T")
    b.add_argument("-n", "--periods", type=int, default=2)
    b.add_argument("-N", "--nodes", type=int, default=500)
    b.add_argument("--alpha", type=float, default=0.01)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bounds)

    f4 = sub.add_parser("fig4", help="empirical t_max CDF vs. bound on random geometric graphs")
    common(f4)
    f4.add_argument("-N", "--nodes", type=int, default=500)
    f4.add_argument("--seeds", type=int, default=100, help="number of consecutive seeds starting at --seed")
    f4.add_argument("--max-rounds", type=int, default=200)
    f4.add_argument("--q", type=float, default=0.25)
    f4.add_argument("--k-max", type=int, default=None)
    f4.add_argument("--workers", type=int, default=1)
    f4.set_defaults(func=cmd_fig4)

    f6 = sub.add_parser("fig6", help="grid of rounds-for-confidence k(n, N)")
    f6.add_argument("--n-min", type=int, default=2)
    f6.add_argument("--n-max", type=int, default=20)
    f6.add_argument("--N-values", type=int, nargs="+", default=[10, 100, 1000, 10000, 100000, 1000000])
    f6.add_argument("-s", type=float, default=1.0)
    f6.add_argument("--alpha", type=float, default=0.01)
    f6.add_argument("--out")
    f6.set_defaults(func=cmd_fig6)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        a.func(a)
    except UsageError as exc:
        print(f"sstdma {a.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
