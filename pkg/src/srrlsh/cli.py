"""Command-line front end.

Subcommands: gen, build, query, analyze, sweep, recall.  Flags go after the
subcommand; a flat key=value config file (--config) supplies defaults that
explicit flags override.  Exit codes: 0 ok, 2 validation error, 3 infeasible
instance, 4 IO error.

Output conventions: query emits one JSON line per run; sweep/recall/analyze
write delimited files under the --out stem (plus a rendered PNG unless
--no-plot).  All randomness derives from --seed; reruns reproduce output
bytes except the wall_time fields.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time

from . import core
from .analysis import (WorkProfile, exponent_fixed_point, multi_work,
                       multiprobe_exponent, rho)
from .bench import (CURVE_COLUMNS, ENGINES, FAMILIES, RECALL_COLUMNS,
                    SWEEP_COLUMNS, BenchConfig, auto_table_budget,
                    make_instance, measure_recall, render_recall_plot,
                    render_sweep_plot, run_sweep, stream_seed)
from .core import distance_histogram, read_instance, write_instance
from .engines import (InsufficientLevels, QueryReport, adaptive_multi,
                      adaptive_single, linear_scan, naive_lsh_query,
                      static_query)
from .index import (CollisionModel, build_index, load_index, save_index,
                    standard_lsh_params)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4

LEVEL_COLUMNS = ["k", "expected_work"]
GRID_COLUMNS = ["k", "ell", "multi_work"]


# ---------------------------------------------------------------------------
# Small IO helpers
# ---------------------------------------------------------------------------

def _int_list(s: str) -> list[int]:
    try:
        return [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated ints")


def _float_list(s: str) -> list[float]:
    try:
        return [float(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated floats")


def _str_list(s: str) -> list[str]:
    return [x.strip() for x in s.split(",") if x.strip()]


def _write_text(path: str, text: str):
    if not path or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _rows_text(rows: list[dict], columns: list[str], fmt: str) -> str:
    if fmt == "json":
        return "".join(json.dumps({c: row.get(c) for c in columns}) + "\n"
                       for row in rows)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: ("" if row.get(c) is None else row.get(c))
                         for c in columns})
    return buf.getvalue()


def _stem(out: str) -> str:
    if not out:
        raise ValueError("this subcommand needs --out (an output path stem)")
    for suffix in (".csv", ".json", ".jsonl", ".png"):
        if out.endswith(suffix):
            return out[: -len(suffix)]
    return out


def _ext(fmt: str) -> str:
    return ".jsonl" if fmt == "json" else ".csv"


def _read_instance_file(path: str) -> core.Instance:
    with open(path) as fh:
        return read_instance(fh.read())


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gen(a) -> int:
    cfg = BenchConfig(family=a.family, n=a.n, d=a.d, r=a.r, c=a.c,
                      t_grid=(a.t,), growth_exp=a.growth_exp, seed=a.seed)
    inst = make_instance(cfg, a.t, a.seed)
    _write_text(a.out, write_instance(inst))
    if a.out:
        print("wrote {} (n={} d={} r={})".format(a.out, inst.set.n,
                                                 inst.set.d, inst.r))
    return EXIT_OK


def _sized_budget(a, inst, r: int) -> int:
    if a.L:
        return a.L
    if a.c is None:
        raise ValueError("need --L or --c to size the index")
    return auto_table_budget(inst.set.n, inst.set.d, r, a.c)


def cmd_build(a) -> int:
    if not a.out:
        raise ValueError("build needs --out (index file path)")
    inst = _read_instance_file(a.instance)
    r = a.r if a.r is not None else inst.r
    model = CollisionModel(inst.set.d, r, a.c)
    L = _sized_budget(a, inst, r)
    index = build_index(inst.set, model, L, backend=a.backend, seed=a.seed,
                        schedule=a.schedule, probe_budget=a.probe_budget)
    save_index(index, a.out)
    print(json.dumps({"path": a.out, "n": index.n, "d": index.d,
                      "K": index.K, "L": index.L,
                      "samplers": index.n_samplers,
                      "schedule": index.schedule}))
    return EXIT_OK


def _run_one(engine: str, index, inst, r: int, t, c, max_probes
             ) -> QueryReport:
    if engine == "scan":
        ids = linear_scan(inst.set, inst.query, r)
        n = inst.set.n
        return QueryReport(engine="scan", ids=ids, k_best=0, l_best=1,
                           w_best=n + 1, buckets_probed=1,
                           candidates_retrieved=n, distance_computations=n)
    if engine == "naive":
        return naive_lsh_query(index, inst.query, r)
    if engine == "static":
        if t is None:
            raise ValueError("static engine needs --t")
        if c is None:
            raise ValueError("static engine needs --c")
        return static_query(index, inst.query, r, t, c)
    if engine == "single":
        return adaptive_single(index, inst.query, r)
    return adaptive_multi(index, inst.query, r, max_probes or None)


def cmd_query(a) -> int:
    inst = _read_instance_file(a.instance)
    r = a.r if a.r is not None else inst.r
    loaded = None
    if a.index and a.engine != "scan":
        loaded = load_index(a.index, points=inst.set)
    lines = []
    for rep in range(a.repeats):
        seed = stream_seed(a.seed, 300, rep)
        t0 = time.perf_counter()
        if a.engine == "scan":
            index = None
        elif loaded is not None:
            index = loaded
        else:
            model = CollisionModel(inst.set.d, r, a.c)
            L = _sized_budget(a, inst, r)
            index = build_index(inst.set, model, L, backend=a.backend,
                                seed=seed, schedule=a.schedule,
                                probe_budget=a.probe_budget)
        c = a.c
        if c is None and index is not None:
            c = index.model.c
        report = _run_one(a.engine, index, inst, r, a.t, c, a.max_probes)
        wall = time.perf_counter() - t0
        rec = {"seed": seed, "r": r}
        rec.update(report.to_dict())
        rec["wall_time"] = round(wall, 6)
        lines.append(json.dumps(rec))
    _write_text(a.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_analyze(a) -> int:
    stem = _stem(a.out)
    inst = _read_instance_file(a.instance)
    r = a.r if a.r is not None else inst.r
    if a.c is None:
        raise ValueError("analyze needs --c (the gap factor)")
    model = CollisionModel(inst.set.d, r, a.c)
    hist = distance_histogram(inst.query, inst.set)
    kmax = a.kmax or standard_lsh_params(inst.set.n, model.p1, model.p2)[0]
    prof = WorkProfile.from_histogram(hist, model.p1, kmax, a.probe_budget)

    level_rows = [{"k": k, "expected_work": w}
                  for k, w in enumerate(prof.levels)]
    grid_rows = []
    for k in range(1, kmax + 1):
        lmax = min(1 << min(k, 62), a.probe_budget)
        ells, ell = [], 1
        while ell <= lmax:
            ells.append(ell)
            ell <<= 1
        if ells[-1] != lmax:
            ells.append(lmax)
        for ell in ells:
            grid_rows.append({"k": k, "ell": ell,
                              "multi_work": multi_work(hist, k, ell,
                                                       model.p1)})
    curve = []
    for tau in a.tau_grid:
        alpha, expo = multiprobe_exponent(tau, model.p1, model.p2)
        curve.append({"tau": tau, "alpha": alpha, "exponent": expo})
    try:
        tau_star = exponent_fixed_point(model.p1, model.p2)
    except ValueError:
        tau_star = None
    summary = {
        "n": inst.set.n, "d": inst.set.d, "r": r, "c": a.c,
        "p1": model.p1, "p2": model.p2, "rho": rho(model.p1, model.p2),
        "kmax": kmax, "probe_budget": a.probe_budget,
        "W_single": prof.W_single, "k_single": prof.k_single,
        "W_multi": prof.W_multi, "cell_multi": list(prof.cell_multi),
        "fixed_point_tau": tau_star, "exponent_curve": curve,
    }
    _write_text(stem + ".levels" + _ext(a.format),
                _rows_text(level_rows, LEVEL_COLUMNS, a.format))
    _write_text(stem + ".grid" + _ext(a.format),
                _rows_text(grid_rows, GRID_COLUMNS, a.format))
    _write_text(stem + ".json", json.dumps(summary, indent=2) + "\n")
    print("wrote {0}.levels{1}, {0}.grid{1}, {0}.json".format(stem,
                                                              _ext(a.format)))
    return EXIT_OK


def _bench_config(a, builds: int) -> BenchConfig:
    return BenchConfig(family=a.family, n=a.n, d=a.d, r=a.r, c=a.c,
                       t_grid=tuple(a.t_grid), engines=tuple(a.engines),
                       builds=builds, seed=a.seed, L=a.L,
                       schedule=a.schedule, backend=a.backend,
                       probe_budget=a.probe_budget, max_probes=a.max_probes,
                       growth_exp=a.growth_exp)


def cmd_sweep(a) -> int:
    stem = _stem(a.out)
    cfg = _bench_config(a, a.builds)
    rows, curves = run_sweep(cfg)
    _write_text(stem + _ext(a.format),
                _rows_text([row.as_dict() for row in rows], SWEEP_COLUMNS,
                           a.format))
    _write_text(stem + "_curves" + _ext(a.format),
                _rows_text(curves, CURVE_COLUMNS, a.format))
    made = [stem + _ext(a.format), stem + "_curves" + _ext(a.format)]
    if not a.no_plot:
        render_sweep_plot(rows, curves, stem + ".png")
        made.append(stem + ".png")
    print("wrote " + ", ".join(made))
    return EXIT_OK


def cmd_recall(a) -> int:
    stem = _stem(a.out)
    cfg = _bench_config(a, a.builds)
    rows = measure_recall(cfg)
    _write_text(stem + _ext(a.format),
                _rows_text(rows, RECALL_COLUMNS, a.format))
    made = [stem + _ext(a.format)]
    if not a.no_plot:
        render_recall_plot(rows, stem + ".png")
        made.append(stem + ".png")
    print("wrote " + ", ".join(made))
    return EXIT_OK


_COMMANDS = {"gen": cmd_gen, "build": cmd_build, "query": cmd_query,
             "analyze": cmd_analyze, "sweep": cmd_sweep,
             "recall": cmd_recall}


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="root seed; all randomness derives from it")
    common.add_argument("--out", default="",
                        help="output path or stem ('-' or empty: stdout "
                             "where supported)")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="row format for tabular outputs")
    common.add_argument("--config", default="",
                        help="flat key=value file; flags override it")
    common.add_argument("--no-plot", action="store_true",
                        help="skip PNG rendering for sweep/recall")

    parser = argparse.ArgumentParser(
        prog="srrlsh",
        description="spherical range reporting with multi-level "
                    "bit-sampling indexes")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("gen", parents=[common],
                       help="write a generated instance file")
    p.add_argument("--family", choices=FAMILIES, default="t-heavy")
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--d", type=int, default=256)
    p.add_argument("--r", type=int, default=32)
    p.add_argument("--c", type=float, default=2.0)
    p.add_argument("--t", type=int, default=16,
                   help="points within distance r of the query")
    p.add_argument("--growth-exp", type=float, default=2.0)
    subs["gen"] = p

    p = sub.add_parser("build", parents=[common],
                       help="build and persist an index for an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--r", type=int, default=None,
                   help="close radius (default: the instance's r)")
    p.add_argument("--c", type=float, default=None,
                   help="gap factor; enables auto table sizing")
    p.add_argument("--L", type=int, default=0,
                   help="table budget (0: derive from n, r, c)")
    p.add_argument("--schedule", choices=("single", "multi"),
                   default="multi")
    p.add_argument("--backend", choices=("hash", "trie"), default="hash")
    p.add_argument("--probe-budget", type=int, default=4096)
    subs["build"] = p

    p = sub.add_parser("query", parents=[common],
                       help="run one engine, emitting JSON lines")
    p.add_argument("--instance", required=True)
    p.add_argument("--index", default="",
                   help="persisted index (default: build per repeat)")
    p.add_argument("--engine", choices=ENGINES, required=True)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--t", type=int, default=None,
                   help="output-size hint (static engine)")
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--max-probes", type=int, default=0,
                   help="probe cap for the multi engine (0: index budget)")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--L", type=int, default=0)
    p.add_argument("--schedule", choices=("single", "multi"),
                   default="multi")
    p.add_argument("--backend", choices=("hash", "trie"), default="hash")
    p.add_argument("--probe-budget", type=int, default=4096)
    subs["query"] = p

    p = sub.add_parser("analyze", parents=[common],
                       help="exact expected-work tables for an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--c", type=float, default=None)
    p.add_argument("--kmax", type=int, default=0,
                   help="deepest level (0: the standard LSH level)")
    p.add_argument("--probe-budget", type=int, default=4096)
    p.add_argument("--tau-grid", type=_float_list,
                   default=[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
                   help="ln(t)/ln(n) values for the exponent curve")
    subs["analyze"] = p

    p = sub.add_parser("sweep", parents=[common],
                       help="work-vs-t sweep across engines")
    p.add_argument("--family", choices=FAMILIES, default="t-heavy")
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--d", type=int, default=256)
    p.add_argument("--r", type=int, default=32)
    p.add_argument("--c", type=float, default=2.0)
    p.add_argument("--t-grid", type=_int_list, default=[4, 16, 64, 256])
    p.add_argument("--engines", type=_str_list, default=["single", "naive"])
    p.add_argument("--builds", type=int, default=100)
    p.add_argument("--L", type=int, default=0)
    p.add_argument("--schedule", choices=("single", "multi"),
                   default="multi")
    p.add_argument("--backend", choices=("hash", "trie"), default="hash")
    p.add_argument("--probe-budget", type=int, default=4096)
    p.add_argument("--max-probes", type=int, default=0)
    p.add_argument("--growth-exp", type=float, default=2.0)
    subs["sweep"] = p

    p = sub.add_parser("recall", parents=[common],
                       help="per-point recall over independent builds")
    p.add_argument("--family", choices=FAMILIES, default="t-heavy")
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--d", type=int, default=256)
    p.add_argument("--r", type=int, default=32)
    p.add_argument("--c", type=float, default=2.0)
    p.add_argument("--t-grid", type=_int_list, default=[16])
    p.add_argument("--engines", type=_str_list, default=["single"])
    p.add_argument("--builds", type=int, default=300)
    p.add_argument("--L", type=int, default=0)
    p.add_argument("--schedule", choices=("single", "multi"),
                   default="multi")
    p.add_argument("--backend", choices=("hash", "trie"), default="hash")
    p.add_argument("--probe-budget", type=int, default=4096)
    p.add_argument("--max-probes", type=int, default=0)
    p.add_argument("--growth-exp", type=float, default=2.0)
    subs["recall"] = p

    return parser, subs


def _apply_config(sub: argparse.ArgumentParser, path: str):
    """Config keys are flag dest names (t_grid=4,16); flags still win
    because the command line is re-parsed afterwards."""
    with open(path) as fh:
        text = fh.read()
    actions = {act.dest: act for act in sub._actions}
    overrides = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError("config line {}: expected key=value"
                             .format(lineno))
        key, val = (part.strip() for part in line.split("=", 1))
        act = actions.get(key)
        if act is None or key in ("help", "config"):
            raise ValueError("config line {}: unknown key {!r}"
                             .format(lineno, key))
        if act.const is True:   # store_true flags
            overrides[key] = val.lower() in ("1", "true", "yes", "on")
        elif act.type is not None:
            overrides[key] = act.type(val)
        else:
            overrides[key] = val
        if act.choices is not None and overrides[key] not in act.choices:
            raise ValueError("config line {}: {!r} not one of {}"
                             .format(lineno, overrides[key],
                                     sorted(act.choices)))
    sub.set_defaults(**overrides)


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser, subs = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            _apply_config(subs[args.command], args.config)
            args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except core.InfeasibleInstance as exc:
        return _fail(exc, EXIT_INFEASIBLE)
    except InsufficientLevels as exc:
        return _fail(exc, EXIT_INFEASIBLE)
    except (ValueError, argparse.ArgumentTypeError) as exc:
        return _fail(exc, EXIT_VALIDATION)
    except OSError as exc:
        return _fail(exc, EXIT_IO)


def _fail(exc: Exception, code: int) -> int:
    print("error: {}".format(exc), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
