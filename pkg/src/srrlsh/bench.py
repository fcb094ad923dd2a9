"""Reproducible experiments: recall measurement and work-vs-t sweeps.

Everything here is a pure function of (config, seed): instance generation,
index builds, and query order are all derived from the root seed through
SeedSequence streams, so reruns produce identical rows.  Wall-clock time is
carried as an informational column and excluded from determinism checks.
"""

from __future__ import annotations

import math
import statistics
import time
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import core
from .analysis import multiprobe_exponent, rho
from .core import BitPoint, Instance
from .engines import (adaptive_multi, adaptive_single, linear_scan,
                      naive_lsh_query, static_query)
from .index import CollisionModel, build_index, reps_single, standard_lsh_params

__all__ = ["BenchConfig", "SweepRow", "run_sweep", "measure_recall",
           "make_instance", "auto_table_budget", "stream_seed",
           "render_sweep_plot", "render_recall_plot"]

SWEEP_COLUMNS = ["family", "n", "d", "r", "c", "t", "engine", "builds",
                 "seed", "median_w_best", "mean_candidates", "recall",
                 "k_best_mode", "l_best_mode", "error", "wall_time"]
CURVE_COLUMNS = ["curve", "t", "value"]
RECALL_COLUMNS = ["family", "n", "d", "r", "c", "t", "engine", "builds",
                  "seed", "stat", "point_id", "distance", "hits", "recall",
                  "wall_time"]

FAMILIES = ("t-heavy", "gap", "uniform", "growth")
ENGINES = ("scan", "naive", "static", "single", "multi")


@dataclass
class BenchConfig:
    """One experiment: an instance family crossed with engines and a t grid."""

    family: str = "t-heavy"
    n: int = 1024
    d: int = 256
    r: int = 32
    c: float = 2.0
    t_grid: tuple = (16,)
    engines: tuple = ("single",)
    builds: int = 100
    seed: int = 0
    L: int = 0                  # 0 = derive from the standard level
    schedule: str = "multi"
    backend: str = "hash"
    probe_budget: int = 4096
    max_probes: int = 0         # 0 = index probe budget
    growth_exp: float = 2.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError("unknown family {!r}".format(self.family))
        for e in self.engines:
            if e not in ENGINES:
                raise ValueError("unknown engine {!r}".format(e))
        if self.builds < 1:
            raise ValueError("need builds >= 1")
        if any(t > self.n for t in self.t_grid):
            raise ValueError("t grid values must be <= n")
        if not self.t_grid:
            raise ValueError("empty t grid")


@dataclass
class SweepRow:
    """One aggregate per (t, engine); medians over builds runs.  Rows for
    infeasible parameter points carry the message in error and None stats."""

    family: str
    n: int
    d: int
    r: int
    c: float
    t: int
    engine: str
    builds: int
    seed: int
    median_w_best: float | None
    mean_candidates: float | None
    recall: float | None
    k_best_mode: int | None
    l_best_mode: int | None
    error: str
    wall_time: float

    def as_dict(self) -> dict:
        return {c: getattr(self, c) for c in SWEEP_COLUMNS}


def stream_seed(*parts) -> int:
    """Deterministic child seed from (root seed, tags)."""
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def auto_table_budget(n: int, d: int, r: int, c: float) -> int:
    """Table budget making the index reach the standard level: the naive
    engine then probes its classic parameters while the adaptive engines
    get the full level range."""
    model = CollisionModel(d, r, c)
    k_std, _ = standard_lsh_params(n, model.p1, model.p2)
    return reps_single(k_std, model.p1)


def make_instance(cfg: BenchConfig, t: int, seed: int) -> Instance:
    if cfg.family == "t-heavy":
        return core.gen_t_heavy(cfg.n, t, cfg.d, cfg.r, cfg.c, seed)
    if cfg.family == "gap":
        return core.gen_gap_instance(cfg.n, t, cfg.d, cfg.r, cfg.c, seed)
    if cfg.family == "growth":
        return core.gen_growth_restricted(cfg.n, cfg.d, cfg.growth_exp, seed)
    pset = core.gen_uniform(cfg.n, cfg.d, seed)
    q = core.gen_uniform(1, cfg.d, stream_seed(seed, 1)).raw[0]
    return Instance(pset, BitPoint(cfg.d, q), cfg.r,
                    {"family": "uniform", "seed": seed})


def _run_engine(engine: str, index, inst: Instance, t: int, cfg: BenchConfig):
    q, r = inst.query, inst.r
    if engine == "scan":
        ids = linear_scan(inst.set, q, r)
        return ids, index.n + 1, index.n, 0, 1
    if engine == "naive":
        rep = naive_lsh_query(index, q, r)
    elif engine == "static":
        rep = static_query(index, q, r, t, cfg.c)
    elif engine == "single":
        rep = adaptive_single(index, q, r)
    else:
        rep = adaptive_multi(index, q, r,
                             cfg.max_probes if cfg.max_probes else None)
    return (rep.ids, rep.w_best, rep.candidates_retrieved, rep.k_best,
            rep.l_best)


def reference_curves(cfg: BenchConfig) -> list[dict]:
    """Analytic overlays for the sweep: the naive t*n^rho cost, the
    output-sensitive target t*(n/t)^rho, the linear scan, and the
    multi-probe exponent curve sampled at tau = ln t / ln n."""
    try:
        model = CollisionModel(cfg.d, cfg.r, cfg.c)
    except ValueError:
        return []
    rr = rho(model.p1, model.p2)
    n = cfg.n
    out = []
    for t in cfg.t_grid:
        out.append({"curve": "t_n_rho", "t": t, "value": t * n ** rr})
        out.append({"curve": "t_gap_rho", "t": t,
                    "value": t * (n / t) ** rr})
        out.append({"curve": "linear", "t": t, "value": float(n)})
        tau = math.log(t) / math.log(n) if t > 1 else 1e-6
        try:
            _, expo = multiprobe_exponent(min(tau, 1.0), model.p1, model.p2)
            out.append({"curve": "multiprobe", "t": t,
                        "value": t + n ** expo})
        except ValueError:
            pass
    return out


def run_sweep(cfg: BenchConfig) -> tuple[list[SweepRow], list[dict]]:
    """Fresh builds per (t, build, engine); medians/modes per (t, engine).

    Returns (sweep rows, reference curve rows).  Infeasible generator
    parameters produce a row with the error column set instead of raising.
    """
    rows = []
    for t in cfg.t_grid:
        inst_seed = stream_seed(cfg.seed, 100, t)
        try:
            inst = make_instance(cfg, t, inst_seed)
            model = CollisionModel(cfg.d, inst.r, cfg.c)
            L = cfg.L or auto_table_budget(cfg.n, cfg.d, inst.r, cfg.c)
        except (core.InfeasibleInstance, ValueError) as exc:
            for engine in cfg.engines:
                rows.append(_sweep_row(cfg, t, engine, error=str(exc)))
            continue
        oracle = set(linear_scan(inst.set, inst.query, inst.r))
        stats = {e: {"w": [], "cand": [], "rec": [], "k": [], "l": []}
                 for e in cfg.engines}
        t0 = time.perf_counter()
        err = {}
        for b in range(cfg.builds):
            idx = build_index(inst.set, model, L, backend=cfg.backend,
                              seed=stream_seed(cfg.seed, 200, t, b),
                              schedule=cfg.schedule,
                              probe_budget=cfg.probe_budget)
            for engine in cfg.engines:
                if engine in err:
                    continue
                try:
                    ids, w, cand, kb, lb = _run_engine(engine, idx, inst, t,
                                                       cfg)
                except ValueError as exc:
                    err[engine] = str(exc)
                    continue
                s = stats[engine]
                s["w"].append(w)
                s["cand"].append(cand)
                s["rec"].append(len(set(ids) & oracle) / len(oracle)
                                if oracle else 1.0)
                s["k"].append(kb)
                s["l"].append(lb)
        wall = time.perf_counter() - t0
        for engine in cfg.engines:
            if engine in err:
                rows.append(_sweep_row(cfg, t, engine, error=err[engine],
                                       r=inst.r))
                continue
            s = stats[engine]
            rows.append(_sweep_row(
                cfg, t, engine,
                median_w=statistics.median(s["w"]),
                mean_cand=statistics.fmean(s["cand"]),
                recall=statistics.fmean(s["rec"]),
                k_mode=Counter(s["k"]).most_common(1)[0][0],
                l_mode=Counter(s["l"]).most_common(1)[0][0],
                wall=wall, r=inst.r))
    return rows, reference_curves(cfg)


def _sweep_row(cfg, t, engine, median_w=None, mean_cand=None, recall=None,
               k_mode=None, l_mode=None, wall=0.0, error="", r=None):
    return SweepRow(family=cfg.family, n=cfg.n, d=cfg.d,
                    r=cfg.r if r is None else r, c=cfg.c, t=t, engine=engine,
                    builds=cfg.builds, seed=cfg.seed, median_w_best=median_w,
                    mean_candidates=mean_cand, recall=recall,
                    k_best_mode=k_mode, l_best_mode=l_mode, error=error,
                    wall_time=round(wall, 6))


def measure_recall(cfg: BenchConfig) -> list[dict]:
    """Per close point: the fraction of independent builds reporting it,
    plus min/mean aggregate rows per (t, engine)."""
    rows = []
    for t in cfg.t_grid:
        inst_seed = stream_seed(cfg.seed, 100, t)
        inst = make_instance(cfg, t, inst_seed)
        model = CollisionModel(cfg.d, inst.r, cfg.c)
        L = cfg.L or auto_table_budget(cfg.n, cfg.d, inst.r, cfg.c)
        close = linear_scan(inst.set, inst.query, inst.r)
        dists = {i: core.hamming_distance(inst.set.point(i), inst.query)
                 for i in close}
        hits = {e: Counter() for e in cfg.engines}
        t0 = time.perf_counter()
        for b in range(cfg.builds):
            idx = build_index(inst.set, model, L, backend=cfg.backend,
                              seed=stream_seed(cfg.seed, 200, t, b),
                              schedule=cfg.schedule,
                              probe_budget=cfg.probe_budget)
            for engine in cfg.engines:
                ids, *_ = _run_engine(engine, idx, inst, t, cfg)
                hits[engine].update(ids)
        wall = time.perf_counter() - t0
        for engine in cfg.engines:
            recalls = []
            for pid in close:
                rec = hits[engine][pid] / cfg.builds
                recalls.append(rec)
                rows.append(_recall_row(cfg, t, engine, "point", pid,
                                        dists[pid], hits[engine][pid], rec,
                                        wall, inst.r))
            if recalls:
                rows.append(_recall_row(cfg, t, engine, "min", "", "", "",
                                        min(recalls), wall, inst.r))
                rows.append(_recall_row(cfg, t, engine, "mean", "", "", "",
                                        statistics.fmean(recalls), wall,
                                        inst.r))
    return rows


def _recall_row(cfg, t, engine, stat, pid, dist, hits, recall, wall, r=None):
    return {"family": cfg.family, "n": cfg.n, "d": cfg.d,
            "r": cfg.r if r is None else r,
            "c": cfg.c, "t": t, "engine": engine, "builds": cfg.builds,
            "seed": cfg.seed, "stat": stat, "point_id": pid,
            "distance": dist, "hits": hits, "recall": round(recall, 6),
            "wall_time": round(wall, 6)}


# ---------------------------------------------------------------------------
# Figures (rendered next to the delimited output)
# ---------------------------------------------------------------------------

_CURVE_STYLE = {"t_n_rho": ("t·n^ρ (naive)", "--"),
                "t_gap_rho": ("t·(n/t)^ρ (target)", "-."),
                "linear": ("n (scan)", ":"),
                "multiprobe": ("t + n^exponent", "--")}


def render_sweep_plot(rows: list[SweepRow], curves: list[dict], path: str):
    """Work vs output size, empirical medians over analytic overlays."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 5))
    engines = sorted({r.engine for r in rows if not r.error})
    for engine in engines:
        pts = [(r.t, r.median_w_best) for r in rows
               if r.engine == engine and not r.error]
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o",
                label="median w ({})".format(engine))
    for name, (label, style) in _CURVE_STYLE.items():
        pts = sorted((c["t"], c["value"]) for c in curves
                     if c["curve"] == name)
        if pts:
            ax.plot([p[0] for p in pts], [p[1] for p in pts], style,
                    alpha=0.6, label=label)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log", base=2)
    ax.set_xlabel("t (output size)")
    ax.set_ylabel("work")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_recall_plot(rows: list[dict], path: str):
    """Per-point recall by distance, one panel per engine."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    pts = [r for r in rows if r["stat"] == "point"]
    engines = sorted({r["engine"] for r in pts})
    fig, axes = plt.subplots(1, max(len(engines), 1),
                             figsize=(4 * max(len(engines), 1), 4),
                             squeeze=False)
    for ax, engine in zip(axes[0], engines or ["-"]):
        sub = [r for r in pts if r["engine"] == engine]
        ax.scatter([r["distance"] for r in sub], [r["recall"] for r in sub],
                   s=14, alpha=0.7)
        ax.axhline(0.5, color="grey", ls="--", lw=1)
        ax.set_ylim(-0.02, 1.05)
        ax.set_xlabel("distance from query")
        ax.set_ylabel("per-point recall")
        ax.set_title(engine)
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
