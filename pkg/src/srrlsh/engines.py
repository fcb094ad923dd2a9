"""Query engines over the multi-level index.

Five engines share one report shape: a linear-scan oracle, the classic
fixed-level LSH query, a static query for a known result size, and the two
adaptive engines that pick their own parameters from stored bucket sizes
(single-probe level scan, and priority-queue exploration of the
level x probe-count grid).

Work accounting conventions:
  buckets_probed          bucket content reads in the output phase
  candidates_retrieved    ids pulled from those buckets, with multiplicity
  distance_computations   exact distances evaluated (one per unique id)
  loop_size_reads         stored-size lookups made while choosing
                          parameters (adaptive engines only)
  w_best                  sum of (1 + bucket size) over the chosen cell
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .core import BitPoint, DimensionMismatch, PointSet
from .index import MultiLevelIndex, reps_plain, reps_single, standard_lsh_params
from .probing import reps_multi

__all__ = [
    "QueryReport", "ParamCell", "linear_scan", "naive_lsh_query",
    "static_query", "adaptive_single", "adaptive_multi", "evaluate_cell",
]


@dataclass
class QueryReport:
    """Result ids plus the work spent finding them."""

    engine: str
    ids: list[int]
    k_best: int
    l_best: int
    w_best: int
    buckets_probed: int
    candidates_retrieved: int
    distance_computations: int
    loop_size_reads: int = 0
    skipped_cells: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "engine": self.engine,
            "k_best": self.k_best,
            "l_best": self.l_best,
            "w_best": self.w_best,
            "buckets_probed": self.buckets_probed,
            "candidates_retrieved": self.candidates_retrieved,
            "distance_computations": self.distance_computations,
            "loop_size_reads": self.loop_size_reads,
            "skipped_cells": self.skipped_cells,
            "n_results": len(self.ids),
            "ids": self.ids,
        }


@dataclass(frozen=True)
class ParamCell:
    """One (level, probe count) grid cell; priority is a work lower bound."""

    k: int
    ell: int
    priority: int

    @classmethod
    def make(cls, k: int, ell: int, p1: float) -> "ParamCell":
        return cls(k, ell, ell * reps_multi(k, ell, p1))


# ---------------------------------------------------------------------------
# Oracle
# ---------------------------------------------------------------------------

def linear_scan(pset: PointSet, q: BitPoint, r: int) -> list[int]:
    """Every id within distance r of q, by exhaustive scan."""
    if q.d != pset.d:
        raise DimensionMismatch("query dimension differs from set")
    if not 0 <= r <= pset.d:
        raise ValueError("need 0 <= r <= d")
    if pset.n >= 256:
        B = pset.bit_matrix()
        qrow = np.unpackbits(
            np.frombuffer(q.bits.to_bytes((pset.d + 7) // 8, "little"),
                          dtype=np.uint8), bitorder="little")[: pset.d]
        dist = np.count_nonzero(B != qrow, axis=1)
        return [int(i) for i in np.flatnonzero(dist <= r)]
    qb = q.bits
    return [i for i, raw in enumerate(pset.raw) if (raw ^ qb).bit_count() <= r]


# ---------------------------------------------------------------------------
# Shared query-side machinery
# ---------------------------------------------------------------------------

class _Ctx:
    """Per-query view: the query's sort key under every sampler, and size /
    id lookups for (repetition, level) cells with an optional probe mask."""

    def __init__(self, index: MultiLevelIndex, q: BitPoint):
        if q.d != index.d:
            raise DimensionMismatch("query dimension differs from index")
        self.index = index
        self.store = index.store
        K = index.K
        self.qk_np = index.sort_keys_for(q.bits)
        self.qk = [int(v) for v in self.qk_np]
        self.masks = [0] * (K + 1)
        for k in range(1, K + 1):
            self.masks[k] = ((1 << K) - 1) & ~((1 << (K - k)) - 1)

    def size(self, i: int, k: int, xor: int = 0) -> int:
        lo, hi = self.store.range(i, k, (self.qk[i] & self.masks[k]) ^ xor)
        return hi - lo

    def sizes(self, k: int, xor: int, i0: int, i1: int) -> np.ndarray:
        """Bucket sizes for repetitions i0..i1-1 at level k, probe mask xor."""
        prefixes = (self.qk_np[i0:i1] & np.uint64(self.masks[k])) \
            ^ np.uint64(xor)
        return self.store.sizes_bulk(i0, i1, k, prefixes)

    def ids(self, i: int, k: int, xor: int = 0) -> np.ndarray:
        lo, hi = self.store.range(i, k, (self.qk[i] & self.masks[k]) ^ xor)
        return self.store.ids(i, lo, hi)


def _require_points(index: MultiLevelIndex) -> PointSet:
    if index.points is None:
        raise ValueError("index has no attached point set; "
                         "load_index(path, points=...) to enable queries")
    return index.points


def _filter(pset: PointSet, q: BitPoint, r: int, chunks: list[np.ndarray]
            ) -> tuple[list[int], int, int]:
    """Dedupe candidate chunks and keep ids within r.

    Returns (sorted result ids, candidates with multiplicity, uniques)."""
    total = sum(len(c) for c in chunks)
    if total == 0:
        return [], 0, 0
    uniq = np.unique(np.concatenate(chunks))
    if len(uniq) >= 64:
        B = pset.bit_matrix()[uniq]
        qrow = np.unpackbits(
            np.frombuffer(q.bits.to_bytes((pset.d + 7) // 8, "little"),
                          dtype=np.uint8), bitorder="little")[: pset.d]
        dist = np.count_nonzero(B != qrow, axis=1)
        hits = [int(i) for i in uniq[dist <= r]]
    else:
        qb = q.bits
        raw = pset.raw
        hits = [int(i) for i in uniq if (raw[i] ^ qb).bit_count() <= r]
    return hits, total, len(uniq)


def _collect(ctx: _Ctx, pset: PointSet, q: BitPoint, r: int,
             k: int, reps: int, ell: int) -> tuple[list[int], int, int, int]:
    """Read the (reps x ell) grid of buckets at level k and filter.

    Returns (ids, buckets_probed, candidates, distance_computations)."""
    index = ctx.index
    if k == 0:
        chunks = [np.arange(pset.n, dtype=np.int64)]
        hits, cand, uniq = _filter(pset, q, r, chunks)
        return hits, 1, cand, uniq
    chunks = []
    for j in range(1, ell + 1):
        xor = index.probe_keymask(k, j)
        for i in range(reps):
            chunks.append(ctx.ids(i, k, xor))
    hits, cand, uniq = _filter(pset, q, r, chunks)
    return hits, reps * ell, cand, uniq


# ---------------------------------------------------------------------------
# Fixed-parameter engines
# ---------------------------------------------------------------------------

def naive_lsh_query(index: MultiLevelIndex, q: BitPoint, r: int) -> QueryReport:
    """Classic LSH: one fixed level, L repetitions, no adaptivity.

    The level is the standard k for (n, p1, p2), capped at the index depth;
    repetitions are the standard L for that level, capped at the rows built.
    """
    pset = _require_points(index)
    model = index.model
    p2 = model.p2                       # raises if the model lacks c
    p1 = model.p1
    k_std, _ = standard_lsh_params(index.n, p1, p2)
    k = min(k_std, index.K)
    reps = min(math.ceil(3.0 / p1 ** k), index.n_samplers)
    ctx = _Ctx(index, q)
    w = reps + (int(ctx.sizes(k, 0, 0, reps).sum()) if k else reps * pset.n)
    ids, probed, cand, uniq = _collect(ctx, pset, q, r, k, reps, 1)
    if k == 0:
        # level 0 is a single stored bucket; the classic scheme still pays
        # for all L repetitions of it
        probed, cand = reps, pset.n * reps
    return QueryReport("naive", ids, k, 1, w, probed, cand, uniq)


class InsufficientLevels(ValueError):
    """The requested level exceeds the index depth K (L too small)."""


def static_query(index: MultiLevelIndex, q: BitPoint, r: int, t: int,
                 c: float) -> QueryReport:
    """Query for a promised result size t: probe the single level at which
    an expected-size-t ball isolates, with enough repetitions to catch each
    close point once in expectation."""
    pset = _require_points(index)
    if t < 1:
        raise ValueError("need t >= 1")
    if not 0 <= r <= index.d:
        raise ValueError("need 0 <= r <= d")
    if c * r >= index.d:
        raise ValueError("need c*r < d")
    p1 = 1.0 - r / index.d
    p2 = 1.0 - c * r / index.d
    n = index.n
    if t >= n or p2 >= 1.0:
        k = 0
    else:
        k = math.ceil(math.log(n / t) / math.log(1.0 / p2))
    if k > index.K:
        raise InsufficientLevels(
            "level {} exceeds index depth {}; build with larger L".format(
                k, index.K))
    reps = reps_plain(k, p1)
    if reps > int(index.tables[k]):
        raise InsufficientLevels(
            "{} repetitions needed at level {} but only {} built".format(
                reps, k, int(index.tables[k])))
    ctx = _Ctx(index, q)
    w = reps + (int(ctx.sizes(k, 0, 0, reps).sum()) if k else pset.n)
    ids, probed, cand, uniq = _collect(ctx, pset, q, r, k, reps, 1)
    return QueryReport("static", ids, k, 1, w, probed, cand, uniq)


# ---------------------------------------------------------------------------
# Adaptive engines
# ---------------------------------------------------------------------------

def _check_adaptive_schedule(index: MultiLevelIndex):
    if index.schedule not in ("single", "multi"):
        raise ValueError("adaptive engines need a single- or multi-probe "
                         "schedule, not {!r}".format(index.schedule))


def adaptive_single(index: MultiLevelIndex, q: BitPoint, r: int) -> QueryReport:
    """Scan levels upward, summing stored bucket sizes; keep the level with
    the least total work; stop as soon as a level's repetition count alone
    exceeds the best total seen.  Output the filtered union at that level."""
    pset = _require_points(index)
    _check_adaptive_schedule(index)
    if not 0 <= r <= index.d:
        raise ValueError("need 0 <= r <= d")
    p1 = index.model.p1
    n = index.n
    ctx = _Ctx(index, q)

    w_best = n + 1
    k_best = 0
    reads = 0
    k = 1
    while k <= index.K:
        reps = reps_single(k, p1)
        if reps > min(index.L, w_best):
            break
        w_k = reps + int(ctx.sizes(k, 0, 0, reps).sum())
        reads += reps
        if w_k < w_best:
            w_best, k_best = w_k, k
        k += 1

    reps_best = reps_single(k_best, p1) if k_best else 1
    ids, probed, cand, uniq = _collect(ctx, pset, q, r, k_best, reps_best, 1)
    return QueryReport("single", ids, k_best, 1, w_best, probed, cand, uniq,
                       loop_size_reads=reads)


class _Grid:
    """Incrementally maintained work sum for one level's probe grid.

    Holds the per-repetition sums over the first `ell` probes.  Rows are
    added or dropped as the repetition count moves in either direction
    (re-added rows are re-read; dropping is free), and probe columns only
    ever grow along a level's chain.
    """

    __slots__ = ("ctx", "k", "ell", "rows", "total")

    def __init__(self, ctx: _Ctx, k: int):
        self.ctx = ctx
        self.k = k
        self.ell = 0
        self.rows: list[int] = []
        self.total = 0          # sum of bucket sizes over the current grid

    def advance(self, ell: int, reps: int) -> tuple[int, int]:
        """Grow to (ell, reps); returns (W, size reads spent)."""
        ctx, k = self.ctx, self.k
        reads = 0
        while len(self.rows) > reps:
            self.total -= self.rows.pop()
        if len(self.rows) < reps:
            i0 = len(self.rows)
            if self.ell > 0:
                add = np.zeros(reps - i0, dtype=np.int64)
                for j in range(1, self.ell + 1):
                    add += ctx.sizes(k, ctx.index.probe_keymask(k, j), i0, reps)
                reads += (reps - i0) * self.ell
                self.rows.extend(int(v) for v in add)
                self.total += int(add.sum())
            else:
                self.rows.extend([0] * (reps - i0))
        while self.ell < ell:
            j = self.ell + 1
            col = ctx.sizes(k, ctx.index.probe_keymask(k, j), 0, reps)
            for i in range(reps):
                self.rows[i] += int(col[i])
            self.total += int(col.sum())
            reads += reps
            self.ell = j
        return reps * ell + self.total, reads


def evaluate_cell(index: MultiLevelIndex, q: BitPoint, k: int, ell: int
                  ) -> int:
    """W at one grid cell, recomputed from scratch (reference for tests)."""
    ctx = _Ctx(index, q)
    if k == 0:
        return 1 + index.n
    reps = reps_multi(k, ell, index.model.p1)
    w = reps * ell
    for j in range(1, ell + 1):
        xor = index.probe_keymask(k, j)
        for i in range(reps):
            w += ctx.size(i, k, xor)
    return w


def adaptive_multi(index: MultiLevelIndex, q: BitPoint, r: int,
                   max_probes: int | None = None) -> QueryReport:
    """Best-first exploration of the (level, probe count) grid.

    Cells are ranked by cost = ell * reps(level, ell), a lower bound on
    their work; each level advances through probe counts 1, 2, ... and the
    search stops once the cheapest unexplored cell cannot beat the best
    work found.  Cells needing more repetitions than were built are skipped
    and recorded, as are chains cut short by the probe cap.
    """
    pset = _require_points(index)
    _check_adaptive_schedule(index)
    if not 0 <= r <= index.d:
        raise ValueError("need 0 <= r <= d")
    if max_probes is None:
        max_probes = index.probe_budget
    if max_probes < 1:
        raise ValueError("need max_probes >= 1")
    p1 = index.model.p1
    n = index.n
    ctx = _Ctx(index, q)

    heap = []
    for k in range(1, index.K + 1):
        heap.append((reps_single(k, p1), k, 1))
    heapq.heapify(heap)

    w_best = n + 1
    best = (0, 1)
    grids: dict[int, _Grid] = {}
    trace = []
    skipped = []
    reads = 0

    while heap:
        cost, k, ell = heapq.heappop(heap)
        if cost >= w_best:
            break
        reps = reps_multi(k, ell, p1)
        if reps > int(index.tables[k]):
            skipped.append([k, ell, "tables"])
        else:
            grid = grids.get(k)
            if grid is None:
                grid = grids[k] = _Grid(ctx, k)
            W, spent = grid.advance(ell, reps)
            reads += spent
            trace.append([k, ell, cost, W])
            if W < w_best:
                w_best = W
                best = (k, ell)
        nxt = ell + 1
        if k < 62 and nxt > (1 << k):
            continue                    # probe sequence exhausted
        if nxt > max_probes:
            skipped.append([k, nxt, "max_probes"])
            continue
        heapq.heappush(heap, (nxt * reps_multi(k, nxt, p1), k, nxt))

    k_best, l_best = best
    reps_best = reps_multi(k_best, l_best, p1) if k_best else 1
    ids, probed, cand, uniq = _collect(ctx, pset, q, r, k_best, reps_best,
                                       l_best)
    return QueryReport("multi", ids, k_best, l_best, w_best, probed, cand,
                       uniq, loop_size_reads=reads, skipped_cells=skipped,
                       trace=trace)
