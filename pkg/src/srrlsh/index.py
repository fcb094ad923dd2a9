"""Multi-level bitsampling LSH index over Hamming points.

One coordinate sequence is drawn per repetition i; the level-k hash code of
a point under repetition i is the k-prefix of its sampled bit string, so
codes are prefix-nested across levels and all levels of one repetition share
a single sorted order.  Levels run 0..K where K is the largest level whose
single-probe repetition count fits the budget L.

Two backends answer bucket queries: "hash" keeps, per repetition, the
bit-reversed full codes sorted (a level-k bucket is then a contiguous key
range found by binary search); "trie" materializes the prefix tree whose
nodes store the left/right index of their range explicitly.  Both report
identical bucket contents for identical samplers.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .core import BitPoint, PointSet
from .probing import probe_mask, reps_multi

__all__ = [
    "CollisionModel", "HashCode", "MultiLevelIndex",
    "collision_prob", "standard_lsh_params", "reps_plain", "reps_single",
    "schedule_tables", "build_index", "bucket_size", "bucket_points",
    "hash_code", "probe_code", "save_index", "load_index",
]

MAX_LEVEL = 63          # full codes must fit a 64-bit sort key

_MAGIC = b"SRRINDEX"
_HEADER = "<HBBIIHIqIIId"
_VERSION = 1
_BACKENDS = ("hash", "trie")
_SCHEDULES = ("plain", "single", "multi")


# ---------------------------------------------------------------------------
# 1.  Collision model and repetition schedules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CollisionModel:
    """Bitsampling collision probabilities for radius r (and optionally cr)."""

    d: int
    r: int
    c: Optional[float] = None

    def __post_init__(self):
        if not 0 <= self.r <= self.d:
            raise ValueError("need 0 <= r <= d")
        if self.c is not None:
            if self.c <= 1:
                raise ValueError("need c > 1")
            if self.c * self.r >= self.d:
                raise ValueError("need c*r < d")

    @property
    def p1(self) -> float:
        return 1.0 - self.r / self.d

    @property
    def p2(self) -> float:
        if self.c is None:
            raise ValueError("model has no far radius (c unset)")
        return 1.0 - self.c * self.r / self.d


class HashCode(NamedTuple):
    """A level-k code; bit j (from LSB) is the j-th sampled coordinate."""

    level: int
    bits: int


def collision_prob(delta: int, d: int, k: int) -> float:
    """(1 - delta/d)^k: probability two points at distance delta share a
    level-k code."""
    if not 0 <= delta <= d:
        raise ValueError("need 0 <= delta <= d")
    if k < 0:
        raise ValueError("need k >= 0")
    return (1.0 - delta / d) ** k


def standard_lsh_params(n: int, p1: float, p2: float) -> tuple[int, int]:
    """Classic near-neighbor parameters: k = ceil(ln n / ln(1/p2)) and
    L = ceil(3 / p1^k)."""
    if not 0.0 < p2 < p1 < 1.0:
        raise ValueError("need 0 < p2 < p1 < 1")
    k = math.ceil(math.log(n) / math.log(1.0 / p2)) if n > 1 else 0
    L = math.ceil(3.0 / p1 ** k)
    return k, L


def reps_plain(k: int, p1: float) -> int:
    """ceil(p1^-k) repetitions (one expected collision for a close point)."""
    if k < 0:
        raise ValueError("need k >= 0")
    if k == 0:
        return 1
    return math.ceil(1.0 / p1 ** k)


def reps_single(k: int, p1: float) -> int:
    """Repetitions for the adaptive single-probe schedule.

    Equals reps_multi(k, 1, p1) = ceil(2 ln(2k) / p1^k) by construction so
    the one-probe column of the multi-probe grid is exactly this schedule.
    """
    if k < 0:
        raise ValueError("need k >= 0")
    if k == 0:
        return 1
    return reps_multi(k, 1, p1)


def schedule_tables(kind: str, k: int, p1: float, probe_budget: int = 4096) -> int:
    """Tables wanted at level k under the named repetition schedule.

    All three schedules are non-decreasing in k (for "multi" this follows
    from the top-ell collision mass shrinking with k), so per-level table
    counts clipped to L stay non-decreasing as well.
    """
    if kind == "plain":
        return reps_plain(k, p1)
    if kind == "single":
        return reps_single(k, p1)
    if kind == "multi":
        if k == 0:
            return 1
        lmax = min(1 << min(k, 62), probe_budget)
        # walk the probe sequence shell by shell; within shell a the
        # cumulative probability grows linearly in ell
        want = 0
        p_full = 0.0
        lo = 0
        a = 0
        big = float(1 << 62)
        while lo < lmax and a <= k:
            width = min(math.comb(k, a), lmax - lo)
            pa = p1 ** (k - a) * (1.0 - p1) ** a
            j = np.arange(1, width + 1, dtype=np.float64)
            P = p_full + j * pa
            ells = lo + j
            with np.errstate(divide="ignore"):
                reps = np.ceil(2.0 * np.log(2.0 * ells * k) / P)
            reps = np.nan_to_num(reps, nan=big, posinf=big)
            want = max(want, int(min(reps.max(), big)))
            p_full += math.comb(k, a) * pa
            lo += width
            a += 1
        return want
    raise ValueError("unknown schedule kind {!r}".format(kind))


# ---------------------------------------------------------------------------
# 2.  Backends
# ---------------------------------------------------------------------------

class _HashBackend:
    """Per repetition: full-code keys (bit-reversed, sorted) + id permutation."""

    def __init__(self, keys: np.ndarray, perms: np.ndarray, K: int):
        self.keys = keys        # (S, n) uint64, each row sorted
        self.perms = perms      # (S, n) int32
        self.K = K
        self._flat = None       # lazy (S*n,) global sort: (row << K) | key

    def range(self, i: int, k: int, prefix: int) -> tuple[int, int]:
        """Index range of the level-k bucket whose reversed prefix matches."""
        row = self.keys[i]
        if k == 0:
            return 0, row.shape[0]
        step = 1 << (self.K - k)
        lo = int(np.searchsorted(row, prefix, side="left"))
        hi = int(np.searchsorted(row, prefix + step, side="left"))
        return lo, hi

    def sizes_bulk(self, i0: int, i1: int, k: int,
                   prefixes: np.ndarray) -> np.ndarray:
        """Level-k bucket sizes for rows i0..i1-1 at per-row key prefixes.

        When row index and key fit one 64-bit word together, all rows are
        searched in a single pass over a lazily built flat view; otherwise
        falls back to per-row binary search.
        """
        S = self.keys.shape[0]
        m = i1 - i0
        if k == 0:
            return np.full(m, self.keys.shape[1], dtype=np.int64)
        if self._flat is None and self.K + max(S - 1, 1).bit_length() <= 64:
            rows = np.arange(S, dtype=np.uint64) << np.uint64(self.K)
            self._flat = (self.keys + rows[:, None]).ravel()
        if self._flat is not None:
            base = np.arange(i0, i1, dtype=np.uint64) << np.uint64(self.K)
            lo_t = base | prefixes.astype(np.uint64)
            hi_t = lo_t + np.uint64(1 << (self.K - k))
            both = np.searchsorted(self._flat, np.concatenate([lo_t, hi_t]))
            return (both[m:] - both[:m]).astype(np.int64)
        out = np.empty(m, dtype=np.int64)
        for j in range(m):
            lo, hi = self.range(i0 + j, k, int(prefixes[j]))
            out[j] = hi - lo
        return out

    def ids(self, i: int, lo: int, hi: int) -> np.ndarray:
        return self.perms[i, lo:hi]


class _TrieNode:
    __slots__ = ("left", "right", "zero", "one")

    def __init__(self, left: int, right: int):
        self.left = left        # inclusive
        self.right = right      # inclusive
        self.zero = None
        self.one = None


class _TrieBackend(_HashBackend):
    """Explicit prefix trie per repetition; nodes store their index range.

    The sorted key rows are kept alongside (persistence walks them), but
    lookups descend the trie and read the node's stored range.
    """

    def __init__(self, keys: np.ndarray, perms: np.ndarray, K: int):
        super().__init__(keys, perms, K)
        self.roots = [self._build(keys[i]) for i in range(keys.shape[0])]

    def _build(self, row: np.ndarray) -> _TrieNode:
        K = self.K
        n = row.shape[0]
        root = _TrieNode(0, n - 1)
        stack = [(root, 0, n, 0, 0)]     # node, lo, hi, depth, prefix
        while stack:
            node, lo, hi, depth, prefix = stack.pop()
            if depth == K:
                continue
            bitpos = K - 1 - depth
            split = lo + int(np.searchsorted(row[lo:hi], prefix | (1 << bitpos)))
            if split > lo:
                node.zero = _TrieNode(lo, split - 1)
                stack.append((node.zero, lo, split, depth + 1, prefix))
            if split < hi:
                node.one = _TrieNode(split, hi - 1)
                stack.append((node.one, split, hi, depth + 1,
                              prefix | (1 << bitpos)))
        return root

    def range(self, i: int, k: int, prefix: int) -> tuple[int, int]:
        node = self.roots[i]
        for depth in range(k):
            bit = (prefix >> (self.K - 1 - depth)) & 1
            node = node.one if bit else node.zero
            if node is None:
                return 0, 0
        return node.left, node.right + 1

    def sizes_bulk(self, i0: int, i1: int, k: int,
                   prefixes: np.ndarray) -> np.ndarray:
        out = np.empty(i1 - i0, dtype=np.int64)
        for j in range(i1 - i0):
            lo, hi = self.range(i0 + j, k, int(prefixes[j]))
            out[j] = hi - lo
        return out


# ---------------------------------------------------------------------------
# 3.  The index
# ---------------------------------------------------------------------------

class MultiLevelIndex:
    """Immutable after construction; concurrent queries only read (the lazy
    probe-mask cache grows monotonically, which is benign)."""

    def __init__(self, d: int, n: int, model: CollisionModel, L: int, K: int,
                 schedule: str, probe_budget: int, tables: np.ndarray,
                 coords: np.ndarray, backend: str, store: _HashBackend,
                 seed: int, points: Optional[PointSet]):
        self.d = d
        self.n = n
        self.model = model
        self.L = L
        self.K = K
        self.schedule = schedule
        self.probe_budget = probe_budget
        self.tables = tables            # tables[k] for k = 0..K
        self.coords = coords            # (n_samplers, K) int32
        self.backend = backend
        self.store = store
        self.seed = seed
        self.points = points
        self._probe_keymasks: dict[int, list[int]] = {}

    @property
    def n_samplers(self) -> int:
        return self.coords.shape[0]

    # -- query-side helpers -------------------------------------------------

    def sort_keys_for(self, bits: int) -> np.ndarray:
        """Bit-reversed full-K keys of a query point under every sampler."""
        if self.K == 0:
            return np.zeros(self.n_samplers, dtype=np.uint64)
        nbytes = (self.d + 7) // 8
        buf = np.frombuffer(bits.to_bytes(nbytes, "little"), dtype=np.uint8)
        qbits = np.unpackbits(buf, bitorder="little")[: self.d]
        sampled = qbits[self.coords]                     # (S, K)
        weights = np.uint64(1) << np.arange(self.K - 1, -1, -1, dtype=np.uint64)
        return (sampled.astype(np.uint64) * weights).sum(axis=1,
                                                         dtype=np.uint64)

    def key_prefix(self, qkey: int, k: int) -> int:
        """Top-k-bit prefix of a full sort key (low bits zeroed)."""
        if k == 0:
            return 0
        return int(qkey) & ~((1 << (self.K - k)) - 1)

    def probe_keymask(self, k: int, ell: int) -> int:
        """XOR mask, in sort-key space, of the ell-th probe at level k."""
        cache = self._probe_keymasks.setdefault(k, [])
        while len(cache) < ell:
            mask = probe_mask(k, len(cache) + 1)
            cache.append(_reverse_bits(mask, k) << (self.K - k))
        return cache[ell - 1]


def build_index(points: PointSet, model: CollisionModel, L: int,
                backend: str = "hash", seed: int = 0,
                schedule: str = "single",
                probe_budget: int = 4096) -> MultiLevelIndex:
    """Build all levels 0..K with the schedule's tables per level.

    K is the largest level with reps_single(K) <= L, so the adaptive
    single-probe scan never exhausts tables; per-level table counts are
    min(schedule's want, L).
    """
    if L < 1:
        raise ValueError("need L >= 1")
    if backend not in _BACKENDS:
        raise ValueError("unknown backend {!r}".format(backend))
    if schedule not in _SCHEDULES:
        raise ValueError("unknown schedule {!r}".format(schedule))
    if points.d != model.d:
        raise ValueError("model dimension differs from point set")

    p1 = model.p1
    K = 0
    while K < MAX_LEVEL and reps_single(K + 1, p1) <= L:
        K += 1
    tables = np.array(
        [min(schedule_tables(schedule, k, p1, probe_budget), L)
         for k in range(K + 1)],
        dtype=np.int64,
    )
    S = int(tables.max())

    rng = np.random.default_rng(seed)
    coords = rng.integers(0, points.d, size=(S, K), dtype=np.int32)

    n = points.n
    keys = np.zeros((S, n), dtype=np.uint64)
    if K > 0:
        B = points.bit_matrix()
        weights = np.uint64(1) << np.arange(K - 1, -1, -1, dtype=np.uint64)
        chunk = max(1, (1 << 22) // max(1, n * K))
        for i0 in range(0, S, chunk):
            i1 = min(S, i0 + chunk)
            sub = B[:, coords[i0:i1]].astype(np.uint64)      # (n, c, K)
            keys[i0:i1] = (sub * weights).sum(axis=2, dtype=np.uint64).T

    perms = np.empty((S, n), dtype=np.int32)
    id_bits = max(1, (n - 1).bit_length())
    if K + id_bits <= 63:
        # pack ids into the low bits: one flat sort yields key order with
        # ascending ids inside equal keys
        ids = np.arange(n, dtype=np.uint64)
        id_mask = np.uint64((1 << id_bits) - 1)
        shift = np.uint64(id_bits)
        for i in range(S):
            combined = (keys[i] << shift) | ids
            combined.sort()
            perms[i] = (combined & id_mask).astype(np.int32)
            keys[i] = combined >> shift
    else:
        ids32 = np.arange(n, dtype=np.int32)
        for i in range(S):
            order = np.lexsort((ids32, keys[i]))
            keys[i] = keys[i][order]
            perms[i] = order.astype(np.int32)

    cls = _TrieBackend if backend == "trie" else _HashBackend
    store = cls(keys, perms, K)
    return MultiLevelIndex(points.d, n, model, L, K, schedule, probe_budget,
                           tables, coords, backend, store, seed, points)


# ---------------------------------------------------------------------------
# 4.  Bucket operations
# ---------------------------------------------------------------------------

def _check_cell(index: MultiLevelIndex, k: int, i: int):
    if not 0 <= k <= index.K:
        raise ValueError("level {} out of range (K={})".format(k, index.K))
    if not 0 <= i < int(index.tables[k]):
        raise ValueError("repetition {} out of range at level {} "
                         "({} tables)".format(i, k, int(index.tables[k])))


def _reverse_bits(v: int, k: int) -> int:
    out = 0
    for j in range(k):
        if (v >> j) & 1:
            out |= 1 << (k - 1 - j)
    return out


def _code_to_prefix(index: MultiLevelIndex, k: int, code: int) -> int:
    if code < 0 or code >> k:
        raise ValueError("code does not fit level {}".format(k))
    return _reverse_bits(code, k) << (index.K - k)


def bucket_size(index: MultiLevelIndex, k: int, i: int, code) -> int:
    """Stored size of bucket h_{k,i} = code; 0 if the bucket is absent."""
    if isinstance(code, HashCode):
        code = code.bits
    _check_cell(index, k, i)
    lo, hi = index.store.range(i, k, _code_to_prefix(index, k, code))
    return hi - lo


def bucket_points(index: MultiLevelIndex, k: int, i: int, code) -> list[int]:
    """Ids stored in bucket h_{k,i} = code (ascending)."""
    if isinstance(code, HashCode):
        code = code.bits
    _check_cell(index, k, i)
    lo, hi = index.store.range(i, k, _code_to_prefix(index, k, code))
    return sorted(int(v) for v in index.store.ids(i, lo, hi))


def hash_code(index: MultiLevelIndex, i: int, k: int, x) -> HashCode:
    """Level-k code of a point under repetition i."""
    if not 0 <= k <= index.K:
        raise ValueError("level out of range")
    if not 0 <= i < index.n_samplers:
        raise ValueError("repetition out of range")
    bits = x.bits if isinstance(x, BitPoint) else int(x)
    v = 0
    for j in range(k):
        if (bits >> int(index.coords[i, j])) & 1:
            v |= 1 << j
    return HashCode(k, v)


def probe_code(base: HashCode, ell: int) -> HashCode:
    """The ell-th probe of a base code (see probing module for the order)."""
    return HashCode(base.level, base.bits ^ probe_mask(base.level, ell))


# ---------------------------------------------------------------------------
# 5.  Persistence (index format v1)
# ---------------------------------------------------------------------------

def save_index(index: MultiLevelIndex, path: str):
    """Binary format v1: header, per-level table counts, sampler matrix,
    then per-(k,i) tables as (code, size, ids...) records with buckets in
    code-key order and ids ascending inside each bucket."""
    c = index.model.c
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack(
            _HEADER, _VERSION, _BACKENDS.index(index.backend),
            _SCHEDULES.index(index.schedule), index.d, index.n, index.K,
            index.L, index.seed, index.probe_budget, index.n_samplers,
            index.model.r, math.nan if c is None else float(c),
        ))
        fh.write(np.ascontiguousarray(index.tables, dtype=np.int64).tobytes())
        fh.write(np.ascontiguousarray(index.coords, dtype=np.int32).tobytes())
        keys = index.store.keys
        perms = index.store.perms
        for k in range(index.K + 1):
            shift = np.uint64(index.K - k)
            for i in range(int(index.tables[k])):
                row = keys[i]
                prefixes = row >> shift if index.K > k else row
                starts = np.flatnonzero(
                    np.concatenate(([True], prefixes[1:] != prefixes[:-1])))
                ends = np.append(starts[1:], len(row))
                fh.write(struct.pack("<HII", k, i, len(starts)))
                for s, e in zip(starts, ends):
                    code = _reverse_bits(int(prefixes[s]), k)
                    fh.write(struct.pack("<QI", code, int(e - s)))
                    fh.write(np.ascontiguousarray(
                        perms[i, s:e], dtype=np.uint32).tobytes())


def load_index(path: str, points: Optional[PointSet] = None) -> MultiLevelIndex:
    """Reload an index; bucket contents are reproduced exactly from the
    full-depth records.  Attach `points` to enable distance filtering."""
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError("not an index file")
        head = fh.read(struct.calcsize(_HEADER))
        (version, backend_i, schedule_i, d, n, K, L, seed, probe_budget,
         S, r, c) = struct.unpack(_HEADER, head)
        if version != _VERSION:
            raise ValueError("unsupported index version {}".format(version))
        tables = np.frombuffer(fh.read(8 * (K + 1)), dtype=np.int64).copy()
        coords = np.frombuffer(fh.read(4 * S * K), dtype=np.int32
                               ).reshape(S, K).copy()
        keys = np.zeros((S, n), dtype=np.uint64)
        perms = np.zeros((S, n), dtype=np.int32)
        filled = np.zeros(S, dtype=bool)
        while True:
            rec = fh.read(10)
            if not rec:
                break
            k, i, nbuckets = struct.unpack("<HII", rec)
            pos = 0
            for _ in range(nbuckets):
                code, size = struct.unpack("<QI", fh.read(12))
                ids = np.frombuffer(fh.read(4 * size), dtype=np.uint32)
                if k == K:
                    keys[i, pos:pos + size] = _reverse_bits(code, K)
                    perms[i, pos:pos + size] = ids.astype(np.int32)
                    pos += size
            if k == K:
                if pos != n:
                    raise ValueError("truncated full-depth table")
                filled[i] = True
        if not filled.all():
            raise ValueError("index file missing full-depth tables")

    if points is not None and points.d != d:
        raise ValueError("points dimension differs from index")
    if points is not None and points.n != n:
        raise ValueError("points count differs from index")
    model = CollisionModel(d, r, None if math.isnan(c) else c)
    cls = _TrieBackend if _BACKENDS[backend_i] == "trie" else _HashBackend
    store = cls(keys, perms, K)
    return MultiLevelIndex(d, n, model, L, K, _SCHEDULES[schedule_i],
                           probe_budget, tables, coords, _BACKENDS[backend_i],
                           store, seed, points)
