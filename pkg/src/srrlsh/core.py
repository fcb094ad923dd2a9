"""Binary points in {0,1}^d, Hamming distances, and instance generators.

Points are stored as Python ints: bit i of the int is coordinate i
(LSB = coordinate 0).  The hex text format is big-endian per nibble with
coordinate 0 as the most significant bit of the first nibble, so "80" at
d=8 is the point whose coordinate 0 is set.  Padding bits beyond d are
always zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, islice
from typing import Iterator, Optional, Sequence

import numpy as np


class DimensionMismatch(ValueError):
    pass


class InfeasibleInstance(ValueError):
    """Requested instance cannot be realized (shell capacity, bounds)."""


# ---------------------------------------------------------------------------
# 1.  Point containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BitPoint:
    """One point of {0,1}^d packed into an int (bit i = coordinate i)."""

    d: int
    bits: int

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError("dimension must be positive")
        if self.bits < 0 or self.bits >> self.d:
            raise ValueError("bits outside {0,1}^d (padding must be zero)")

    def __getitem__(self, i: int) -> int:
        if not 0 <= i < self.d:
            raise IndexError(i)
        return (self.bits >> i) & 1

    def to_hex(self) -> str:
        return point_to_hex(self.bits, self.d)

    @classmethod
    def from_hex(cls, s: str, d: int) -> "BitPoint":
        return cls(d, hex_to_point(s, d))


def point_to_hex(bits: int, d: int) -> str:
    """Hex encoding, coordinate 0 = MSB of the first nibble."""
    width = (d + 3) // 4 * 4
    v = 0
    for i in range(d):
        if (bits >> i) & 1:
            v |= 1 << (width - 1 - i)
    return format(v, "0{}x".format(width // 4))


def hex_to_point(s: str, d: int) -> int:
    width = (d + 3) // 4 * 4
    if len(s) != width // 4:
        raise ValueError("hex string length {} does not match d={}".format(len(s), d))
    v = int(s, 16)
    bits = 0
    for i in range(width):
        if (v >> (width - 1 - i)) & 1:
            if i >= d:
                raise ValueError("nonzero padding bit in hex point")
            bits |= 1 << i
    return bits


class PointSet:
    """Ordered set of points sharing dimension d; ids are 0..n-1."""

    def __init__(self, d: int, raw: Sequence[int]):
        if d <= 0:
            raise ValueError("dimension must be positive")
        if len(raw) < 1:
            raise ValueError("point set must be non-empty")
        raw = tuple(int(v) for v in raw)
        for v in raw:
            if v < 0 or v >> d:
                raise ValueError("point outside {0,1}^d")
        self.d = d
        self.raw = raw
        self._bitmat: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.raw)

    @property
    def n(self) -> int:
        return len(self.raw)

    def point(self, i: int) -> BitPoint:
        return BitPoint(self.d, self.raw[i])

    def __iter__(self) -> Iterator[BitPoint]:
        for v in self.raw:
            yield BitPoint(self.d, v)

    def bit_matrix(self) -> np.ndarray:
        """(n, d) uint8 matrix; column i is coordinate i.  Cached."""
        if self._bitmat is None:
            nbytes = (self.d + 7) // 8
            buf = b"".join(v.to_bytes(nbytes, "little") for v in self.raw)
            arr = np.frombuffer(buf, dtype=np.uint8).reshape(len(self.raw), nbytes)
            self._bitmat = np.unpackbits(arr, axis=1, bitorder="little")[:, : self.d]
        return self._bitmat

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, PointSet)
            and self.d == other.d
            and self.raw == other.raw
        )


@dataclass
class Instance:
    """A point set plus a query and radius, as written by the generators."""

    set: PointSet
    query: BitPoint
    r: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.query.d != self.set.d:
            raise DimensionMismatch("query dimension differs from set")
        if not 0 <= self.r <= self.set.d:
            raise ValueError("radius out of range")


class DistanceHistogram:
    """counts[delta] = number of set points at Hamming distance delta."""

    def __init__(self, counts: Sequence[int]):
        self.counts = np.asarray(counts, dtype=np.int64)
        if np.any(self.counts < 0):
            raise ValueError("negative histogram count")
        self.d = len(self.counts) - 1
        self.n = int(self.counts.sum())

    def ball_counts(self) -> np.ndarray:
        """N_s for s = 0..d (cumulative counts within distance s)."""
        return np.cumsum(self.counts)

    def __getitem__(self, delta: int) -> int:
        return int(self.counts[delta])


# ---------------------------------------------------------------------------
# 2.  Distances
# ---------------------------------------------------------------------------

def hamming_distance(a: BitPoint, b: BitPoint) -> int:
    if a.d != b.d:
        raise DimensionMismatch("points of different dimension")
    return (a.bits ^ b.bits).bit_count()


def distance_histogram(q: BitPoint, pset: PointSet) -> DistanceHistogram:
    if q.d != pset.d:
        raise DimensionMismatch("query dimension differs from set")
    counts = [0] * (pset.d + 1)
    qb = q.bits
    for v in pset.raw:
        counts[(qb ^ v).bit_count()] += 1
    return DistanceHistogram(counts)


# ---------------------------------------------------------------------------
# 3.  Generators
#
# All generators are pure functions of their arguments: the seed draws the
# query point, and shells around it are filled with the lexicographically
# smallest flip-index combinations first.
# ---------------------------------------------------------------------------

def _random_point(rng: np.random.Generator, d: int) -> int:
    nbytes = (d + 7) // 8
    v = int.from_bytes(rng.bytes(nbytes), "little")
    return v & ((1 << d) - 1)


def _shell_points(q: int, d: int, s: int, m: int) -> list[int]:
    """First m points at distance exactly s from q (colex-stable order)."""
    if s == 0:
        return [q] if m >= 1 else []
    out = []
    for combo in islice(combinations(range(d), s), m):
        mask = 0
        for i in combo:
            mask |= 1 << i
        out.append(q ^ mask)
    if len(out) < m:
        raise InfeasibleInstance(
            "shell {} of dimension {} holds only {} points".format(s, d, len(out))
        )
    return out


def _fill_shells(q: int, d: int, start: int, step: int, m: int, *,
                 stop: Optional[int] = None) -> tuple[list[int], dict[int, int]]:
    """Fill m points over shells start, start+step, ... (step = +/-1).

    Returns the points and a {shell: count} map.  Raises if the available
    shells cannot hold m points.
    """
    pts: list[int] = []
    used: dict[int, int] = {}
    s = start
    while len(pts) < m:
        if s < 1 or s > d or (stop is not None and (s - stop) * step > 0):
            raise InfeasibleInstance("not enough shell capacity")
        cap = math.comb(d, s)
        take = min(cap, m - len(pts))
        if take > 0:
            pts.extend(_shell_points(q, d, s, take))
            used[s] = take
        s += step
    return pts, used


def gen_t_heavy(n: int, t: int, d: int, r: int, c: float, seed: int) -> Instance:
    """Adversarial instance: t-1 points as close as possible, one at
    exactly r, and n-t points on shells from ceil(c*r) upward."""
    if not 1 <= t <= n:
        raise ValueError("need 1 <= t <= n")
    far0 = math.ceil(c * r)
    if not 0 < r <= d or far0 >= d:
        raise InfeasibleInstance("need 0 < r and ceil(c*r) < d")
    rng = np.random.default_rng(seed)
    q = _random_point(rng, d)

    close, close_shells = ([], {}) if t == 1 else _fill_shells(q, d, 1, 1, t - 1, stop=r - 1)
    at_r = _shell_points(q, d, r, 1)
    far, far_shells = _fill_shells(q, d, far0, 1, n - t)

    pset = PointSet(d, close + at_r + far)
    meta = {
        "generator": "t-heavy", "seed": seed, "t": t, "c": c,
        "close_shells": close_shells, "far_shells": far_shells,
    }
    return Instance(pset, BitPoint(d, q), r, meta)


def gen_gap_instance(n: int, t: int, d: int, r: int, c: float, seed: int) -> Instance:
    """t points at distance <= r, exactly t in (r, c*r], rest above c*r."""
    if t < 1:
        raise ValueError("need t >= 1")
    if n < 2 * t:
        raise InfeasibleInstance("need n >= 2t")
    if c <= 1:
        raise ValueError("need c > 1")
    far0 = math.floor(c * r) + 1
    if not 0 < r <= d or far0 > d:
        raise InfeasibleInstance("need 0 < r and floor(c*r)+1 <= d")
    rng = np.random.default_rng(seed)
    q = _random_point(rng, d)

    close, close_shells = _fill_shells(q, d, r, -1, t, stop=1)
    mid, mid_shells = _fill_shells(q, d, far0 - 1, -1, t, stop=r + 1)
    far, far_shells = _fill_shells(q, d, far0, 1, n - 2 * t)

    pset = PointSet(d, close + mid + far)
    meta = {
        "generator": "gap", "seed": seed, "t": t, "c": c,
        "close_shells": close_shells, "mid_shells": mid_shells,
        "far_shells": far_shells,
    }
    return Instance(pset, BitPoint(d, q), r, meta)


def gen_uniform(n: int, d: int, seed: int) -> PointSet:
    """n i.i.d. uniform points of {0,1}^d."""
    if n < 1:
        raise ValueError("need n >= 1")
    rng = np.random.default_rng(seed)
    nbytes = (d + 7) // 8
    mask = (1 << d) - 1
    buf = rng.bytes(nbytes * n)
    raw = [int.from_bytes(buf[i * nbytes:(i + 1) * nbytes], "little") & mask
           for i in range(n)]
    return PointSet(d, raw)


def gen_growth_restricted(n: int, d: int, growth_exp: float, seed: int) -> Instance:
    """Points placed so that N_s(query) <= max(1, s^growth_exp) for every s,
    filling each shell at the maximal rate the bound allows."""
    if growth_exp <= 0:
        raise ValueError("need growth_exp > 0")
    if n < 1:
        raise ValueError("need n >= 1")
    rng = np.random.default_rng(seed)
    q = _random_point(rng, d)

    pts: list[int] = []
    shells: dict[int, int] = {}
    placed = 0
    for s in range(1, d + 1):
        cap_bound = int(max(1.0, float(s) ** growth_exp))
        take = min(math.comb(d, s), cap_bound - placed, n - placed)
        if take > 0:
            pts.extend(_shell_points(q, d, s, take))
            shells[s] = take
            placed += take
        if placed == n:
            break
    if placed < n:
        raise InfeasibleInstance(
            "growth bound too tight: placed {} of {} points".format(placed, n)
        )
    # the largest occupied shell is a natural reporting radius
    r = max(shells)
    pset = PointSet(d, pts)
    meta = {"generator": "growth", "seed": seed, "growth_exp": growth_exp,
            "shells": shells}
    return Instance(pset, BitPoint(d, q), r, meta)


# ---------------------------------------------------------------------------
# 4.  Instance text format v1
# ---------------------------------------------------------------------------

FORMAT_HEADER = "srr-instance v1"


def write_instance(inst: Instance) -> str:
    d, n = inst.set.d, inst.set.n
    lines = [FORMAT_HEADER, "d={} n={} r={}".format(d, n, inst.r),
             point_to_hex(inst.query.bits, d)]
    lines.extend(point_to_hex(v, d) for v in inst.set.raw)
    return "\n".join(lines) + "\n"


def read_instance(text: str) -> Instance:
    lines = text.splitlines()
    if not lines or lines[0].strip() != FORMAT_HEADER:
        raise ValueError("not an srr-instance v1 file")
    fields = dict(part.split("=") for part in lines[1].split())
    d, n, r = int(fields["d"]), int(fields["n"]), int(fields["r"])
    if len(lines) < n + 3:
        raise ValueError("truncated instance file")
    q = hex_to_point(lines[2].strip(), d)
    raw = [hex_to_point(lines[3 + i].strip(), d) for i in range(n)]
    return Instance(PointSet(d, raw), BitPoint(d, q), r, {})
