"""Probe-code enumeration for level-k codes, ordered by collision probability.

The ell-th probe (1-indexed) of a base code is base XOR mask(ell), where the
masks enumerate {0,1}^k by non-decreasing popcount; inside a popcount shell
the masks are in increasing numeric order, which is colexicographic order on
the flipped-index sets.  For per-bit agreement probability p > 1/2 this makes
the per-probe collision probabilities non-increasing (a "reasonable" order);
constructions with p <= 1/2 are rejected.
"""

from __future__ import annotations

import math
from typing import Iterator

__all__ = [
    "ball_volume", "probe_mask", "probe_shell", "iter_probe_masks",
    "ProbeSequence", "probe_prob", "cumulative_prob", "reps_multi",
]


def ball_volume(k: int, a: int) -> int:
    """V(a) = sum_{i<=a} C(k,i); V(-1) = 0."""
    if a > k:
        raise ValueError("radius a={} exceeds k={}".format(a, k))
    if a < 0:
        return 0
    return sum(math.comb(k, i) for i in range(a + 1))


def probe_shell(k: int, ell: int) -> int:
    """The popcount a of the ell-th probe mask: V(a-1) < ell <= V(a)."""
    if not 1 <= ell <= (1 << k):
        raise ValueError("probe index {} out of range for k={}".format(ell, k))
    a, vol = 0, 1
    while ell > vol:
        a += 1
        vol += math.comb(k, a)
    return a


def probe_mask(k: int, ell: int) -> int:
    """The ell-th mask directly: rank inside the shell is unranked in
    colex order (equivalently: the j-th smallest k-bit value of that
    popcount)."""
    a = probe_shell(k, ell)
    if a == 0:
        return 0
    j = ell - ball_volume(k, a - 1) - 1  # 0-indexed rank inside shell a
    mask = 0
    for i in range(a, 0, -1):
        # largest m with C(m, i) <= j indexes the i-th highest set bit
        m = i - 1
        while math.comb(m + 1, i) <= j:
            m += 1
        mask |= 1 << m
        j -= math.comb(m, i)
    return mask


def iter_probe_masks(k: int) -> Iterator[int]:
    """All 2^k masks lazily, shell by shell (Gosper's hack inside a shell)."""
    yield 0
    top = 1 << k
    for a in range(1, k + 1):
        v = (1 << a) - 1
        while v < top:
            yield v
            # next same-popcount value
            lo = v & -v
            carry = v + lo
            v = carry | (((v ^ carry) >> 2) // lo)


class ProbeSequence:
    """Lazy probe enumeration for one level, pinned to agreement prob p."""

    def __init__(self, k: int, p: float):
        if k < 1:
            raise ValueError("need k >= 1")
        if not 0.5 < p < 1.0:
            raise ValueError(
                "probing order requires 1/2 < p < 1 (got p={}); sequences "
                "below 1/2 are not probability-sorted".format(p)
            )
        self.k = k
        self.p = p
        self._masks: list[int] = []
        self._it = iter_probe_masks(k)

    def mask(self, ell: int) -> int:
        """Mask for probe ell (1-indexed), extending the lazy prefix."""
        if not 1 <= ell <= (1 << self.k):
            raise ValueError("probe index out of range")
        while len(self._masks) < ell:
            self._masks.append(next(self._it))
        return self._masks[ell - 1]

    def probe(self, base: int, ell: int) -> int:
        return base ^ self.mask(ell)

    def prob(self, ell: int) -> float:
        return probe_prob(self.k, ell, self.p)


def probe_prob(k: int, ell: int, p: float) -> float:
    """Collision probability of the ell-th probe: p^(k-a) (1-p)^a."""
    if not 0.0 < p < 1.0:
        raise ValueError("need 0 < p < 1")
    a = probe_shell(k, ell)
    return p ** (k - a) * (1.0 - p) ** a


def cumulative_prob(k: int, ell: int, p: float) -> float:
    """P_{k,ell}: probability of a collision within the first ell probes.

    Closed form: full shells below a, plus the partial shell a.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("need 0 < p < 1")
    a = probe_shell(k, ell)
    total = 0.0
    for i in range(a):
        total += math.comb(k, i) * p ** (k - i) * (1.0 - p) ** i
    total += (ell - ball_volume(k, a - 1)) * p ** (k - a) * (1.0 - p) ** a
    return total


def reps_multi(k: int, ell: int, p1: float) -> int:
    """Repetitions needed when probing ell buckets per table at level k."""
    if k < 1 or ell < 1:
        raise ValueError("need k >= 1 and ell >= 1")
    return math.ceil(2.0 * math.log(2.0 * ell * k) / cumulative_prob(k, ell, p1))
