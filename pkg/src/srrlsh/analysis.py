"""Exact expected-work computations and exponent calculus.

These are the oracles the adaptive engines are judged against: per-level
expected work from the exact distance histogram, its minimum over levels,
the multi-probe grid minimum, and the implicit entropy-based exponent.
All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .probing import ball_volume, cumulative_prob, probe_shell

__all__ = [
    "WorkProfile", "ExponentParams", "expected_work", "w_single", "w_multi",
    "multi_work", "rho", "entropy", "kl", "multiprobe_exponent",
    "exponent_fixed_point", "gap_k",
]


# ---------------------------------------------------------------------------
# 1.  Expected work from the exact histogram
# ---------------------------------------------------------------------------

def _survival(hist, k: int) -> float:
    """sum_delta counts[delta] * (1 - delta/d)^k."""
    d = hist.d
    deltas = np.nonzero(hist.counts)[0]
    agree = 1.0 - deltas / d
    return float(np.sum(hist.counts[deltas] * agree ** k))


def expected_work(hist, k: int, p_close: float) -> float:
    """Expected buckets-plus-candidates at level k with plain repetitions:
    (1 + sum_x Pr[collide at level k]) / p_close^k."""
    if k < 0:
        raise ValueError("need k >= 0")
    denom = p_close ** k
    if denom == 0.0:
        return math.inf
    return (1.0 + _survival(hist, k)) / denom


def w_single(hist, p1: float, K: int) -> tuple[float, int]:
    """Minimum of expected_work over levels 0..K, with its argmin."""
    best, best_k = math.inf, 0
    for k in range(K + 1):
        w = expected_work(hist, k, p1)
        if w < best:
            best, best_k = w, k
    return best, best_k


def w_multi(hist, p1: float, K: int, probe_budget: int = 4096
            ) -> tuple[float, tuple[int, int]]:
    """Minimum expected work over the (level, probe-count) grid.

    For level k and ell probes the expected work is
        (ell + sum_a m_a(ell) * S_a(k)) / P_{k,ell}
    where m_a(ell) counts probes at flip radius a among the first ell and
    S_a(k) = sum_delta counts[delta] (delta/d)^a (1-delta/d)^(k-a).
    Shell counts come from ball-volume brackets; no codes are enumerated.
    """
    if not 0.0 < p1 < 1.0:
        raise ValueError("need 0 < p1 < 1")
    d = hist.d
    deltas = np.nonzero(hist.counts)[0]
    weights = hist.counts[deltas].astype(np.float64)
    flip = deltas / d            # per-sampled-bit disagreement probability
    agree = 1.0 - flip

    best = expected_work(hist, 0, p1)     # k=0 has the single empty probe
    best_cell = (0, 1)
    q1 = 1.0 - p1
    for k in range(1, K + 1):
        lmax = min(1 << k if k < 63 else probe_budget, probe_budget)
        # per-shell point mass S_a and probe probability, a = 0..k
        a_hi = k
        # stop extending shells once the ball covers lmax probes
        vols = [1]
        while vols[-1] < lmax and len(vols) - 1 < k:
            a = len(vols)
            vols.append(vols[-1] + math.comb(k, a))
        a_hi = len(vols) - 1
        S = np.empty(a_hi + 1)
        pp = np.empty(a_hi + 1)
        for a in range(a_hi + 1):
            with np.errstate(divide="ignore", invalid="ignore"):
                S[a] = float(np.sum(weights * flip ** a * agree ** (k - a)))
            pp[a] = p1 ** (k - a) * q1 ** a

        ells = np.arange(1, lmax + 1, dtype=np.float64)
        # piecewise-linear cumulative sums over the shells
        M = np.empty(lmax)       # sum_a m_a(ell) * S_a
        P = np.empty(lmax)       # P_{k,ell}
        m_full = 0.0
        p_full = 0.0
        lo = 0
        for a in range(a_hi + 1):
            hi = min(vols[a], lmax)
            if hi > lo:
                j = np.arange(1, hi - lo + 1, dtype=np.float64)
                M[lo:hi] = m_full + j * S[a]
                P[lo:hi] = p_full + j * pp[a]
            m_full += math.comb(k, a) * S[a]
            p_full += math.comb(k, a) * pp[a]
            lo = hi
            if lo >= lmax:
                break
        W = (ells + M) / P
        i = int(np.argmin(W))
        if W[i] < best:
            best, best_cell = float(W[i]), (k, i + 1)
    return best, best_cell


def multi_work(hist, k: int, ell: int, p1: float) -> float:
    """Expected work for one (level, probe-count) cell.

    Scalar reference for the vectorized grid scan in w_multi; the two must
    agree on every cell.
    """
    if not 0.0 < p1 < 1.0:
        raise ValueError("need 0 < p1 < 1")
    if k == 0:
        if ell != 1:
            raise ValueError("level 0 has a single probe")
        return expected_work(hist, 0, p1)
    if not 1 <= ell <= (1 << k):
        raise ValueError("probe count out of range")
    d = hist.d
    deltas = [int(x) for x in np.nonzero(hist.counts)[0]]
    m = 0.0
    for j in range(1, ell + 1):
        a = probe_shell(k, j)
        for delta in deltas:
            flip = delta / d
            m += hist.counts[delta] * flip ** a * (1.0 - flip) ** (k - a)
    return (ell + m) / cumulative_prob(k, ell, p1)


@dataclass
class WorkProfile:
    """Per-level and grid expected work for one histogram."""

    levels: list[float]
    W_single: float
    k_single: int
    W_multi: float
    cell_multi: tuple[int, int]
    p1: float
    K: int
    probe_budget: int

    @classmethod
    def from_histogram(cls, hist, p1: float, K: int,
                       probe_budget: int = 4096) -> "WorkProfile":
        levels = [expected_work(hist, k, p1) for k in range(K + 1)]
        ws, ks = w_single(hist, p1, K)
        wm, cell = w_multi(hist, p1, K, probe_budget)
        return cls(levels, ws, ks, wm, cell, p1, K, probe_budget)


# ---------------------------------------------------------------------------
# 2.  Exponents
# ---------------------------------------------------------------------------

def rho(p1: float, p2: float) -> float:
    """Standard LSH exponent ln(1/p1) / ln(1/p2)."""
    if not 0.0 < p2 <= p1 <= 1.0:
        raise ValueError("need 0 < p2 <= p1 <= 1")
    if p1 == p2:
        return 1.0
    return math.log(p1) / math.log(p2)


def entropy(alpha: float) -> float:
    """Binary entropy in nats; H(0) = H(1) = 0."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("need alpha in [0,1]")
    h = 0.0
    if alpha > 0.0:
        h -= alpha * math.log(alpha)
    if alpha < 1.0:
        h -= (1.0 - alpha) * math.log(1.0 - alpha)
    return h


def kl(alpha: float, beta: float) -> float:
    """Binary KL divergence D(alpha || beta) in nats."""
    if not 0.0 < beta < 1.0:
        raise ValueError("need beta in (0,1)")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("need alpha in [0,1]")
    v = 0.0
    if alpha > 0.0:
        v += alpha * math.log(alpha / beta)
    if alpha < 1.0:
        v += (1.0 - alpha) * math.log((1.0 - alpha) / (1.0 - beta))
    return v


@dataclass
class ExponentParams:
    """Solved multi-probe exponent at one tau = ln t / ln n."""

    p1: float
    p2: float
    tau: float
    alpha: float
    exponent: float
    rho: float = field(init=False)

    def __post_init__(self):
        self.rho = rho(self.p1, self.p2)


_ALPHA_EPS = 1e-9


def _balance(alpha: float, tau: float, beta: float) -> float:
    """tau * (1 + D(alpha||beta)/H(alpha)) with the alpha->0 limit."""
    h = entropy(alpha)
    if h == 0.0:
        return math.inf
    return tau * (1.0 + kl(alpha, beta) / h)


def multiprobe_exponent(tau: float, p1: float, p2: float,
                        tol: float = 1e-10) -> tuple[float, float]:
    """Solve the implicit probing-volume equation and return (alpha, exponent).

    alpha in (0, 1-p2] is the root of tau*(1 + D(alpha||1-p2)/H(alpha)) = 1
    (the left side is monotone decreasing on the bracket); the exponent is
    then tau*(1 + D(alpha||1-p1)/H(alpha)).
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("need 0 < tau < 1")
    if not 0.0 < p2 < p1 < 1.0:
        raise ValueError("need 0 < p2 < p1 < 1")
    beta2 = 1.0 - p2
    lo, hi = _ALPHA_EPS, beta2
    f_lo = _balance(lo, tau, beta2) - 1.0
    f_hi = _balance(hi, tau, beta2) - 1.0
    if not (f_lo > 0.0 >= f_hi):
        raise ValueError(
            "no root in bracket: residuals f({:.3g})={:.3g}, f({:.3g})={:.3g}"
            .format(lo, f_lo, hi, f_hi)
        )
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f = _balance(mid, tau, beta2) - 1.0
        if abs(f) <= tol:
            lo = hi = mid
            break
        if f > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16:
            break
    alpha = 0.5 * (lo + hi)
    return alpha, _balance(alpha, tau, 1.0 - p1)


def exponent_fixed_point(p1: float, p2: float, tol: float = 1e-10
                         ) -> float:
    """The tau* with multiprobe exponent(tau*) = tau* (query time linear
    in the output size).

    exponent(tau) - tau = tau * D(alpha||1-p1)/H(alpha) is nonnegative and
    touches zero exactly where the implicit alpha equals 1-p1, so the
    nested bisection runs on alpha(tau) - (1-p1), which does change sign
    (alpha is increasing in tau).
    """
    target = 1.0 - p1

    def g(tau: float) -> float:
        a, _ = multiprobe_exponent(tau, p1, p2, tol)
        return a - target

    lo, hi = 1e-6, 1.0 - 1e-9
    g_lo, g_hi = g(lo), g(hi)
    if not (g_lo < 0.0 < g_hi):
        raise ValueError("no fixed point in (0,1): g({})={}, g({})={}"
                         .format(lo, g_lo, hi, g_hi))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return 0.5 * (lo + hi)


def gap_k(n: int, t: int, d: int, r: int, c: float) -> int:
    """Level for a known gap: ceil(ln(n/t) / ln(1/(1 - c*r/d)))."""
    if c * r >= d:
        raise ValueError("need c*r < d")
    if not 1 <= t <= n:
        raise ValueError("need 1 <= t <= n")
    p2 = 1.0 - c * r / d
    return math.ceil(math.log(n / t) / math.log(1.0 / p2))
