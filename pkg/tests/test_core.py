import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from srrlsh.core import (BitPoint, DimensionMismatch, InfeasibleInstance,
                         Instance, PointSet, distance_histogram,
                         gen_gap_instance, gen_growth_restricted,
                         gen_t_heavy, gen_uniform, hamming_distance,
                         hex_to_point, point_to_hex, read_instance,
                         write_instance)


def bp(d, bits):
    return BitPoint(d, bits)


def hist_of(inst):
    return distance_histogram(inst.query, inst.set)


# ---------------------------------------------------------------------------
# distance
# ---------------------------------------------------------------------------

def test_distance_identity():
    assert hamming_distance(bp(4, 0b0101), bp(4, 0b0101)) == 0


def test_distance_two_flips():
    assert hamming_distance(bp(4, 0b0101), bp(4, 0b0110)) == 2


def test_distance_complement():
    assert hamming_distance(bp(64, 0), bp(64, (1 << 64) - 1)) == 64


def test_distance_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        hamming_distance(bp(4, 1), bp(5, 1))


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 200), st.data())
def test_metric_axioms(d, data):
    full = st.integers(0, (1 << d) - 1)
    a, b, c = (bp(d, data.draw(full)) for _ in range(3))
    dab = hamming_distance(a, b)
    assert dab == hamming_distance(b, a)
    assert (dab == 0) == (a.bits == b.bits)
    assert dab <= hamming_distance(a, c) + hamming_distance(c, b)


def test_bitpoint_rejects_padding():
    with pytest.raises(ValueError):
        BitPoint(4, 0b10000)
    with pytest.raises(ValueError):
        BitPoint(4, -1)


# ---------------------------------------------------------------------------
# histogram
# ---------------------------------------------------------------------------

def test_histogram_singleton():
    q = bp(8, 0b1010)
    h = distance_histogram(q, PointSet(8, [q.bits]))
    assert h.counts[0] == 1 and h.counts.sum() == 1


def test_histogram_complement_pair():
    q = bp(8, 0b10110100)
    h = distance_histogram(q, PointSet(8, [q.bits, q.bits ^ 0xFF]))
    assert h.counts[0] == 1 and h.counts[8] == 1 and h.counts.sum() == 2


def test_histogram_loop_oracle():
    rng = np.random.default_rng(42)
    d = 48
    pts = [int(v) for v in rng.integers(0, 1 << d, 100, dtype=np.uint64)]
    q = bp(d, int(rng.integers(0, 1 << d, dtype=np.uint64)))
    pset = PointSet(d, pts)
    h = distance_histogram(q, pset)
    manual = np.zeros(d + 1, dtype=np.int64)
    for p in pset:
        manual[hamming_distance(q, p)] += 1
    assert np.array_equal(h.counts, manual)


def test_histogram_prefix_sums():
    inst = gen_t_heavy(128, 16, 64, 8, 2.0, 3)
    ball = hist_of(inst).ball_counts()
    assert np.all(np.diff(ball) >= 0)
    assert ball[-1] == 128


def test_histogram_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        distance_histogram(bp(4, 0), PointSet(8, [0]))


# ---------------------------------------------------------------------------
# t-heavy generator
# ---------------------------------------------------------------------------

def test_t_heavy_forced_histogram():
    h = hist_of(gen_t_heavy(4, 2, 8, 3, 2.0, 11))
    assert h.counts[1] == 1 and h.counts[3] == 1 and h.counts[6] == 2
    assert h.counts.sum() == 4


def test_t_heavy_exact_ball():
    inst = gen_t_heavy(1024, 64, 256, 32, 2.0, 9)
    h = hist_of(inst)
    assert h.counts[32] == 1              # the unique distance-r witness
    assert h.ball_counts()[32] == 64      # N_r(q) = t


def test_t_heavy_t_one():
    h = hist_of(gen_t_heavy(64, 1, 128, 16, 2.0, 4))
    assert h.counts[16] == 1
    assert h.ball_counts()[15] == 0
    assert h.ball_counts()[16] == 1
    assert h.counts[:32].sum() == 1       # everything else at >= ceil(c*r)


def test_t_heavy_t_equals_n():
    h = hist_of(gen_t_heavy(200, 200, 64, 8, 2.0, 6))
    assert h.ball_counts()[8] == 200      # no far points at all


@pytest.mark.parametrize("t", [1, 2, 13, 100])
def test_t_heavy_ball_contract(t):
    inst = gen_t_heavy(256, t, 128, 16, 2.0, t)
    assert hist_of(inst).ball_counts()[16] == t


def test_t_heavy_infeasible_radius():
    with pytest.raises(InfeasibleInstance):
        gen_t_heavy(64, 4, 128, 60, 2.5, 0)   # ceil(c*r) >= d


def test_t_heavy_infeasible_capacity():
    with pytest.raises(InfeasibleInstance):
        gen_t_heavy(300, 1, 8, 3, 2.0, 0)


def test_t_heavy_t_bounds():
    with pytest.raises(ValueError):
        gen_t_heavy(16, 0, 64, 8, 2.0, 0)
    with pytest.raises(ValueError):
        gen_t_heavy(16, 17, 64, 8, 2.0, 0)


def test_generator_determinism():
    a = gen_t_heavy(128, 8, 64, 8, 2.0, 77)
    b = gen_t_heavy(128, 8, 64, 8, 2.0, 77)
    assert a.set == b.set and a.query == b.query and a.r == b.r
    c = gen_t_heavy(128, 8, 64, 8, 2.0, 78)
    assert c.query != a.query or c.set != a.set


# ---------------------------------------------------------------------------
# gap generator
# ---------------------------------------------------------------------------

def test_gap_shell_counts():
    h = hist_of(gen_gap_instance(32, 8, 256, 16, 3.0, 2))
    ball = h.ball_counts()
    assert ball[16] == 8
    assert ball[48] - ball[16] == 8


def test_gap_far_mass():
    h = hist_of(gen_gap_instance(1024, 32, 512, 32, 4.0, 13))
    assert h.counts[129:].sum() == 960    # beyond c*r = 128


def test_gap_expansion_invariant():
    for seed in range(5):
        inst = gen_gap_instance(256, 16, 256, 16, 2.0, seed)
        ball = hist_of(inst).ball_counts()
        assert ball[32] <= 2 * 16


def test_gap_rejects_bad_t():
    with pytest.raises(ValueError):
        gen_gap_instance(32, 0, 256, 16, 3.0, 0)
    with pytest.raises(InfeasibleInstance):
        gen_gap_instance(15, 8, 256, 16, 3.0, 0)   # n < 2t


# ---------------------------------------------------------------------------
# uniform generator
# ---------------------------------------------------------------------------

def test_uniform_reproducible():
    assert gen_uniform(5, 33, 123) == gen_uniform(5, 33, 123)
    assert gen_uniform(5, 33, 123) != gen_uniform(5, 33, 124)


def test_uniform_single_point():
    pset = gen_uniform(1, 8, 3)
    assert pset.n == 1 and pset.d == 8


def test_uniform_mean_pairwise_distance():
    # exact mean over all pairs via per-column counts; 3 sigma with the
    # conservative n/2 independent-pairs variance
    n, d = 10000, 128
    mat = gen_uniform(n, d, 5).bit_matrix().astype(np.int64)
    ones = mat.sum(axis=0)
    pair_dist_sum = (ones * (n - ones)).sum()
    mean = pair_dist_sum / (n * (n - 1) / 2)
    sigma = np.sqrt(d / 4) / np.sqrt(n / 2)
    assert abs(mean - d / 2) <= 3 * sigma


# ---------------------------------------------------------------------------
# growth-restricted generator
# ---------------------------------------------------------------------------

def test_growth_bound_linear():
    inst = gen_growth_restricted(20, 64, 1.0, 8)
    assert hist_of(inst).ball_counts()[4] <= 4


def test_growth_bound_quadratic():
    inst = gen_growth_restricted(100, 256, 2.0, 8)
    ball = hist_of(inst).ball_counts()
    for s in range(1, 257):
        assert ball[s] <= max(1, s * s)


def test_growth_capacity_error():
    with pytest.raises(InfeasibleInstance):
        gen_growth_restricted(10 ** 6, 16, 1.0, 0)


def test_growth_deterministic():
    a = gen_growth_restricted(64, 128, 2.0, 3)
    b = gen_growth_restricted(64, 128, 2.0, 3)
    assert a.set == b.set and a.query == b.query


# ---------------------------------------------------------------------------
# hex encoding and instance files
# ---------------------------------------------------------------------------

def test_hex_convention():
    # coordinate 0 is the MSB of the first nibble
    assert point_to_hex(1, 8) == "80"
    assert point_to_hex(1, 4) == "8"
    assert hex_to_point("80", 8) == 1
    assert BitPoint(12, 0b101000000001).to_hex() == "805"


def test_hex_round_trip():
    rng = np.random.default_rng(0)
    for d in (1, 4, 7, 8, 63, 64, 65, 200):
        for _ in range(20):
            bits = int(rng.integers(0, 1 << min(d, 62))) % (1 << d)
            assert hex_to_point(point_to_hex(bits, d), d) == bits


def test_hex_rejects_padding_and_length():
    with pytest.raises(ValueError):
        hex_to_point("ff", 7)      # padding bit set
    with pytest.raises(ValueError):
        hex_to_point("f", 8)       # wrong length


def test_instance_round_trip():
    inst = gen_t_heavy(64, 8, 100, 12, 2.0, 21)
    back = read_instance(write_instance(inst))
    assert back.set == inst.set
    assert back.query == inst.query
    assert back.r == inst.r
    assert write_instance(back) == write_instance(inst)


def test_instance_rejects_garbage():
    with pytest.raises(ValueError):
        read_instance("not an instance\n")
    good = write_instance(gen_t_heavy(8, 2, 32, 4, 2.0, 1))
    with pytest.raises(ValueError):
        read_instance("\n".join(good.splitlines()[:-2]))


def test_instance_validation():
    pset = PointSet(8, [3, 5])
    with pytest.raises(DimensionMismatch):
        Instance(pset, bp(9, 0), 2)
    with pytest.raises(ValueError):
        Instance(pset, bp(8, 0), 9)


def test_pointset_validation():
    with pytest.raises(ValueError):
        PointSet(8, [])
    with pytest.raises(ValueError):
        PointSet(8, [256])
    with pytest.raises(ValueError):
        PointSet(0, [0])
