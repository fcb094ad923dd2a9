"""Output-sensitive spherical range reporting in Hamming space.

A multi-level bit-sampling index answers "report every point within
distance r of q" with work that adapts to the output size: the engines pick
the hash length (and probe count) by reading bucket sizes at query time
instead of committing to worst-case parameters up front.
"""

from .analysis import (ExponentParams, WorkProfile, entropy,
                       exponent_fixed_point, expected_work, gap_k, kl,
                       multi_work, multiprobe_exponent, rho, w_multi,
                       w_single)
from .bench import (BenchConfig, SweepRow, auto_table_budget, make_instance,
                    measure_recall, run_sweep, stream_seed)
from .core import (BitPoint, DimensionMismatch, DistanceHistogram,
                   InfeasibleInstance, Instance, PointSet,
                   distance_histogram, gen_gap_instance,
                   gen_growth_restricted, gen_t_heavy, gen_uniform,
                   hamming_distance, read_instance, write_instance)
from .engines import (InsufficientLevels, QueryReport, adaptive_multi,
                      adaptive_single, linear_scan, naive_lsh_query,
                      static_query)
from .index import (CollisionModel, HashCode, MultiLevelIndex, bucket_points,
                    bucket_size, build_index, collision_prob, hash_code,
                    load_index, probe_code, reps_plain, reps_single,
                    save_index, schedule_tables, standard_lsh_params)
from .probing import (ProbeSequence, ball_volume, cumulative_prob,
                      iter_probe_masks, probe_mask, probe_prob, probe_shell,
                      reps_multi)

__version__ = "0.1.0"

__all__ = [
    "BitPoint", "PointSet", "Instance", "DistanceHistogram",
    "DimensionMismatch", "InfeasibleInstance", "hamming_distance",
    "distance_histogram", "gen_t_heavy", "gen_gap_instance", "gen_uniform",
    "gen_growth_restricted", "read_instance", "write_instance",
    "ball_volume", "probe_shell", "probe_mask", "iter_probe_masks",
    "ProbeSequence", "probe_prob", "cumulative_prob", "reps_multi",
    "CollisionModel", "HashCode", "MultiLevelIndex", "build_index",
    "save_index", "load_index", "bucket_size", "bucket_points", "hash_code",
    "probe_code", "collision_prob", "standard_lsh_params", "reps_plain",
    "reps_single", "schedule_tables",
    "QueryReport", "InsufficientLevels", "linear_scan", "naive_lsh_query",
    "static_query", "adaptive_single", "adaptive_multi",
    "WorkProfile", "ExponentParams", "expected_work", "w_single", "w_multi",
    "multi_work", "rho", "entropy", "kl", "multiprobe_exponent",
    "exponent_fixed_point", "gap_k",
    "BenchConfig", "SweepRow", "run_sweep", "measure_recall",
    "make_instance", "auto_table_budget", "stream_seed",
    "__version__",
]
