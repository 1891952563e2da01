"""Streaming estimators for Euclidean uniform facility location cost."""

from ._ufl import (
    EstimateReport,
    Instance,
    LevelReport,
    Stream,
    bhm_candidate_optimum,
    compute_rp,
    gen_bhm,
    gen_clustered,
    gen_example_hard,
    gen_uniform,
    mp_solve,
    offline_estimate,
    one_pass_estimate,
    random_order_estimate,
    read_stream,
    shuffle_order,
    sum_rp,
    two_pass_estimate,
    with_deletions,
    write_stream,
)

__all__ = [
    "EstimateReport",
    "Instance",
    "LevelReport",
    "Stream",
    "bhm_candidate_optimum",
    "compute_rp",
    "gen_bhm",
    "gen_clustered",
    "gen_example_hard",
    "gen_uniform",
    "mp_solve",
    "offline_estimate",
    "one_pass_estimate",
    "random_order_estimate",
    "read_stream",
    "shuffle_order",
    "sum_rp",
    "two_pass_estimate",
    "with_deletions",
    "write_stream",
]
