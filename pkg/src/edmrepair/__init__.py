"""Repairing Euclidean embeddability of finite distance data.

A distance space either embeds isometrically in R^d or it does not; this
package decides which, and when it does not, finds a cheapest repair
that deletes at most k_out points and rewrites at most k_mod pairwise
distances within a weight budget. Exact branching solvers, an
instance-compression pipeline, greedy and randomized approximations,
brute-force oracles, and hardness-reduction generators are exposed here;
the `edmrepair` console script wraps them for batch use.
"""

from .approx import (
    greedy_outliers,
    incompatibility_graph,
    obstruction_set,
    run_sieve,
    two_approx_outliers,
    vertex_cover_2approx,
)
from .core import (
    DistanceSpace,
    Solution,
    WeightedInstance,
    apply_modifications,
    as_pair,
    repaired_space,
    restrict,
    solution_cost,
    validate,
)
from .exact import (
    BasisPartition,
    CompressionOutcome,
    CompressionTrace,
    GuessTuple,
    alg1_branch,
    alg2_branch,
    compat_tests,
    compress,
    partition_into_bases,
    solve_eeo,
    solve_weeo,
)
from .feasibility import (
    PartialRealizationProblem,
    feasible_with_free_pairs,
    verify_witness,
)
from .generators import (
    Graph,
    PlantedInstance,
    PlantedSpec,
    maxcut_reduction,
    paper_example,
    planted_instance,
    rank_reduction,
    vc_reduction,
)
from .geometry import (
    DEFAULT_TOL,
    Realization,
    ToleranceConfig,
    cm_det,
    cm_det_with_overrides,
    extend_to_max_independent,
    is_embeddable,
    is_independent,
    is_strongly_embeddable,
    realize,
    strong_dim,
    verify_solution,
)
from .oracle import (
    DEFAULT_BUDGET,
    OracleBudget,
    OracleBudgetError,
    brute_force_eeo,
    brute_force_maxcut,
    brute_force_vertex_cover,
    brute_force_weeo,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BasisPartition",
    "CompressionOutcome",
    "CompressionTrace",
    "DEFAULT_BUDGET",
    "DEFAULT_TOL",
    "DistanceSpace",
    "Graph",
    "GuessTuple",
    "OracleBudget",
    "OracleBudgetError",
    "PartialRealizationProblem",
    "PlantedInstance",
    "PlantedSpec",
    "Realization",
    "Solution",
    "ToleranceConfig",
    "WeightedInstance",
    "alg1_branch",
    "alg2_branch",
    "apply_modifications",
    "as_pair",
    "brute_force_eeo",
    "brute_force_maxcut",
    "brute_force_vertex_cover",
    "brute_force_weeo",
    "cm_det",
    "cm_det_with_overrides",
    "compat_tests",
    "compress",
    "extend_to_max_independent",
    "feasible_with_free_pairs",
    "greedy_outliers",
    "incompatibility_graph",
    "is_embeddable",
    "is_independent",
    "is_strongly_embeddable",
    "maxcut_reduction",
    "obstruction_set",
    "paper_example",
    "partition_into_bases",
    "planted_instance",
    "rank_reduction",
    "realize",
    "repaired_space",
    "restrict",
    "run_sieve",
    "solution_cost",
    "solve_eeo",
    "solve_weeo",
    "strong_dim",
    "two_approx_outliers",
    "validate",
    "vc_reduction",
    "verify_solution",
    "verify_witness",
]
