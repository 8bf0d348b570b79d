"""Dimension reduction for projective clustering by random orthogonal projection.

Modules
-------
geometry    point sets, flats, distances, minimum enclosing balls
projection  random projections, target dimensions, distortion checks
coresets    single-center coresets and the simplex lower-bound instance
clustering  exact and heuristic solvers for ``f_k^q(P, rho)``
pipeline    project-solve-lift clustering and the streaming engine
cech        Čech filtrations and the projection sandwich check
cli         the ``projclust`` command
"""

__version__ = "0.1.0"

from .geometry import (
    Ball,
    QFlat,
    best_fit_flat_l2,
    meb,
    objective,
    point_to_flat_distance,
    span_basis,
)
from .projection import (
    DimensionBudget,
    ProjectionMap,
    jl_dimension,
    make_projection,
    project,
    projective_dimension,
    subspace_dimension,
    verify_flat_distance_distortion,
    verify_pairwise_distortion,
    verify_subspace_distortion,
)
from .coresets import (
    CenterOracle,
    Coreset,
    SimplexInstance,
    frank_wolfe_coreset,
    greedy_center_coreset,
    meb_coreset,
    optimal_center,
    simplex_lower_bound,
)
from .clustering import (
    ClusteringSolution,
    ProblemSpec,
    alternating_qflat,
    brute_force_optimal,
    k_center_greedy,
    lloyd_kmeans,
    solve,
    verify_objective_preservation,
)
from .pipeline import (
    PipelineConfig,
    StreamState,
    cluster_via_projection,
    space_report,
    stream_ingest,
    stream_query,
)
from .cech import FilteredComplex, build_cech, verify_sandwich
