"""Shape-constrained estimation of survey domain means.

Domain means estimated from a probability sample are projected onto a
polyhedral cone ``{theta : A theta >= 0}`` (monotonicity, tree or partial
orders, block orderings), with linearization and replicate variance
estimators for the constrained means.
"""

from .cone import (
    ConeProjectionResult,
    CyclingError,
    InvalidFaceError,
    enumerate_faces_oracle,
    enumerate_valid_faces,
    is_valid_face,
    project_cone,
    project_polar,
    reduce_face,
    span_projection,
)
from .constraints import (
    ConstraintError,
    ConstraintMatrix,
    DomainGrid,
    IrreducibilityCertificate,
    PolarEdgeSet,
    build_monotone,
    build_partial_order,
    build_tree_order,
    check_irreducible,
    transform_by_weights,
)
from .estimation import (
    ConstrainedEstimate,
    DomainEstimates,
    EmptyDomainError,
    SampleData,
    constrained_estimate,
    domain_estimates,
    hajek_from_weights,
    maxmin_estimate,
    pooled_blocks,
)
from .variance import (
    LinearizedVariance,
    ReplicateScheme,
    dagjk_replicates,
    ht_variance,
    linearized_variance,
    replicate_estimates,
    replicate_variance,
    theta_fixed_face,
    wald_interval,
)

__version__ = "0.1.0"
