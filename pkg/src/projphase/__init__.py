"""Phase retrieval from the magnitudes of orthogonal projections.

Sample collections of projections, decide whether ``x -> (|P_i x|^2)_i``
is injective up to sign, produce colliding vectors when it is not, and
reconstruct vectors from their projection magnitudes.
"""

from .errors import *  # noqa: F401,F403
from .injectivity import (
    CollisionPair,
    InjectivityVerdict,
    SearchBudget,
    SpanningDefect,
    Witness,
    certify_injective,
    collision_from_witness,
    complement_property,
    find_witness,
    measurement_map,
    min_defect_search,
    spanning_defect,
)
from .projections import (
    Projection,
    ProjectionCollection,
    Subspace,
    complement,
    projection_from_basis,
    sample_collection,
    sample_grassmannian,
    validate,
)
from .reconstruction import (
    MeasurementVector,
    ReconstructionResult,
    objective_and_gradient,
    reconstruct,
    recovery_error,
)
from .sharpness import (
    BoundReport,
    central_binomial_2adic,
    obstruction_predicate,
    rank1_witness_by_linear_algebra,
)

__version__ = "0.1.0"
