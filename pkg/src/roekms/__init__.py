"""KMS states on uniform Roe algebras, computed on finite truncations."""

__version__ = "0.1.0"

from .asymptotics import (
    build_thin_set,
    convergence_verdict,
    critical_beta,
    higson_variation,
    mass_at_infinity_profile,
)
from .diagonal import Diagonal
from .errors import (
    ConditioningError,
    DimensionMismatchError,
    DivergenceError,
    EmptySpaceError,
    MagnitudeError,
    MetricError,
    NegativeWeightError,
    RoeKmsError,
)
from .flow import Potential, analytic_evolve, evolve, named_potential
from .kms import (
    DiagonalState,
    KmsReport,
    MatrixState,
    gibbs_state,
    kms_audit,
    kms_defect_criterion,
    kms_defect_direct,
    kms_to_trace,
    partition_function,
    trace_to_kms,
)
from .operator import BandOperator, band_decompose, expectation, isometry_of
from .space import (
    FiniteSpace,
    TruncationSequence,
    from_distance_matrix,
    make_interval,
    make_squares,
    make_tree,
)
from .translation import PartialTranslation, compose, image_under, inverse, separated_partition
from .tree import (
    branch_isometry,
    cylinder_mass,
    cylinder_product,
    explicit_tree_state,
    phase_report,
    pushforward_state,
    shift_kms_defect,
)
