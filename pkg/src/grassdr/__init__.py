"""Nested-Grassmann dimensionality reduction for subspace-valued data."""

from .baselines import PgaModel, gknn_loo, pga_coordinates, pga_explained_variance, pga_fit, spga_fit
from .datagen import SynthConfig, SyntheticData, generate, two_class_shapes
from .errors import (
    ConvergenceError,
    CutLocusError,
    DegenerateInputError,
    DegenerateProjectionError,
    DegenerateShapeError,
    FormatError,
    GrassdrError,
    InvalidTangentError,
    ShapeError,
    SupervisionDegenerateError,
    UndefinedRatioError,
)
from .geometry import (
    GrassmannPoint,
    TangentVector,
    adjoint,
    exp_map,
    frechet_mean,
    geodesic_distance,
    log_map,
    orthonormal_columns,
    orthonormalize,
    pairwise_distances,
    principal_angles,
    projection_distance,
    sample_stiefel_uniform,
    stack_points,
    tangent_project,
)
from .nested import (
    FitReport,
    NestedMap,
    SequenceEntry,
    build_affinity,
    embed_point,
    explained_variance_ratio,
    fit_supervised,
    fit_unsupervised,
    loss_supervised,
    loss_unsupervised,
    nested_sequence,
    project_dataset,
    project_point,
    reconstruct_point,
    variance,
)
from .optim import (
    OptimizeResult,
    OptimizerConfig,
    ProductPoint,
    ProductTangent,
    check_gradient,
    minimize,
    retract,
    riemannian_gradient,
    transport,
)
from .shape import KAds, kads_to_grassmann, shape_distance

__version__ = "0.1.0"
