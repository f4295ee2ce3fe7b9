"""Gaussian random fields on ultrametric ball-trees."""

from .tree import (
    BallTree,
    parse_tree,
    load_tree,
    generate_homogeneous,
    generate_random,
    TreeError,
    MalformedSpec,
    DuplicateId,
    Cycle,
    BranchingOne,
    NonPositiveMeasure,
    MeasureMismatch,
    ForeignLeaf,
    NotDescendant,
    OutOfRange,
)
from .wavelets import Wavelet, WaveletBasis, build_basis, evaluate, gram_matrix, projector_sum_check
from .pdo import (
    Symbol,
    Spectrum,
    symbol_from_tree,
    constant_symbol,
    random_symbol,
    apply_dense,
    dense_operator_matrix,
    spectrum,
    eigenvalue_path_sum,
    verify_eigen,
    convergence_report,
    ConvergenceReport,
    DimensionMismatch,
)
from .field import (
    CovarianceKernel,
    FieldSample,
    WhiteNoiseSample,
    kernel_value,
    covariance_kernel,
    kernel_bruteforce,
    sample_field,
    sample_white_noise,
    check_equation,
    bilinear_form,
    markov_check,
    empirical_covariance,
    random_markov_instance,
    ZeroEigenvalue,
    PreconditionViolated,
)

__version__ = "0.1.0"
