"""Additive nonnegative matrix factorization and missing-attribute imputation."""
from .anmf import (
    AdditiveFactorization,
    Scheme,
    additive_reconstruct,
    gradient_term_h,
    joint_factorize,
    joint_update_term_h,
    joint_update_term_w,
    multi_stage_factorize,
)
from .errors import ConfigError, DataError, DimensionError, MaskError, NumericFailure
from .imputation import (
    ImputationResult,
    MaskedVector,
    fit_h_masked,
    impute_matrix,
    impute_point,
    impute_point_additive,
    masked_objective,
)
from .matrix import clamp_nonneg, frobenius_error, partition_rows
from .nmf import (
    ConvergenceTrace,
    Factorization,
    SolverConfig,
    factorize,
    fit_h_fixed_w,
    init_factors,
    update_h,
    update_w,
)

__version__ = "0.1.0"
