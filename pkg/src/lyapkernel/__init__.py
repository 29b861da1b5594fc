"""Certified top Lyapunov exponents of random products of 2x2 matrices."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ArcConstructionFailed,
    BudgetExceeded,
    NotStrictlyContracting,
    PositivityFailed,
    PreconditionError,
)
from .kernel import (  # noqa: E402
    CertifiedValue,
    KernelSystem,
    WeightedFamily,
    build_kernel_system,
    build_T,
    build_v,
    choose_r,
    compute_lyapunov,
    error_constants,
    partial_sum,
    select_parameters,
    truncation_bound,
)
from .projective import Matrix2, Mobius, apply_F, apply_F_inverse  # noqa: E402

__all__ = [
    "ArcConstructionFailed",
    "BudgetExceeded",
    "CertifiedValue",
    "KernelSystem",
    "Matrix2",
    "Mobius",
    "NotStrictlyContracting",
    "PositivityFailed",
    "PreconditionError",
    "WeightedFamily",
    "apply_F",
    "apply_F_inverse",
    "build_T",
    "build_kernel_system",
    "build_v",
    "choose_r",
    "compute_lyapunov",
    "error_constants",
    "partial_sum",
    "select_parameters",
    "truncation_bound",
]
