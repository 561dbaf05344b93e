"""Numerical toolkit for non-symmetric jump kernels: integrability checks,
semi-Dirichlet forms, and nonlocal generator evaluation."""

from .errors import (
    ConfigError,
    DomainError,
    IOFailure,
    JumpformError,
    NegativeKernel,
    NoConvergence,
    QuadratureOverflow,
    UnresolvedKilling,
)
from .gridfn import Box, GridFunction
from .kernels import (
    AlphaFunction,
    JumpKernel,
    SplitKernel,
    beta_modulus,
    beta_profile,
    split,
    stable_like_kernel,
    transpose,
    weight_w,
)
from .quadrature import (
    DEFAULT_SCHEME,
    AnnulusScheme,
    PVEstimate,
    compensated_integral,
    drift_correction,
    pv_limit,
    truncated_integral,
)
from .conditions import (
    ConditionReport,
    check_A0,
    check_FU,
    check_beta_integral,
    check_local_pv_bound,
    check_misc_integrability,
    check_sector_ratio,
    sector_ratio_at,
)
from .forms import (
    BoundReport,
    FormValue,
    MarkovReport,
    bound_checks,
    energy_E,
    eta,
    eta_n,
    markov_check,
    union_box,
)
from .operators import (
    KillingTerm,
    OperatorEvaluation,
    SignReport,
    apply_B,
    apply_L,
    apply_Lambda,
    apply_Lstar,
    apply_Ltilde,
    killing_term,
    submarkov_sign,
    symbol_check,
)
from .config import RunConfig, RunReport, parse_config, run, validate_config

__version__ = "0.1.0"

__all__ = [
    "JumpformError",
    "NegativeKernel",
    "DomainError",
    "QuadratureOverflow",
    "NoConvergence",
    "UnresolvedKilling",
    "ConfigError",
    "IOFailure",
    "Box",
    "GridFunction",
    "AlphaFunction",
    "JumpKernel",
    "SplitKernel",
    "split",
    "transpose",
    "weight_w",
    "stable_like_kernel",
    "beta_profile",
    "beta_modulus",
    "AnnulusScheme",
    "DEFAULT_SCHEME",
    "PVEstimate",
    "truncated_integral",
    "compensated_integral",
    "drift_correction",
    "pv_limit",
    "ConditionReport",
    "check_A0",
    "check_sector_ratio",
    "check_FU",
    "check_local_pv_bound",
    "check_misc_integrability",
    "check_beta_integral",
    "sector_ratio_at",
    "FormValue",
    "MarkovReport",
    "BoundReport",
    "energy_E",
    "eta",
    "eta_n",
    "markov_check",
    "bound_checks",
    "union_box",
    "OperatorEvaluation",
    "KillingTerm",
    "SignReport",
    "apply_L",
    "apply_Lambda",
    "apply_Ltilde",
    "apply_Lstar",
    "apply_B",
    "killing_term",
    "symbol_check",
    "submarkov_sign",
    "RunConfig",
    "RunReport",
    "parse_config",
    "validate_config",
    "run",
    "__version__",
]
