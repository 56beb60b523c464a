"""Splitting solvers for structured monotone inclusions 0 in Ax + Bx + Cx,
with a deterministic momentum scheme, a loopless variance-reduced variant,
and benchmark problem builders."""

from .diagnostics import (
    det_rate_factor,
    fit_geometric_rate,
    gamma_lyap,
    phi,
    stoch_rate_factor,
)
from .kernels import ScaledMetricKernel, ShiftedKernel, warped_resolvent
from .metric import Metric
from .operators import (
    AffineOp,
    BoxNormalCone,
    CappedSimplexNormalCone,
    IdentityPlus,
    NonnegOrthantNormalCone,
    ProductOp,
    QuadraticGradient,
    Scaled,
    SetValuedOp,
    SingleValuedOp,
    SkewSaddle,
    SumOp,
    ZeroCone,
    ZeroMap,
    estimate_opnorm,
    project_capped_simplex,
)
from .problems import (
    ParseError,
    PortfolioInstance,
    SplitProblem,
    build_portfolio,
    build_qp_saddle,
    build_strong_synthetic,
    fourop_variant,
    parse_orlibrary,
    split_B_finite_sum,
    split_saddle_B,
)
from .report import RunReport
from .solver_det import (
    DetState,
    DivergenceError,
    StepPlan,
    StoppingRule,
    auto_gamma,
    chi_stepsize,
    default_gamma_fbhf,
    default_gamma_fourop,
    det_solve,
    det_step,
    fourop_stepsize_bar,
    validate_stepsize,
)
from .solver_stoch import (
    FiniteSumOracle,
    StochConfig,
    StochState,
    stoch_solve,
    stoch_step,
    strong_preset,
    validate_stoch,
)

__version__ = "0.1.0"

__all__ = [
    "Metric",
    "SetValuedOp",
    "ZeroCone",
    "BoxNormalCone",
    "NonnegOrthantNormalCone",
    "CappedSimplexNormalCone",
    "ProductOp",
    "IdentityPlus",
    "SingleValuedOp",
    "ZeroMap",
    "AffineOp",
    "SkewSaddle",
    "QuadraticGradient",
    "SumOp",
    "Scaled",
    "project_capped_simplex",
    "estimate_opnorm",
    "ScaledMetricKernel",
    "ShiftedKernel",
    "warped_resolvent",
    "StepPlan",
    "StoppingRule",
    "DetState",
    "StochState",
    "DivergenceError",
    "validate_stepsize",
    "chi_stepsize",
    "fourop_stepsize_bar",
    "default_gamma_fbhf",
    "default_gamma_fourop",
    "auto_gamma",
    "det_step",
    "det_solve",
    "FiniteSumOracle",
    "StochConfig",
    "validate_stoch",
    "strong_preset",
    "stoch_step",
    "stoch_solve",
    "SplitProblem",
    "PortfolioInstance",
    "ParseError",
    "build_qp_saddle",
    "split_saddle_B",
    "fourop_variant",
    "parse_orlibrary",
    "build_portfolio",
    "build_strong_synthetic",
    "split_B_finite_sum",
    "RunReport",
    "phi",
    "gamma_lyap",
    "det_rate_factor",
    "stoch_rate_factor",
    "fit_geometric_rate",
]
