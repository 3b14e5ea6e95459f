"""Derived variables and the panel estimators."""
from .features import apply_transform, build_feature_panel, build_pair_panel, parse_transform
from .regression import (
    TREAT_POST,
    RegressionResult,
    RegressionSpec,
    absorb,
    did,
    pairwise_comovement,
    twfe_ols,
)
from .stats import pearson_matrix, pearson_r_p, t_two_sided_p
from .transforms import forward_net_inflow, forward_return, ma7, rolling_corr, signed_log, trailing_return

__all__ = [
    "TREAT_POST",
    "RegressionResult",
    "RegressionSpec",
    "absorb",
    "apply_transform",
    "build_feature_panel",
    "build_pair_panel",
    "did",
    "forward_net_inflow",
    "forward_return",
    "ma7",
    "pairwise_comovement",
    "parse_transform",
    "pearson_matrix",
    "pearson_r_p",
    "rolling_corr",
    "signed_log",
    "t_two_sided_p",
    "trailing_return",
    "twfe_ols",
]
