"""Fixed-effects panel estimators and performance indicators for research centers.

Estimators: :func:`fit_fe` (within regression with year dummies) and
:func:`fit_fep` (conditional fixed-effects Poisson), plus scikit-learn style
wrappers :class:`FixedEffectsOLS` and :class:`FixedEffectsPoisson`.
"""
__version__ = "0.1.0"

from .design import ModelSpec
from .exceptions import CrcEvalError
from .linear import (
    FitResult,
    FixedEffectsOLS,
    WithinTransformer,
    cluster_robust_vcov,
    detect_collinearity,
    fit_fe,
    interpret_level_log,
    interpret_semi_elasticity,
    within_transform,
)
from .panel import (
    DropReport,
    Panel,
    PanelObservation,
    add_lags,
    drop_singleton_groups,
    ingest_panel,
    log_transform,
    read_panel,
)
from .poisson import FepFit, FepGroup, FixedEffectsPoisson, fep_loglik, fep_score, fit_fep

__all__ = [
    "ModelSpec",
    "CrcEvalError",
    "FitResult",
    "FixedEffectsOLS",
    "WithinTransformer",
    "cluster_robust_vcov",
    "detect_collinearity",
    "fit_fe",
    "interpret_level_log",
    "interpret_semi_elasticity",
    "within_transform",
    "DropReport",
    "Panel",
    "PanelObservation",
    "add_lags",
    "drop_singleton_groups",
    "ingest_panel",
    "log_transform",
    "read_panel",
    "FepFit",
    "FepGroup",
    "FixedEffectsPoisson",
    "fep_loglik",
    "fep_score",
    "fit_fep",
]
